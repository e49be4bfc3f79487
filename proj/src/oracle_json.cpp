#include <initializer_list>
#include <string>

#include "chiral/oracle.hpp"
#include "json.hpp"

namespace chiral::oracle {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) {
  throw Error(ErrorCode::InvalidArgument, msg);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) bad(where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) bad("unknown key '" + it.key() + "' in " + where);
  }
}

double require_num(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) bad(where + " requires numeric field '" + key + "'");
  const json& v = obj.at(key);
  if (!v.is_number()) bad(where + "." + key + " must be a number");
  return v.get<double>();
}

double opt_num(const json& obj, const char* key, double fallback,
               const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) bad(where + "." + key + " must be a number");
  return v.get<double>();
}

int opt_int(const json& obj, const char* key, int fallback,
            const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) bad(where + "." + key + " must be an integer");
  return v.get<int>();
}

EmitterSpec parse_spec(const json& e, const std::string& where) {
  if (!e.contains("type") || !e.at("type").is_string())
    bad(where + " requires a string field 'type'");
  const std::string type = e.at("type").get<std::string>();
  if (type == "two_level") {
    check_keys(e, {"type", "omega", "g", "position"}, where);
    return TwoLevel{require_num(e, "omega", where), require_num(e, "g", where)};
  }
  if (type == "non_rwa") {
    check_keys(e, {"type", "omega", "g", "gprime", "position"}, where);
    return NonRwaTwoLevel{require_num(e, "omega", where),
                          require_num(e, "g", where),
                          require_num(e, "gprime", where)};
  }
  if (type == "dicke") {
    check_keys(e, {"type", "m", "omega", "g", "position"}, where);
    if (!e.contains("m") || !e.at("m").is_number_integer())
      bad(where + " requires integer field 'm'");
    return Dicke{e.at("m").get<int>(), require_num(e, "omega", where),
                 require_num(e, "g", where)};
  }
  if (type == "lambda") {
    check_keys(e, {"type", "eps1", "eps2", "eps3", "g31", "g32", "position"},
               where);
    return Lambda{require_num(e, "eps1", where), require_num(e, "eps2", where),
                  require_num(e, "eps3", where), require_num(e, "g31", where),
                  require_num(e, "g32", where)};
  }
  if (type == "vscheme") {
    check_keys(e, {"type", "eps1", "eps2", "eps3", "g21", "g31", "position"},
               where);
    return Vscheme{require_num(e, "eps1", where), require_num(e, "eps2", where),
                   require_num(e, "eps3", where), require_num(e, "g21", where),
                   require_num(e, "g31", where)};
  }
  if (type == "sigma") {
    check_keys(e, {"type", "eps1", "eps2", "eps3", "g21", "g32", "position"},
               where);
    return Sigma{require_num(e, "eps1", where), require_num(e, "eps2", where),
                 require_num(e, "eps3", where), require_num(e, "g21", where),
                 require_num(e, "g32", where)};
  }
  bad(where + " has unknown emitter type '" + type + "'");
}

EmitterChain parse_chain(const json& sys) {
  check_keys(sys, {"emitters", "concentrated"}, "system");
  if (!sys.contains("emitters") || !sys.at("emitters").is_array())
    bad("system requires an array field 'emitters'");
  EmitterChain chain;
  if (sys.contains("concentrated")) {
    if (!sys.at("concentrated").is_boolean())
      bad("system.concentrated must be a boolean");
    chain.concentrated = sys.at("concentrated").get<bool>();
  }
  int index = 0;
  for (const auto& e : sys.at("emitters")) {
    const std::string where = "system.emitters[" + std::to_string(index) + "]";
    ChainEntry entry;
    entry.spec = parse_spec(e, where);
    entry.position = opt_num(e, "position", 0.0, where);
    chain.entries.push_back(entry);
    ++index;
  }
  return chain;
}

DiscretizationConfig parse_disc(const json& root) {
  DiscretizationConfig cfg;
  if (!root.contains("discretization")) return cfg;
  const json& d = root.at("discretization");
  check_keys(d,
             {"n_modes", "bandwidth", "sigma_p", "x0", "t_final", "dt",
              "eta_switch", "lanczos_tol", "krylov_dim"},
             "discretization");
  cfg.n_modes = opt_int(d, "n_modes", cfg.n_modes, "discretization");
  cfg.bandwidth = opt_num(d, "bandwidth", cfg.bandwidth, "discretization");
  cfg.sigma_p = opt_num(d, "sigma_p", cfg.sigma_p, "discretization");
  cfg.x0 = opt_num(d, "x0", cfg.x0, "discretization");
  cfg.t_final = opt_num(d, "t_final", cfg.t_final, "discretization");
  cfg.dt = opt_num(d, "dt", cfg.dt, "discretization");
  cfg.eta_switch = opt_num(d, "eta_switch", cfg.eta_switch, "discretization");
  cfg.lanczos_tol = opt_num(d, "lanczos_tol", cfg.lanczos_tol, "discretization");
  cfg.krylov_dim = opt_int(d, "krylov_dim", cfg.krylov_dim, "discretization");
  return cfg;
}

json parse_root(const std::string& config_json) {
  json root;
  try {
    root = json::parse(config_json);
  } catch (const json::parse_error& err) {
    bad(std::string("config is not valid JSON: ") + err.what());
  }
  if (!root.is_object()) bad("config must be a JSON object");
  return root;
}

json disc_to_json(const Discretization& d) {
  json j;
  j["n_modes"] = d.n_modes;
  j["bandwidth"] = d.W;
  j["mode_spacing"] = d.dnu;
  j["box_length"] = d.L;
  j["k_center"] = d.k_center;
  j["sigma_p"] = d.sigma_p;
  j["x0"] = d.x0;
  j["t_final"] = d.t_final;
  j["eta_switch"] = d.eta_switch;
  return j;
}

json stats_to_json(const EvolveStats& s) {
  json j;
  j["steps"] = s.steps;
  j["matvecs"] = s.matvecs;
  j["norm_drift"] = s.norm_drift;
  j["max_step_error"] = s.max_step_error;
  return j;
}

}  // namespace

std::string run_s1_json(const std::string& config_json) {
  const json root = parse_root(config_json);
  check_keys(root, {"system", "k_center", "incoming_channel", "discretization"},
             "config");
  if (!root.contains("system")) bad("config requires a 'system' object");
  const EmitterChain chain = parse_chain(root.at("system"));
  const double k_center = require_num(root, "k_center", "config");
  const int channel = opt_int(root, "incoming_channel", 1, "config");
  const DiscretizationConfig cfg = parse_disc(root);

  const S1Run run = run_s1(chain, k_center, cfg, channel);

  json out;
  out["kind"] = "one_photon_oracle";
  out["discretization"] = disc_to_json(run.disc);
  out["warnings"] = run.disc.warnings;
  out["stats"] = stats_to_json(run.stats);
  out["atomic_residual"] = run.atomic_residual;
  out["chirality_left_tail"] = run.chirality_left_tail;
  json nu = json::array(), sre = json::array(), sim = json::array();
  json c2re = json::array(), c2im = json::array();
  for (size_t i = 0; i < run.support.size(); ++i) {
    const int m = run.support[i];
    nu.push_back(run.disc.nu[static_cast<size_t>(m)]);
    sre.push_back(run.s_ratio[i].real());
    sim.push_back(run.s_ratio[i].imag());
    if (!run.out_channel2.empty()) {
      c2re.push_back(run.out_channel2[static_cast<size_t>(m)].real());
      c2im.push_back(run.out_channel2[static_cast<size_t>(m)].imag());
    }
  }
  out["support"] = run.support;
  out["nu"] = nu;
  out["s_re"] = sre;
  out["s_im"] = sim;
  if (!run.out_channel2.empty()) {
    out["channel2_re"] = c2re;
    out["channel2_im"] = c2im;
  }
  return out.dump(2);
}

std::string run_s2_json(const std::string& config_json) {
  const json root = parse_root(config_json);
  check_keys(root, {"system", "k_center", "discretization"}, "config");
  if (!root.contains("system")) bad("config requires a 'system' object");
  const EmitterChain chain = parse_chain(root.at("system"));
  const double k_center = require_num(root, "k_center", "config");
  const DiscretizationConfig cfg = parse_disc(root);

  const S2Run run = run_s2(chain, k_center, cfg);
  const PairDiagnostics diag = pair_diagnostics(run);

  json out;
  out["kind"] = "two_photon_oracle";
  out["discretization"] = disc_to_json(run.disc);
  out["warnings"] = run.disc.warnings;
  out["stats"] = stats_to_json(run.stats);
  json metrics;
  metrics["overlap_full"] = run.overlap_full;
  metrics["overlap_connected"] = run.overlap_connected;
  metrics["connected_norm_ratio"] = run.connected_norm_ratio;
  metrics["atomic_residual"] = run.atomic_residual;
  out["metrics"] = metrics;
  json d;
  d["separation"] = diag.separation;
  d["full_density"] = diag.full_density;
  d["elastic_density"] = diag.elastic_density;
  d["connected_density"] = diag.connected_density;
  d["fitted_tail_rate"] = diag.fitted_tail_rate;
  d["coincidence_ratio"] = diag.coincidence_ratio;
  d["dip_ratio"] = diag.dip_ratio;
  d["dip_separation"] = diag.dip_separation;
  out["diagnostics"] = d;
  return out.dump(2);
}

}  // namespace chiral::oracle
