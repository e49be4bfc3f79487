// chiral-smatrix: command-line front end to the chiral-channel scattering
// library.  Talks exclusively to the C interface (chiral_smatrix.h).
//
// Units: the configuration declares couplings relative to the reference
// coupling g_ref; all energies, momenta and inverse lengths are measured in
// units of the reference half-width Gamma_ref = pi * g_ref^2.  A coupling
// g = 1 therefore scatters with half-width exactly 1.
//
// Exit codes: 0 success, 1 failed checks (verify failures, --strict flags,
// oracle disagreement), 2 malformed configuration or off-shell input.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "chiral_smatrix.h"
#include "json.hpp"

namespace {

using nlohmann::json;

constexpr double kInvRootPi = 0.5641895835477563;  // coupling of unit half-width

struct CliError {
  int exit_code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) {
  throw CliError{code, message};
}

[[noreturn]] void fail_api(const std::string& context) {
  fail(2, context + ": " + csm_last_error());
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt12(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

std::string fmt3(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// RAII wrappers over the C handles
// ---------------------------------------------------------------------------

struct EmitterDeleter {
  void operator()(csm_emitter* e) const { csm_emitter_free(e); }
};
struct ChainDeleter {
  void operator()(csm_chain* c) const { csm_chain_free(c); }
};
struct CoherentDeleter {
  void operator()(csm_coherent* c) const { csm_coherent_free(c); }
};
using EmitterPtr = std::unique_ptr<csm_emitter, EmitterDeleter>;
using ChainPtr = std::unique_ptr<csm_chain, ChainDeleter>;
using CoherentPtr = std::unique_ptr<csm_coherent, CoherentDeleter>;

// ---------------------------------------------------------------------------
// Configuration handling
// ---------------------------------------------------------------------------

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(2, "cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::parse_error& err) {
    fail(2, "config is not valid JSON: " + std::string(err.what()));
  }
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) fail(2, where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) fail(2, "unknown key '" + it.key() + "' in " + where);
  }
}

double require_num(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key))
    fail(2, where + " requires numeric field '" + key + "'");
  if (!obj.at(key).is_number()) fail(2, where + "." + key + " must be a number");
  return obj.at(key).get<double>();
}

double opt_num(const json& obj, const char* key, double fallback,
               const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) fail(2, where + "." + key + " must be a number");
  return obj.at(key).get<double>();
}

int opt_int(const json& obj, const char* key, int fallback,
            const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number_integer())
    fail(2, where + "." + key + " must be an integer");
  return obj.at(key).get<int>();
}

// Builds one emitter handle from its configuration object; couplings in the
// config are multiples of g_ref and are rescaled to internal units here.
EmitterPtr emitter_from_json(const json& e, const std::string& where) {
  if (!e.contains("type") || !e.at("type").is_string())
    fail(2, where + " requires a string field 'type'");
  const std::string type = e.at("type").get<std::string>();
  const auto g = [&](const char* key) {
    const double val = require_num(e, key, where);
    return val * kInvRootPi;
  };
  csm_emitter* raw = nullptr;
  if (type == "two_level") {
    check_keys(e, {"type", "omega", "g", "position"}, where);
    raw = csm_emitter_two_level(require_num(e, "omega", where), g("g"));
  } else if (type == "non_rwa") {
    check_keys(e, {"type", "omega", "g", "gprime", "position"}, where);
    raw = csm_emitter_non_rwa(require_num(e, "omega", where), g("g"),
                              g("gprime"));
  } else if (type == "dicke") {
    check_keys(e, {"type", "m", "omega", "g", "position"}, where);
    raw = csm_emitter_dicke(opt_int(e, "m", 1, where),
                            require_num(e, "omega", where), g("g"));
  } else if (type == "lambda") {
    check_keys(e, {"type", "eps1", "eps2", "eps3", "g31", "g32", "position"},
               where);
    raw = csm_emitter_lambda(require_num(e, "eps1", where),
                             require_num(e, "eps2", where),
                             require_num(e, "eps3", where), g("g31"), g("g32"));
  } else if (type == "vscheme") {
    check_keys(e, {"type", "eps1", "eps2", "eps3", "g21", "g31", "position"},
               where);
    raw = csm_emitter_vscheme(require_num(e, "eps1", where),
                              require_num(e, "eps2", where),
                              require_num(e, "eps3", where), g("g21"),
                              g("g31"));
  } else if (type == "sigma") {
    check_keys(e, {"type", "eps1", "eps2", "eps3", "g21", "g32", "position"},
               where);
    raw = csm_emitter_sigma(require_num(e, "eps1", where),
                            require_num(e, "eps2", where),
                            require_num(e, "eps3", where), g("g21"), g("g32"));
  } else {
    fail(2, where + " has unknown emitter type '" + type + "'");
  }
  if (raw == nullptr) fail_api(where);
  return EmitterPtr(raw);
}

struct SystemHandles {
  ChainPtr chain;
  std::vector<EmitterPtr> emitters;
  const json* block = nullptr;
};

SystemHandles system_from_config(const json& config) {
  if (!config.contains("system"))
    fail(2, "config requires a 'system' object");
  const json& sys = config.at("system");
  check_keys(sys, {"emitters", "concentrated"}, "system");
  if (!sys.contains("emitters") || !sys.at("emitters").is_array() ||
      sys.at("emitters").empty())
    fail(2, "system.emitters must be a non-empty array");

  SystemHandles handles;
  handles.block = &sys;
  bool concentrated = false;
  if (sys.contains("concentrated")) {
    if (!sys.at("concentrated").is_boolean())
      fail(2, "system.concentrated must be a boolean");
    concentrated = sys.at("concentrated").get<bool>();
  }
  handles.chain.reset(csm_chain_new(concentrated ? 1 : 0));
  if (!handles.chain) fail_api("system");
  int index = 0;
  for (const auto& e : sys.at("emitters")) {
    const std::string where = "system.emitters[" + std::to_string(index) + "]";
    EmitterPtr emitter = emitter_from_json(e, where);
    const double position = opt_num(e, "position", 0.0, where);
    if (csm_chain_add(handles.chain.get(), emitter.get(), position) != CSM_OK)
      fail_api(where);
    handles.emitters.push_back(std::move(emitter));
    ++index;
  }
  if (csm_chain_validate(handles.chain.get()) != CSM_OK) fail_api("system");
  return handles;
}

// Repacks the config system block with couplings rescaled to internal units
// (the oracle entry points of the library speak internal units directly).
json internal_system(const json& sys) {
  json out = sys;
  if (out.contains("emitters")) {
    for (auto& e : out.at("emitters")) {
      for (const char* key : {"g", "gprime", "g21", "g31", "g32"}) {
        if (e.contains(key) && e.at(key).is_number())
          e[key] = e.at(key).get<double>() * kInvRootPi;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output table
// ---------------------------------------------------------------------------

struct OutputTable {
  std::string command;
  std::vector<std::string> columns;
  std::vector<json> rows;
  std::vector<std::string> comments;
  json extra = json::object();

  std::string render(bool as_json) const {
    if (as_json) {
      json doc;
      doc["command"] = command;
      doc["comments"] = comments;
      doc["columns"] = columns;
      doc["rows"] = rows;
      for (auto it = extra.begin(); it != extra.end(); ++it)
        doc[it.key()] = it.value();
      return doc.dump(2) + "\n";
    }
    std::string text;
    for (const auto& c : comments) text += "# " + c + "\n";
    for (size_t i = 0; i < columns.size(); ++i) {
      text += columns[i];
      text += (i + 1 < columns.size()) ? ',' : '\n';
    }
    for (const auto& row : rows) {
      for (size_t i = 0; i < columns.size(); ++i) {
        const json& v = row.at(columns[i]);
        if (v.is_number_integer())
          text += std::to_string(v.get<long long>());
        else if (v.is_boolean())
          text += v.get<bool>() ? "1" : "0";
        else if (v.is_number())
          text += fmt17(v.get<double>());
        else
          text += v.get<std::string>();
        text += (i + 1 < columns.size()) ? ',' : '\n';
      }
    }
    return text;
  }
};

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) fail(2, "cannot write output file '" + out_path + "'");
  out << text;
}

// ---------------------------------------------------------------------------
// Shared command context
// ---------------------------------------------------------------------------

struct Context {
  json config;
  double pole_guard = -1.0;
  bool strict = false;
  bool with_oracle = false;
  std::string format = "csv";
  std::string out_path;
};

std::vector<double> grid_from_block(const json& block, const char* min_key,
                                    const char* max_key, const char* count_key,
                                    const std::string& where) {
  const double lo = require_num(block, min_key, where);
  const double hi = require_num(block, max_key, where);
  const int count = opt_int(block, count_key, 101, where);
  if (count < 1 || count > 1000000) fail(2, where + ": count out of range");
  std::vector<double> grid(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i)
    grid[static_cast<size_t>(i)] =
        count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  return grid;
}

bool is_single_lambda(const json& sys) {
  const auto& emitters = sys.at("emitters");
  return emitters.size() == 1 &&
         emitters.at(0).value("type", "") == "lambda";
}

// ---------------------------------------------------------------------------
// s1 command
// ---------------------------------------------------------------------------

int cmd_s1(Context& ctx, OutputTable& table) {
  if (!ctx.config.contains("s1"))
    fail(2, "the s1 command requires an 's1' block in the config");
  const json& block = ctx.config.at("s1");
  check_keys(block, {"points", "p_min", "p_max", "count", "incoming_channel"},
             "s1");

  std::vector<double> momenta;
  if (block.contains("points")) {
    if (!block.at("points").is_array()) fail(2, "s1.points must be an array");
    for (const auto& p : block.at("points")) {
      if (!p.is_number()) fail(2, "s1.points entries must be numbers");
      momenta.push_back(p.get<double>());
    }
  } else {
    momenta = grid_from_block(block, "p_min", "p_max", "count", "s1");
  }

  SystemHandles sys = system_from_config(ctx.config);
  const bool lambda = is_single_lambda(*sys.block);
  const int channel = opt_int(block, "incoming_channel", 1, "s1");
  bool any_flagged = false;

  table.command = "s1";
  if (lambda) {
    table.columns = {"p",      "s11_re", "s11_im", "s21_re", "s21_im",
                     "s12_re", "s12_im", "s22_re", "s22_im", "p_out1",
                     "p_out2", "flagged"};
    table.comments.push_back("incoming_channel = " + std::to_string(channel));
    for (double p : momenta) {
      csm_complex channels[4];
      double p_out[2];
      csm_complex elastic;
      int flagged = 0;
      if (csm_s1_lambda(sys.emitters[0].get(), p, channel, ctx.pole_guard,
                        channels, p_out, &elastic, &flagged) != CSM_OK)
        fail_api("s1");
      any_flagged = any_flagged || flagged != 0;
      json row;
      row["p"] = p;
      row["s11_re"] = channels[0].re;
      row["s11_im"] = channels[0].im;
      row["s21_re"] = channels[2].re;
      row["s21_im"] = channels[2].im;
      row["s12_re"] = channels[1].re;
      row["s12_im"] = channels[1].im;
      row["s22_re"] = channels[3].re;
      row["s22_im"] = channels[3].im;
      row["p_out1"] = p_out[0];
      row["p_out2"] = p_out[1];
      row["flagged"] = flagged;
      table.rows.push_back(std::move(row));
    }
  } else {
    table.columns = {"p", "s_re", "s_im", "s_abs", "s_arg", "flagged"};
    for (double p : momenta) {
      csm_complex s;
      int flagged = 0;
      if (csm_s1_chain(sys.chain.get(), p, ctx.pole_guard, &s, &flagged) !=
          CSM_OK)
        fail_api("s1");
      any_flagged = any_flagged || flagged != 0;
      json row;
      row["p"] = p;
      row["s_re"] = s.re;
      row["s_im"] = s.im;
      row["s_abs"] = std::hypot(s.re, s.im);
      row["s_arg"] = std::atan2(s.im, s.re);
      row["flagged"] = flagged;
      table.rows.push_back(std::move(row));
    }
  }

  int code = 0;
  if (ctx.with_oracle) {
    const json oracle_block = ctx.config.value("oracle", json::object());
    check_keys(oracle_block,
               {"k_center", "incoming_channel", "discretization", "oracle_tol",
                "min_overlap"},
               "oracle");
    json ocfg;
    ocfg["system"] = internal_system(*sys.block);
    ocfg["k_center"] = opt_num(oracle_block, "k_center", 0.0, "oracle");
    if (lambda) ocfg["incoming_channel"] = channel;
    if (oracle_block.contains("discretization"))
      ocfg["discretization"] = oracle_block.at("discretization");

    char* result = nullptr;
    const csm_status st = csm_oracle_s1_run(ocfg.dump().c_str(), &result);
    if (st != CSM_OK) {
      table.comments.push_back(std::string("oracle run failed: ") +
                               csm_last_error());
      code = 1;
    } else {
      const json out = json::parse(result);
      csm_string_free(result);
      double max_dev = 0.0;
      const auto& nu = out.at("nu");
      const auto& sre = out.at("s_re");
      const auto& sim = out.at("s_im");
      for (size_t i = 0; i < nu.size(); ++i) {
        csm_complex closed;
        int flagged = 0;
        if (lambda) {
          csm_complex channels[4];
          double p_out[2];
          if (csm_s1_lambda(sys.emitters[0].get(), nu[i].get<double>(),
                            channel, ctx.pole_guard, channels, p_out, &closed,
                            &flagged) != CSM_OK)
            fail_api("s1 oracle comparison");
        } else if (csm_s1_chain(sys.chain.get(), nu[i].get<double>(),
                                ctx.pole_guard, &closed, &flagged) != CSM_OK) {
          fail_api("s1 oracle comparison");
        }
        const double dev = std::hypot(closed.re - sre[i].get<double>(),
                                      closed.im - sim[i].get<double>());
        max_dev = std::max(max_dev, dev);
      }
      const double tol = opt_num(oracle_block, "oracle_tol", 0.05, "oracle");
      const double chirality = out.value("chirality_left_tail", -1.0);
      table.comments.push_back(
          "oracle: max|s_closed - s_oracle| = " + fmt3(max_dev) +
          " (tol " + fmt3(tol) + "), chirality_left_tail = " +
          fmt3(chirality));
      json osum;
      osum["max_deviation"] = max_dev;
      osum["tolerance"] = tol;
      osum["chirality_left_tail"] = chirality;
      osum["atomic_residual"] = out.value("atomic_residual", -1.0);
      osum["warnings"] = out.value("warnings", json::array());
      table.extra["oracle"] = osum;
      if (max_dev > tol) {
        table.comments.push_back("oracle deviation exceeds tolerance");
        code = 1;
      }
    }
  }
  if (ctx.strict && any_flagged) {
    table.comments.push_back("strict: pole-adjacent evaluations flagged");
    code = std::max(code, 1);
  }
  return code;
}

// ---------------------------------------------------------------------------
// s2 command
// ---------------------------------------------------------------------------

int cmd_s2(Context& ctx, OutputTable& table) {
  if (!ctx.config.contains("s2"))
    fail(2, "the s2 command requires an 's2' block in the config");
  const json& block = ctx.config.at("s2");
  check_keys(block,
             {"e_min", "e_max", "count", "delta", "delta_prime", "points",
              "quadruples"},
             "s2");

  SystemHandles sys = system_from_config(ctx.config);

  struct Point {
    double p1, p2, k1, k2;
  };
  std::vector<Point> points;
  if (block.contains("quadruples")) {
    if (!block.at("quadruples").is_array())
      fail(2, "s2.quadruples must be an array of [p1, p2, k1, k2]");
    for (const auto& q : block.at("quadruples")) {
      if (!q.is_array() || q.size() != 4)
        fail(2, "s2.quadruples entries must be arrays of four numbers");
      points.push_back({q[0].get<double>(), q[1].get<double>(),
                        q[2].get<double>(), q[3].get<double>()});
    }
  } else if (block.contains("points")) {
    for (const auto& p : block.at("points")) {
      check_keys(p, {"e", "delta", "delta_prime"}, "s2.points[]");
      const double e = require_num(p, "e", "s2.points[]");
      const double d = opt_num(p, "delta", 0.0, "s2.points[]");
      const double dp = opt_num(p, "delta_prime", 0.0, "s2.points[]");
      points.push_back({e / 2 + dp, e / 2 - dp, e / 2 + d, e / 2 - d});
    }
  } else {
    const std::vector<double> energies =
        grid_from_block(block, "e_min", "e_max", "count", "s2");
    const double d = opt_num(block, "delta", 0.0, "s2");
    const double dp = opt_num(block, "delta_prime", 0.0, "s2");
    for (double e : energies)
      points.push_back({e / 2 + dp, e / 2 - dp, e / 2 + d, e / 2 - d});
  }

  table.command = "s2";
  table.columns = {"e",  "delta", "delta_prime", "p1",     "p2",
                   "k1", "k2",    "t_re",        "t_im",   "flagged"};
  bool any_flagged = false;
  double e_lo = 0.0, e_hi = 0.0;
  bool first = true;
  for (const auto& pt : points) {
    csm_complex t;
    int flagged = 0;
    const csm_status st =
        csm_t2_kernel(sys.chain.get(), pt.p1, pt.p2, pt.k1, pt.k2,
                      ctx.pole_guard, &t, &flagged);
    if (st == CSM_ERR_OFF_SHELL) fail(2, std::string(csm_last_error()));
    if (st != CSM_OK) fail_api("s2");
    any_flagged = any_flagged || flagged != 0;
    const double e = pt.p1 + pt.p2;
    if (first || e < e_lo) e_lo = e;
    if (first || e > e_hi) e_hi = e;
    first = false;
    json row;
    row["e"] = e;
    row["delta"] = (pt.k1 - pt.k2) / 2;
    row["delta_prime"] = (pt.p1 - pt.p2) / 2;
    row["p1"] = pt.p1;
    row["p2"] = pt.p2;
    row["k1"] = pt.k1;
    row["k2"] = pt.k2;
    row["t_re"] = t.re;
    row["t_im"] = t.im;
    row["flagged"] = flagged;
    table.rows.push_back(std::move(row));
  }

  // Pole report for the scanned energy window.
  if (!points.empty()) {
    const double d0 = (points.front().k1 - points.front().k2) / 2;
    const double dp0 = (points.front().p1 - points.front().p2) / 2;
    const double radius = 0.5 * (e_hi - e_lo) + 25.0;
    const csm_complex center{0.5 * (e_hi + e_lo), 0.0};
    std::vector<csm_complex> locations(64);
    std::vector<int> kinds(64);
    int count = 0;
    if (csm_locate_poles(sys.chain.get(), d0, dp0, center, radius,
                         locations.data(), kinds.data(), 64, &count) ==
        CSM_OK) {
      json poles = json::array();
      for (int i = 0; i < count; ++i) {
        const char* kind = kinds[static_cast<size_t>(i)] == 0
                               ? "single_photon"
                               : (kinds[static_cast<size_t>(i)] == 1
                                      ? "pair_bound"
                                      : "collective");
        json p;
        p["re"] = locations[static_cast<size_t>(i)].re;
        p["im"] = locations[static_cast<size_t>(i)].im;
        p["kind"] = kind;
        poles.push_back(p);
        table.comments.push_back(
            std::string("pole ") + kind + " at E = (" +
            fmt3(locations[static_cast<size_t>(i)].re) + ", " +
            fmt3(locations[static_cast<size_t>(i)].im) + ")");
      }
      table.extra["poles"] = poles;
    }
  }

  int code = 0;
  if (ctx.with_oracle) {
    const json oracle_block = ctx.config.value("oracle", json::object());
    check_keys(oracle_block,
               {"k_center", "incoming_channel", "discretization", "oracle_tol",
                "min_overlap"},
               "oracle");
    json ocfg;
    ocfg["system"] = internal_system(*sys.block);
    ocfg["k_center"] = opt_num(oracle_block, "k_center", 0.0, "oracle");
    if (oracle_block.contains("discretization"))
      ocfg["discretization"] = oracle_block.at("discretization");
    char* result = nullptr;
    const csm_status st = csm_oracle_s2_run(ocfg.dump().c_str(), &result);
    if (st != CSM_OK) {
      table.comments.push_back(std::string("oracle run failed: ") +
                               csm_last_error());
      code = 1;
    } else {
      const json out = json::parse(result);
      csm_string_free(result);
      const double overlap =
          out.at("metrics").value("overlap_full", 0.0);
      const double min_overlap =
          opt_num(oracle_block, "min_overlap", 0.95, "oracle");
      table.comments.push_back("oracle: |<out|predicted>| overlap = " +
                               fmt3(overlap) + " (min " + fmt3(min_overlap) +
                               ")");
      table.extra["oracle"] = out.at("metrics");
      table.extra["oracle_diagnostics"] = out.at("diagnostics");
      if (overlap < min_overlap) {
        table.comments.push_back("oracle overlap below threshold");
        code = 1;
      }
    }
  }
  if (ctx.strict && any_flagged) {
    table.comments.push_back("strict: pole-adjacent evaluations flagged");
    code = std::max(code, 1);
  }
  return code;
}

// ---------------------------------------------------------------------------
// coherent command
// ---------------------------------------------------------------------------

int cmd_coherent(Context& ctx, OutputTable& table) {
  if (!ctx.config.contains("coherent"))
    fail(2, "the coherent command requires a 'coherent' block in the config");
  const json& block = ctx.config.at("coherent");
  check_keys(block,
             {"k", "alpha_re", "alpha_im", "nbar", "box_length", "n_max",
              "g2_scan"},
             "coherent");

  if (!ctx.config.contains("system"))
    fail(2, "config requires a 'system' object");
  const json& sys = ctx.config.at("system");
  check_keys(sys, {"emitters", "concentrated"}, "system");
  if (!sys.contains("emitters") || !sys.at("emitters").is_array() ||
      sys.at("emitters").size() != 1 ||
      sys.at("emitters").at(0).value("type", "") != "two_level")
    fail(2, "the coherent command requires a system with exactly one "
            "two_level emitter");
  const json& e = sys.at("emitters").at(0);
  check_keys(e, {"type", "omega", "g", "position"}, "system.emitters[0]");
  const double omega = require_num(e, "omega", "system.emitters[0]");
  const double g = require_num(e, "g", "system.emitters[0]") * kInvRootPi;

  const double k = require_num(block, "k", "coherent");
  double alpha_re = opt_num(block, "alpha_re", 0.0, "coherent");
  double alpha_im = opt_num(block, "alpha_im", 0.0, "coherent");
  if (block.contains("nbar")) {
    if (block.contains("alpha_re") || block.contains("alpha_im"))
      fail(2, "coherent: give either nbar or alpha_re/alpha_im, not both");
    const double nbar = require_num(block, "nbar", "coherent");
    if (nbar < 0) fail(2, "coherent.nbar must be >= 0");
    alpha_re = std::sqrt(nbar);
    alpha_im = 0.0;
  }
  const double box_length = require_num(block, "box_length", "coherent");
  const int n_max = opt_int(block, "n_max", 3, "coherent");

  CoherentPtr state(csm_coherent_new(k, alpha_re, alpha_im, box_length, omega,
                                     g, n_max));
  if (!state) fail_api("coherent");

  std::vector<double> weights(static_cast<size_t>(n_max) + 1);
  std::vector<double> errors(static_cast<size_t>(n_max) + 1);
  int count = 0;
  double nbar_out = 0.0;
  if (csm_coherent_statistics(state.get(), weights.data(), errors.data(),
                              n_max + 1, &count, &nbar_out) != CSM_OK)
    fail_api("coherent");

  table.command = "coherent";
  table.comments.push_back("nbar = " + fmt12(nbar_out));

  json stats_rows = json::array();
  double poisson = std::exp(-nbar_out);
  for (int n = 0; n < count; ++n) {
    json row;
    row["n"] = n;
    row["weight"] = weights[static_cast<size_t>(n)];
    row["poisson"] = poisson;
    row["error_estimate"] = errors[static_cast<size_t>(n)];
    stats_rows.push_back(std::move(row));
    poisson *= nbar_out / (n + 1);
  }

  bool any_flagged = false;
  if (block.contains("g2_scan")) {
    // With a scan requested, the g2 rows form the table and the photon
    // statistics are carried in comments (CSV) plus extras (JSON).
    const json& scan = block.at("g2_scan");
    check_keys(scan, {"x", "d_min", "d_max", "count"}, "coherent.g2_scan");
    const double x = require_num(scan, "x", "coherent.g2_scan");
    const double d_lo = opt_num(scan, "d_min", 0.0, "coherent.g2_scan");
    const double d_hi = require_num(scan, "d_max", "coherent.g2_scan");
    const int n_scan = opt_int(scan, "count", 41, "coherent.g2_scan");
    if (n_scan < 1 || n_scan > 100000)
      fail(2, "coherent.g2_scan.count out of range");
    table.columns = {"x1", "x2", "g2", "flagged"};
    for (int i = 0; i < n_scan; ++i) {
      const double d =
          n_scan == 1 ? d_lo : d_lo + (d_hi - d_lo) * i / (n_scan - 1);
      double value = 0.0;
      int flagged = 0;
      if (csm_coherent_g2(state.get(), x, x + d, &value, &flagged) != CSM_OK)
        fail_api("coherent.g2_scan");
      any_flagged = any_flagged || flagged != 0;
      json row;
      row["x1"] = x;
      row["x2"] = x + d;
      row["g2"] = value;
      row["flagged"] = flagged;
      table.rows.push_back(std::move(row));
    }
    for (const auto& row : stats_rows)
      table.comments.push_back(
          "P(n=" + std::to_string(row.at("n").get<int>()) +
          ") = " + fmt17(row.at("weight").get<double>()) + "  (Poisson " +
          fmt17(row.at("poisson").get<double>()) + ")");
    table.extra["statistics"] = stats_rows;
  } else {
    table.columns = {"n", "weight", "poisson", "error_estimate"};
    table.rows.assign(stats_rows.begin(), stats_rows.end());
  }

  int code = 0;
  if (ctx.strict && any_flagged) {
    table.comments.push_back("strict: low-density g2 evaluations flagged");
    code = 1;
  }
  return code;
}

// ---------------------------------------------------------------------------
// verify command
// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

double cabs(csm_complex z) { return std::hypot(z.re, z.im); }
double cdist(csm_complex a, csm_complex b) {
  return std::hypot(a.re - b.re, a.im - b.im);
}

std::vector<CheckResult> run_verify(bool with_oracle) {
  std::vector<CheckResult> results;
  const double kG1 = kInvRootPi;                  // half-width 1
  const double kG2 = kInvRootPi * std::sqrt(2.0);  // half-width 2

  const auto check = [&](const std::string& name, bool pass,
                         const std::string& detail) {
    results.push_back({name, pass, detail});
  };
  const auto momenta = [&](double lo, double hi, int n) {
    std::vector<double> ps(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ps[static_cast<size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return ps;
  };

  {  // 1: two-level transmission is a pure phase
    EmitterPtr e(csm_emitter_two_level(0.5, kG1));
    double worst = 0.0;
    for (double p : momenta(-8, 8, 33)) {
      csm_complex s;
      csm_s1_emitter(e.get(), p, -1, &s, nullptr);
      worst = std::max(worst, std::abs(cabs(s) - 1.0));
    }
    check("one_photon_unimodular_two_level", worst <= 1e-12,
          "max ||s|-1| = " + fmt3(worst));
  }
  {  // 2: V-type transmission is a pure phase
    EmitterPtr e(csm_emitter_vscheme(0.0, 1.0, 2.0, kG1, kG2));
    double worst = 0.0;
    for (double p : momenta(-8, 8, 33)) {
      csm_complex s;
      csm_s1_emitter(e.get(), p, -1, &s, nullptr);
      worst = std::max(worst, std::abs(cabs(s) - 1.0));
    }
    check("one_photon_unimodular_vscheme", worst <= 1e-12,
          "max ||s|-1| = " + fmt3(worst));
  }
  {  // 3: exact pi phase on resonance
    EmitterPtr e(csm_emitter_two_level(0.7, kG1));
    EmitterPtr d(csm_emitter_dicke(3, -0.4, kG1));
    csm_complex s1, s2;
    csm_s1_emitter(e.get(), 0.7, -1, &s1, nullptr);
    csm_s1_emitter(d.get(), -0.4, -1, &s2, nullptr);
    const double dev =
        std::max(cdist(s1, {-1, 0}), cdist(s2, {-1, 0}));
    check("resonant_amplitude_is_minus_one", dev <= 1e-12,
          "max |s(res)+1| = " + fmt3(dev));
  }
  {  // 4: a Dicke cluster of one is a two-level emitter
    EmitterPtr d(csm_emitter_dicke(1, 0.3, kG1));
    EmitterPtr t(csm_emitter_two_level(0.3, kG1));
    double worst = 0.0;
    for (double p : momenta(-4, 4, 11)) {
      csm_complex a, b;
      csm_s1_emitter(d.get(), p, -1, &a, nullptr);
      csm_s1_emitter(t.get(), p, -1, &b, nullptr);
      worst = std::max(worst, cdist(a, b));
    }
    check("dicke_m1_reduces_to_two_level", worst <= 1e-15,
          "max deviation = " + fmt3(worst));
  }
  {  // 5: dressed poles
    EmitterPtr t(csm_emitter_two_level(2.0, kG1));
    EmitterPtr d(csm_emitter_dicke(2, 1.0, kG1));
    csm_complex at, ad, second;
    double gt, gd;
    int has_second = 0;
    csm_derive_params(t.get(), &at, &gt, nullptr, nullptr);
    csm_derive_params(d.get(), &ad, &gd, &second, &has_second);
    const double dev = std::max(
        {cdist(at, {2.0, -1.0}), cdist(ad, {1.0, -2.0}),
         has_second ? cdist(second, {1.0, -1.0}) : 1.0,
         std::abs(gt - 1.0), std::abs(gd - 1.0)});
    check("dressed_poles", dev <= 1e-12, "max deviation = " + fmt3(dev));
  }
  {  // 6: Dicke kernel bracket forms agree exactly at zero detuning only
    EmitterPtr d0(csm_emitter_dicke(2, 0.0, kG1));
    EmitterPtr d1(csm_emitter_dicke(2, 1.0, kG1));
    csm_complex b0, s0, b1, s1;
    csm_t2_dicke_forms(d0.get(), 0.3, 0.1, 0.25, 0.15, -1, &b0, &s0);
    csm_t2_dicke_forms(d1.get(), 1.3, 1.1, 1.25, 1.15, -1, &b1, &s1);
    const double agree = cdist(b0, s0);
    const double differ = cdist(b1, s1);
    check("dicke_bracket_forms", agree <= 1e-13 && differ > 1e-4,
          "Omega=0: |diff| = " + fmt3(agree) + "; Omega=1: bracket = (" +
              fmt3(b1.re) + ", " + fmt3(b1.im) + "), simplified = (" +
              fmt3(s1.re) + ", " + fmt3(s1.im) + "), |diff| = " +
              fmt3(differ));
  }
  {  // 7: kernel symmetry under outgoing and incoming swaps
    ChainPtr chain(csm_chain_new(0));
    EmitterPtr e(csm_emitter_two_level(0.2, kG1));
    csm_chain_add(chain.get(), e.get(), 0.0);
    csm_complex t1, t2, t3;
    csm_t2_kernel(chain.get(), 1.0, -0.6, 0.7, -0.3, -1, &t1, nullptr);
    csm_t2_kernel(chain.get(), -0.6, 1.0, 0.7, -0.3, -1, &t2, nullptr);
    csm_t2_kernel(chain.get(), 1.0, -0.6, -0.3, 0.7, -1, &t3, nullptr);
    const double dev = std::max(cdist(t1, t2), cdist(t1, t3));
    check("kernel_exchange_symmetry", dev <= 1e-13,
          "max swap deviation = " + fmt3(dev));
  }
  {  // 8: convolution exchange integral, closed form vs quadrature
    EmitterPtr down(csm_emitter_two_level(0.0, kG1));
    EmitterPtr up(csm_emitter_two_level(0.5, kG2));
    csm_complex tc, tq;
    double qerr = 0.0;
    csm_s2_convolve(down.get(), up.get(), 1.0, -1.0, 0.4, -0.4, 0, nullptr,
                    nullptr, nullptr, &tc, nullptr);
    csm_s2_convolve(down.get(), up.get(), 1.0, -1.0, 0.4, -0.4, 1, nullptr,
                    nullptr, nullptr, &tq, &qerr);
    const double dev = cdist(tc, tq);
    check("convolution_route_agreement", dev <= 1e-6,
          "|closed - quadrature| = " + fmt3(dev));
  }
  {  // 9: two-atom kernel equals the ordered convolution
    EmitterPtr up(csm_emitter_two_level(0.0, kG1));
    EmitterPtr down(csm_emitter_two_level(0.5, kG2));
    ChainPtr chain(csm_chain_new(0));
    csm_chain_add(chain.get(), up.get(), 0.0);
    csm_chain_add(chain.get(), down.get(), 1.0);
    csm_complex direct, composed;
    csm_t2_kernel(chain.get(), 0.9, -0.7, 0.6, -0.4, -1, &direct, nullptr);
    csm_s2_convolve(down.get(), up.get(), 0.9, -0.7, 0.6, -0.4, 0, nullptr,
                    nullptr, nullptr, &composed, nullptr);
    const double dev = cdist(direct, composed);
    check("two_atom_kernel_matches_composition", dev <= 1e-12,
          "deviation = " + fmt3(dev));
  }
  {  // 10: intermediate pair integral, closed form vs quadrature
    EmitterPtr a(csm_emitter_two_level(0.0, kG1));
    EmitterPtr b(csm_emitter_two_level(1.0, kG1));
    csm_complex vc, vq;
    double err = 0.0;
    int evals = 0;
    csm_intermediate_pair_integral(a.get(), b.get(), 0.0, 0, &vc, nullptr,
                                   nullptr);
    csm_intermediate_pair_integral(a.get(), b.get(), 0.0, 1, &vq, &err,
                                   &evals);
    const double dev = cdist(vc, vq) / std::max(1.0, cabs(vc));
    check("pair_integral_route_agreement", dev <= 1e-8,
          "relative deviation = " + fmt3(dev) + " (" +
              std::to_string(evals) + " evaluations)");
  }
  {  // 11: Lambda channel matrix has unit column norms
    EmitterPtr lam(csm_emitter_lambda(0.0, 0.5, 2.0, kG1, kG2));
    double worst = 0.0;
    for (double p : {-1.0, 0.3, 2.0}) {
      for (int in = 1; in <= 2; ++in) {
        csm_complex channels[4];
        double p_out[2];
        csm_complex elastic;
        csm_s1_lambda(lam.get(), p, in, -1, channels, p_out, &elastic,
                      nullptr);
        const double norm =
            cabs(channels[in - 1]) * cabs(channels[in - 1]) +
            cabs(channels[2 + in - 1]) * cabs(channels[2 + in - 1]);
        worst = std::max(worst, std::abs(norm - 1.0));
      }
    }
    check("lambda_column_unitarity", worst <= 1e-12,
          "max |column norm - 1| = " + fmt3(worst));
  }
  {  // 12: all kernel poles lie in the lower half plane
    ChainPtr c1(csm_chain_new(0));
    EmitterPtr d(csm_emitter_dicke(3, 0.5, kG1));
    csm_chain_add(c1.get(), d.get(), 0.0);
    ChainPtr c2(csm_chain_new(0));
    EmitterPtr u(csm_emitter_two_level(0.0, kG1));
    EmitterPtr w(csm_emitter_two_level(0.5, kG2));
    csm_chain_add(c2.get(), u.get(), 0.0);
    csm_chain_add(c2.get(), w.get(), 1.0);
    bool ok = true;
    int total = 0;
    for (csm_chain* chain : {c1.get(), c2.get()}) {
      std::vector<csm_complex> locs(64);
      std::vector<int> kinds(64);
      int count = 0;
      if (csm_locate_poles(chain, 0.2, 0.1, {0.5, -2.0}, 50.0, locs.data(),
                           kinds.data(), 64, &count) != CSM_OK) {
        ok = false;
        break;
      }
      total += count;
      for (int i = 0; i < count; ++i)
        if (locs[static_cast<size_t>(i)].im >= 0.0) ok = false;
    }
    check("poles_in_lower_half_plane", ok && total > 0,
          std::to_string(total) + " poles, all Im < 0");
  }
  {  // 13: transmitted photon-number weights stay Poissonian
    CoherentPtr s(csm_coherent_new(0.0, std::sqrt(0.2), 0.0, 30.0, 0.0, kG1,
                                   3));
    double weights[4], errors[4], nbar = 0.0;
    int count = 0;
    csm_coherent_statistics(s.get(), weights, errors, 4, &count, &nbar);
    double worst = 0.0;
    double poisson = std::exp(-nbar);
    for (int n = 0; n < count; ++n) {
      worst = std::max(worst, std::abs(weights[n] - poisson));
      poisson *= nbar / (n + 1);
    }
    check("coherent_weights_poissonian", worst <= 1e-8,
          "max |w_n - Poisson| = " + fmt3(worst));
  }
  {  // 14: scattered clusters vanish at coincident coordinates
    CoherentPtr s(csm_coherent_new(0.0, std::sqrt(0.2), 0.0, 30.0, 0.0, kG1,
                                   3));
    const double x2[] = {1.0, 1.0};
    const double x3[] = {0.0, 0.0, 1.0};
    csm_complex c2, c3;
    csm_coherent_cluster(s.get(), x2, 2, &c2, nullptr);
    csm_coherent_cluster(s.get(), x3, 3, &c3, nullptr);
    const double dev = std::max(cabs(c2), cabs(c3));
    check("cluster_antibunching_exact", dev <= 1e-14,
          "max |C_n(coincident)| = " + fmt3(dev));
  }
  {  // 15: full-field bunching approaches |2 s(k) - 1|^2 deep in the pulse
    CoherentPtr s(csm_coherent_new(0.0, std::sqrt(0.2), 0.0, 30.0, 0.0, kG1,
                                   3));
    EmitterPtr e(csm_emitter_two_level(0.0, kG1));
    csm_complex sk;
    csm_s1_emitter(e.get(), 0.0, -1, &sk, nullptr);
    const csm_complex twist{2 * sk.re - 1, 2 * sk.im};
    const double expected = cabs(twist) * cabs(twist);
    double g2 = 0.0;
    csm_coherent_g2(s.get(), 5.0, 5.0, &g2, nullptr);
    const double rel = std::abs(g2 - expected) / expected;
    check("full_field_bunching", rel <= 1e-3,
          "g2(x,x) = " + fmt3(g2) + ", |2s-1|^2 = " + fmt3(expected) +
              ", rel dev = " + fmt3(rel));
  }
  {  // 16: beyond-RWA emitter does not scatter a chiral photon
    EmitterPtr e(csm_emitter_non_rwa(0.5, kG1, 0.8 * kG1));
    double worst = 0.0;
    for (double p : momenta(-4, 4, 11)) {
      csm_complex s;
      csm_s1_emitter(e.get(), p, -1, &s, nullptr);
      worst = std::max(worst, cdist(s, {1, 0}));
    }
    check("non_rwa_transmission_is_unity", worst <= 1e-15,
          "max |s-1| = " + fmt3(worst));
  }
  {  // 17: cascade spectator coupling drops out of one-photon scattering
    EmitterPtr a(csm_emitter_sigma(0.0, 1.0, 3.0, kG1, 0.0));
    EmitterPtr b(csm_emitter_sigma(0.0, 1.0, 3.0, kG1, 7.0 * kG1));
    double worst = 0.0;
    for (double p : momenta(-3, 5, 7)) {
      csm_complex sa, sb;
      csm_s1_emitter(a.get(), p, -1, &sa, nullptr);
      csm_s1_emitter(b.get(), p, -1, &sb, nullptr);
      worst = std::max(worst, cdist(sa, sb));
    }
    check("sigma_spectator_independence", worst <= 1e-15,
          "max deviation = " + fmt3(worst));
  }

  if (with_oracle) {  // 18: quick discretized-Hamiltonian cross-check
    json ocfg;
    ocfg["system"] = {{"emitters", json::array({json{{"type", "two_level"},
                                                     {"omega", 0.0},
                                                     {"g", kInvRootPi},
                                                     {"position", 0.0}}})}};
    ocfg["k_center"] = 0.0;
    ocfg["discretization"] = {{"n_modes", 128}};
    char* result = nullptr;
    const csm_status st = csm_oracle_s1_run(ocfg.dump().c_str(), &result);
    if (st != CSM_OK) {
      check("oracle_one_photon_agreement", false,
            std::string("oracle run failed: ") + csm_last_error());
    } else {
      const json out = json::parse(result);
      csm_string_free(result);
      EmitterPtr e(csm_emitter_two_level(0.0, kInvRootPi));
      double max_dev = 0.0;
      const auto& nu = out.at("nu");
      const auto& sre = out.at("s_re");
      const auto& sim = out.at("s_im");
      for (size_t i = 0; i < nu.size(); ++i) {
        csm_complex closed;
        csm_s1_emitter(e.get(), nu[i].get<double>(), -1, &closed, nullptr);
        max_dev = std::max(max_dev,
                           std::hypot(closed.re - sre[i].get<double>(),
                                      closed.im - sim[i].get<double>()));
      }
      const double chirality = out.value("chirality_left_tail", 1.0);
      check("oracle_one_photon_agreement",
            max_dev <= 2e-2 && chirality <= 1e-8,
            "max |ds| = " + fmt3(max_dev) + ", chirality tail = " +
                fmt3(chirality));
    }
  }
  return results;
}

int cmd_verify(bool with_oracle, const std::string& out_path) {
  const std::vector<CheckResult> results = run_verify(with_oracle);
  std::string text;
  int failures = 0;
  for (const auto& r : results) {
    text += (r.pass ? "[ok]   " : "[FAIL] ") + r.name + "  " + r.detail + "\n";
    if (!r.pass) ++failures;
  }
  text += "verify: " + std::to_string(results.size() - failures) + "/" +
          std::to_string(results.size()) + " checks passed\n";
  write_output(text, out_path);
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// sweep command
// ---------------------------------------------------------------------------

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

int cmd_sweep(Context& ctx, const std::string& config_text) {
  if (ctx.out_path.empty())
    fail(2, "the sweep command requires --out <directory>");
  if (!ctx.config.contains("sweep"))
    fail(2, "the sweep command requires a 'sweep' block in the config");
  const json& block = ctx.config.at("sweep");
  check_keys(block, {"jobs"}, "sweep");
  if (!block.contains("jobs") || !block.at("jobs").is_array() ||
      block.at("jobs").empty())
    fail(2, "sweep.jobs must be a non-empty array");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(ctx.out_path, ec);
  if (ec) fail(2, "cannot create output directory '" + ctx.out_path + "'");

  char hash_buf[20];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(config_text)));
  const std::string config_hash = hash_buf;

  const fs::path manifest_path = fs::path(ctx.out_path) / "sweep-manifest.json";
  json manifest;
  manifest["config_hash"] = config_hash;
  manifest["completed"] = json::array();
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    json old = json::object();
    try {
      in >> old;
    } catch (...) {
      old = json::object();
    }
    if (old.value("config_hash", "") == config_hash &&
        old.contains("completed") && old.at("completed").is_array())
      manifest = old;
  }
  const auto completed = [&](const std::string& name) {
    for (const auto& c : manifest.at("completed"))
      if (c.is_string() && c.get<std::string>() == name) return true;
    return false;
  };

  // Validate every job block before any work starts, then run the pending
  // ones on a small worker pool.  Data files depend only on their own job, so
  // execution order cannot change their bytes; the manifest and the output
  // files are written under one lock.
  struct Job {
    std::string name;
    std::string command;
    const json* block = nullptr;
  };
  std::vector<Job> pending;
  int index = 0;
  for (const auto& job : block.at("jobs")) {
    const std::string where = "sweep.jobs[" + std::to_string(index++) + "]";
    check_keys(job, {"name", "command", "system", "s1", "s2", "coherent",
                     "oracle"},
               where);
    if (!job.contains("name") || !job.at("name").is_string())
      fail(2, where + " requires a string field 'name'");
    if (!job.contains("command") || !job.at("command").is_string())
      fail(2, where + " requires a string field 'command'");
    const std::string name = job.at("name").get<std::string>();
    const std::string command = job.at("command").get<std::string>();
    if (name.empty() || name.find_first_of("/\\") != std::string::npos)
      fail(2, where + ": job name must be a plain file stem");
    if (command != "s1" && command != "s2" && command != "coherent")
      fail(2, where + ": unknown command '" + command + "'");
    for (const Job& other : pending)
      if (other.name == name)
        fail(2, where + ": duplicate job name '" + name + "'");

    if (completed(name)) {
      std::cerr << "sweep: skipping completed job '" << name << "'\n";
      continue;
    }
    pending.push_back({name, command, &job});
  }

  std::size_t n_threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("CHIRAL_SMATRIX_THREADS")) {
    char* end = nullptr;
    const unsigned long value = std::strtoul(cap, &end, 10);
    if (end == cap || *end != '\0' || value == 0)
      fail(2, "CHIRAL_SMATRIX_THREADS must be a positive integer");
    n_threads = static_cast<std::size_t>(std::min(value, 256ul));
  }
  n_threads = std::min(n_threads, std::max<std::size_t>(pending.size(), 1));

  std::mutex io_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  int worst = 0;                     // guarded by io_mutex
  std::exception_ptr first_error;    // guarded by io_mutex

  const auto worker = [&]() {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) break;
      const Job& job = pending[i];
      try {
        Context job_ctx;
        job_ctx.config = ctx.config;
        job_ctx.config.erase("sweep");
        for (const char* key : {"system", "s1", "s2", "coherent", "oracle"})
          if (job.block->contains(key))
            job_ctx.config[key] = job.block->at(key);
        job_ctx.pole_guard = ctx.pole_guard;
        job_ctx.strict = ctx.strict;
        job_ctx.with_oracle = ctx.with_oracle;
        job_ctx.format = ctx.format;

        OutputTable table;
        int code = 0;
        if (job.command == "s1")
          code = cmd_s1(job_ctx, table);
        else if (job.command == "s2")
          code = cmd_s2(job_ctx, table);
        else
          code = cmd_coherent(job_ctx, table);
        const std::string text = table.render(ctx.format == "json");

        const fs::path out_file =
            fs::path(ctx.out_path) /
            (job.name + (ctx.format == "json" ? ".json" : ".csv"));
        const std::lock_guard<std::mutex> lock(io_mutex);
        write_output(text, out_file.string());
        worst = std::max(worst, code);
        manifest["completed"].push_back(job.name);
        // Sorted so the manifest bytes do not depend on worker scheduling.
        std::sort(manifest["completed"].begin(), manifest["completed"].end());
        std::ofstream mf(manifest_path);
        if (!mf) fail(2, "cannot write sweep manifest");
        mf << manifest.dump(2) << "\n";
        std::cerr << "sweep: finished job '" << job.name << "'\n";
      } catch (...) {
        const std::lock_guard<std::mutex> lock(io_mutex);
        if (!first_error) first_error = std::current_exception();
        stop.store(true);
        break;
      }
    }
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  CLI::App app{"chiral-smatrix: one- and two-photon scattering of a chiral "
               "photonic channel coupled to multi-level emitters"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(csm_version()));

  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  bool strict = false;
  bool with_oracle = false;

  const auto add_common = [&](CLI::App* sub, bool need_config) {
    if (need_config)
      sub->add_option("--config", config_path, "JSON configuration file")
          ->required()
          ->check(CLI::ExistingFile);
    sub->add_option("--out", out_path,
                    "output file (sweep: output directory); default stdout");
    sub->add_option("--format", format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--strict", strict,
                  "fail (exit 1) on pole-adjacent or low-density flags");
  };

  CLI::App* s1 = app.add_subcommand(
      "s1", "single-photon transmission amplitudes over a momentum grid");
  add_common(s1, true);
  s1->add_flag("--with-oracle", with_oracle,
               "cross-check against the discretized-Hamiltonian oracle");

  CLI::App* s2 = app.add_subcommand(
      "s2", "connected two-photon kernels over an energy grid");
  add_common(s2, true);
  s2->add_flag("--with-oracle", with_oracle,
               "cross-check against the discretized-Hamiltonian oracle");

  CLI::App* coh = app.add_subcommand(
      "coherent", "outgoing state of a rectangular coherent pulse");
  add_common(coh, true);

  CLI::App* verify = app.add_subcommand(
      "verify", "run the built-in consistency checks");
  verify->add_option("--out", out_path, "write the report here");
  verify->add_flag("--with-oracle", with_oracle,
                   "include the discretized-Hamiltonian cross-check");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "run a list of jobs into an output directory (resumable)");
  add_common(sweep, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) return cmd_verify(with_oracle, out_path);

    std::ifstream raw(config_path);
    std::stringstream buffer;
    buffer << raw.rdbuf();
    const std::string config_text = buffer.str();

    Context ctx;
    ctx.config = load_config(config_path);
    check_keys(ctx.config,
               {"g_ref", "system", "pole_guard", "s1", "s2", "coherent",
                "oracle", "sweep"},
               "config");
    const double g_ref = require_num(ctx.config, "g_ref", "config");
    if (!(g_ref > 0.0)) fail(2, "config.g_ref must be positive");
    ctx.pole_guard = opt_num(ctx.config, "pole_guard", -1.0, "config");
    ctx.strict = strict;
    ctx.with_oracle = with_oracle;
    ctx.format = format;
    ctx.out_path = out_path;

    if (sweep->parsed()) return cmd_sweep(ctx, config_text);

    OutputTable table;
    int code = 0;
    if (s1->parsed())
      code = cmd_s1(ctx, table);
    else if (s2->parsed())
      code = cmd_s2(ctx, table);
    else if (coh->parsed())
      code = cmd_coherent(ctx, table);
    write_output(table.render(format == "json"), out_path);
    return code;
  } catch (const CliError& err) {
    std::cerr << "error: " << err.message << "\n";
    return err.exit_code;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
}
