#include "chiral_smatrix.h"

#include <cstdio>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "chiral/coherent.hpp"
#include "chiral/core.hpp"
#include "chiral/oracle.hpp"
#include "chiral/single_photon.hpp"
#include "chiral/two_photon.hpp"

struct csm_emitter {
  chiral::EmitterSpec spec;
};

struct csm_chain {
  chiral::EmitterChain chain;
};

struct csm_coherent {
  chiral::CoherentOutput out;
};

namespace {

thread_local char tl_error_msg[512] = "";

void set_error(const std::string& msg) {
  std::snprintf(tl_error_msg, sizeof(tl_error_msg), "%s", msg.c_str());
}

csm_status map_code(chiral::ErrorCode code) {
  using chiral::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument:
      return CSM_ERR_INVALID_ARGUMENT;
    case ErrorCode::EmptyChain:
      return CSM_ERR_EMPTY_CHAIN;
    case ErrorCode::DuplicatePosition:
      return CSM_ERR_DUPLICATE_POSITION;
    case ErrorCode::UnequalDetunings:
      return CSM_ERR_UNEQUAL_DETUNINGS;
    case ErrorCode::OffShell:
      return CSM_ERR_OFF_SHELL;
    case ErrorCode::UnorderedCoordinates:
      return CSM_ERR_UNORDERED_COORDINATES;
    case ErrorCode::TruncationExceeded:
      return CSM_ERR_TRUNCATION_EXCEEDED;
    case ErrorCode::QuadratureNotConverged:
      return CSM_ERR_QUADRATURE;
    case ErrorCode::UnsupportedSpec:
      return CSM_ERR_UNSUPPORTED_SPEC;
    case ErrorCode::PacketNotSeparated:
      return CSM_ERR_PACKET_NOT_SEPARATED;
    case ErrorCode::StepControlFailure:
      return CSM_ERR_STEP_CONTROL;
  }
  return CSM_ERR_INTERNAL;
}

template <typename Fn>
csm_status guarded(Fn&& fn) {
  try {
    fn();
    return CSM_OK;
  } catch (const chiral::Error& err) {
    set_error(err.what());
    return map_code(err.code());
  } catch (const std::bad_alloc&) {
    set_error("allocation failure");
    return CSM_ERR_ALLOC;
  } catch (const std::exception& err) {
    set_error(err.what());
    return CSM_ERR_INTERNAL;
  } catch (...) {
    set_error("unknown internal failure");
    return CSM_ERR_INTERNAL;
  }
}

csm_status require(bool ok, const char* msg) {
  if (ok) return CSM_OK;
  set_error(msg);
  return CSM_ERR_INVALID_ARGUMENT;
}

csm_complex to_c(chiral::complex z) { return {z.real(), z.imag()}; }

chiral::Regularization make_reg(double pole_guard) {
  chiral::Regularization reg;
  if (pole_guard > 0.0) reg.pole_guard = pole_guard;
  return reg;
}

void write_flag(int* flagged, bool value) {
  if (flagged != nullptr) *flagged = value ? 1 : 0;
}

template <typename Fn>
csm_emitter* make_emitter(Fn&& build) {
  csm_emitter* handle = nullptr;
  guarded([&] {
    chiral::EmitterSpec spec = build();
    chiral::validate_spec(spec);
    handle = new csm_emitter{std::move(spec)};
  });
  return handle;
}

csm_status run_oracle(const char* config_json, char** result_json,
                      std::string (*runner)(const std::string&)) {
  if (csm_status st =
          require(config_json && result_json, "oracle run: null argument"))
    return st;
  return guarded([&] {
    const std::string result = runner(std::string(config_json));
    char* buffer = new char[result.size() + 1];
    std::memcpy(buffer, result.c_str(), result.size() + 1);
    *result_json = buffer;
  });
}

}  // namespace

extern "C" {

const char* csm_version(void) { return "1.0.0"; }

const char* csm_last_error(void) { return tl_error_msg; }

/* ----------------------------- emitters -------------------------------- */

csm_emitter* csm_emitter_two_level(double omega, double g) {
  return make_emitter([&] { return chiral::TwoLevel{omega, g}; });
}

csm_emitter* csm_emitter_non_rwa(double omega, double g, double gprime) {
  return make_emitter([&] { return chiral::NonRwaTwoLevel{omega, g, gprime}; });
}

csm_emitter* csm_emitter_dicke(int m, double omega, double g) {
  return make_emitter([&] { return chiral::Dicke{m, omega, g}; });
}

csm_emitter* csm_emitter_lambda(double eps1, double eps2, double eps3,
                                double g31, double g32) {
  return make_emitter(
      [&] { return chiral::Lambda{eps1, eps2, eps3, g31, g32}; });
}

csm_emitter* csm_emitter_vscheme(double eps1, double eps2, double eps3,
                                 double g21, double g31) {
  return make_emitter(
      [&] { return chiral::Vscheme{eps1, eps2, eps3, g21, g31}; });
}

csm_emitter* csm_emitter_sigma(double eps1, double eps2, double eps3,
                               double g21, double g32) {
  return make_emitter(
      [&] { return chiral::Sigma{eps1, eps2, eps3, g21, g32}; });
}

void csm_emitter_free(csm_emitter* emitter) { delete emitter; }

csm_status csm_derive_params(const csm_emitter* emitter, csm_complex* alpha,
                             double* gamma, csm_complex* second_pole,
                             int* has_second) {
  if (csm_status st = require(emitter && alpha && gamma,
                              "csm_derive_params: null argument"))
    return st;
  return guarded([&] {
    const chiral::DerivedParams params = chiral::derive_params(emitter->spec);
    *alpha = to_c(params.alpha);
    *gamma = params.gamma;
    const bool has = params.alpha_collective.has_value();
    if (has_second != nullptr) *has_second = has ? 1 : 0;
    if (second_pole != nullptr)
      *second_pole = has ? to_c(*params.alpha_collective) : csm_complex{0, 0};
  });
}

/* ------------------------------ chains --------------------------------- */

csm_chain* csm_chain_new(int concentrated) {
  csm_chain* handle = nullptr;
  guarded([&] {
    handle = new csm_chain{};
    handle->chain.concentrated = concentrated != 0;
  });
  return handle;
}

csm_status csm_chain_add(csm_chain* chain, const csm_emitter* emitter,
                         double position) {
  if (csm_status st =
          require(chain && emitter, "csm_chain_add: null argument"))
    return st;
  return guarded(
      [&] { chain->chain.entries.push_back({emitter->spec, position}); });
}

csm_status csm_chain_validate(const csm_chain* chain) {
  if (csm_status st = require(chain != nullptr, "csm_chain_validate: null chain"))
    return st;
  return guarded([&] { (void)chiral::validate_chain(chain->chain); });
}

void csm_chain_free(csm_chain* chain) { delete chain; }

/* --------------------------- single photon ----------------------------- */

csm_status csm_s1_emitter(const csm_emitter* emitter, double p,
                          double pole_guard, csm_complex* s, int* flagged) {
  if (csm_status st =
          require(emitter && s, "csm_s1_emitter: null argument"))
    return st;
  return guarded([&] {
    bool flag = false;
    *s = to_c(chiral::s1_emitter(p, emitter->spec, make_reg(pole_guard), &flag));
    write_flag(flagged, flag);
  });
}

csm_status csm_s1_chain(const csm_chain* chain, double p, double pole_guard,
                        csm_complex* s, int* flagged) {
  if (csm_status st = require(chain && s, "csm_s1_chain: null argument"))
    return st;
  return guarded([&] {
    bool flag = false;
    *s = to_c(chiral::s1_chain(p, chain->chain, make_reg(pole_guard), &flag));
    write_flag(flagged, flag);
  });
}

csm_status csm_s1_lambda(const csm_emitter* emitter, double p,
                         int incoming_channel, double pole_guard,
                         csm_complex channels[4], double p_out[2],
                         csm_complex* elastic, int* flagged) {
  if (csm_status st = require(emitter && channels && p_out && elastic,
                              "csm_s1_lambda: null argument"))
    return st;
  if (!std::holds_alternative<chiral::Lambda>(emitter->spec)) {
    set_error("csm_s1_lambda: emitter is not Lambda-type");
    return CSM_ERR_UNSUPPORTED_SPEC;
  }
  return guarded([&] {
    bool flag = false;
    const auto result = chiral::s1_lambda(
        p, std::get<chiral::Lambda>(emitter->spec), incoming_channel,
        make_reg(pole_guard), &flag);
    for (int out = 0; out < 2; ++out)
      for (int in = 0; in < 2; ++in)
        channels[2 * out + in] =
            to_c(result.channels[static_cast<size_t>(out)]
                                [static_cast<size_t>(in)]);
    p_out[0] = result.p_out[0];
    p_out[1] = result.p_out[1];
    *elastic = to_c(result.elastic);
    write_flag(flagged, flag);
  });
}

/* ---------------------------- two photon ------------------------------- */

csm_status csm_t2_kernel(const csm_chain* chain, double p1, double p2,
                         double k1, double k2, double pole_guard,
                         csm_complex* t, int* flagged) {
  if (csm_status st = require(chain && t, "csm_t2_kernel: null argument"))
    return st;
  return guarded([&] {
    bool flag = false;
    const auto dec = chiral::s2_full(chain->chain, make_reg(pole_guard));
    const auto kin = chiral::make_kinematics(p1, p2, k1, k2);
    *t = to_c(dec.irreducible_kernel(kin, &flag));
    write_flag(flagged, flag);
  });
}

csm_status csm_t2_dicke_forms(const csm_emitter* emitter, double p1, double p2,
                              double k1, double k2, double pole_guard,
                              csm_complex* bracket_form,
                              csm_complex* simplified_form) {
  if (csm_status st = require(emitter && bracket_form && simplified_form,
                              "csm_t2_dicke_forms: null argument"))
    return st;
  return guarded([&] {
    chiral::Dicke spec;
    if (std::holds_alternative<chiral::Dicke>(emitter->spec)) {
      spec = std::get<chiral::Dicke>(emitter->spec);
    } else if (std::holds_alternative<chiral::TwoLevel>(emitter->spec)) {
      const auto& t = std::get<chiral::TwoLevel>(emitter->spec);
      spec = chiral::Dicke{1, t.Omega, t.g};
    } else {
      throw chiral::Error(chiral::ErrorCode::UnsupportedSpec,
                          "csm_t2_dicke_forms expects a Dicke or two-level "
                          "emitter");
    }
    const auto kin = chiral::make_kinematics(p1, p2, k1, k2);
    const auto forms =
        chiral::t2_dicke_forms(kin, spec, make_reg(pole_guard), nullptr);
    *bracket_form = to_c(forms.bracket_form);
    *simplified_form = to_c(forms.simplified_form);
  });
}

csm_status csm_s2_convolve(const csm_emitter* downstream,
                           const csm_emitter* upstream, double p1, double p2,
                           double k1, double k2, int quadrature_route,
                           csm_complex* downstream_dressed,
                           csm_complex* upstream_dressed,
                           csm_complex* exchange, csm_complex* total,
                           double* quadrature_error) {
  if (csm_status st =
          require(downstream && upstream && total,
                  "csm_s2_convolve: null argument"))
    return st;
  if (!std::holds_alternative<chiral::TwoLevel>(downstream->spec) ||
      !std::holds_alternative<chiral::TwoLevel>(upstream->spec)) {
    set_error("csm_s2_convolve: both emitters must be two-level");
    return CSM_ERR_UNSUPPORTED_SPEC;
  }
  return guarded([&] {
    const auto kin = chiral::make_kinematics(p1, p2, k1, k2);
    const auto terms = chiral::s2_convolve(
        std::get<chiral::TwoLevel>(downstream->spec),
        std::get<chiral::TwoLevel>(upstream->spec), kin,
        quadrature_route != 0 ? chiral::IntegralRoute::Quadrature
                              : chiral::IntegralRoute::ClosedForm);
    if (downstream_dressed != nullptr)
      *downstream_dressed = to_c(terms.downstream_dressed);
    if (upstream_dressed != nullptr)
      *upstream_dressed = to_c(terms.upstream_dressed);
    if (exchange != nullptr) *exchange = to_c(terms.exchange);
    *total = to_c(terms.total);
    if (quadrature_error != nullptr) *quadrature_error = terms.quadrature_error;
  });
}

csm_status csm_intermediate_pair_integral(const csm_emitter* a,
                                          const csm_emitter* b, double e_total,
                                          int quadrature_route,
                                          csm_complex* value, double* error,
                                          int* evaluations) {
  if (csm_status st = require(a && b && value,
                              "csm_intermediate_pair_integral: null argument"))
    return st;
  if (!std::holds_alternative<chiral::TwoLevel>(a->spec) ||
      !std::holds_alternative<chiral::TwoLevel>(b->spec)) {
    set_error("csm_intermediate_pair_integral: both emitters must be "
              "two-level");
    return CSM_ERR_UNSUPPORTED_SPEC;
  }
  return guarded([&] {
    const auto result = chiral::intermediate_pair_integral(
        e_total, std::get<chiral::TwoLevel>(a->spec),
        std::get<chiral::TwoLevel>(b->spec),
        quadrature_route != 0 ? chiral::IntegralRoute::Quadrature
                              : chiral::IntegralRoute::ClosedForm);
    *value = to_c(result.value);
    if (error != nullptr) *error = result.error;
    if (evaluations != nullptr) *evaluations = result.evaluations;
  });
}

csm_status csm_locate_poles(const csm_chain* chain, double delta,
                            double delta_prime, csm_complex window_center,
                            double window_radius, csm_complex* locations,
                            int* kinds, int capacity, int* count) {
  if (csm_status st = require(chain && locations && kinds && count,
                              "csm_locate_poles: null argument"))
    return st;
  return guarded([&] {
    const auto report = chiral::locate_poles(
        chain->chain, delta, delta_prime,
        chiral::complex(window_center.re, window_center.im), window_radius);
    const int found = static_cast<int>(report.poles.size());
    *count = found;
    if (found > capacity)
      throw chiral::Error(chiral::ErrorCode::InvalidArgument,
                          "csm_locate_poles: capacity " +
                              std::to_string(capacity) + " below pole count " +
                              std::to_string(found));
    for (int i = 0; i < found; ++i) {
      locations[i] = to_c(report.poles[static_cast<size_t>(i)].location);
      switch (report.poles[static_cast<size_t>(i)].kind) {
        case chiral::PoleKind::SinglePhoton:
          kinds[i] = 0;
          break;
        case chiral::PoleKind::PairBound:
          kinds[i] = 1;
          break;
        case chiral::PoleKind::Collective:
          kinds[i] = 2;
          break;
      }
    }
  });
}

/* ----------------------------- coherent -------------------------------- */

csm_coherent* csm_coherent_new(double k, double alpha_re, double alpha_im,
                               double box_length, double omega, double g,
                               int n_max) {
  csm_coherent* handle = nullptr;
  guarded([&] {
    chiral::CoherentInput input;
    input.k = k;
    input.alpha_k = chiral::complex(alpha_re, alpha_im);
    input.box.L = box_length;
    const auto out = chiral::make_coherent_output(
        input, chiral::TwoLevel{omega, g}, n_max);
    handle = new csm_coherent{out};
  });
  return handle;
}

void csm_coherent_free(csm_coherent* state) { delete state; }

csm_status csm_coherent_cluster(const csm_coherent* state, const double* xs,
                                int n, csm_complex* value, int* flagged) {
  if (csm_status st = require(state && value && (n == 0 || xs != nullptr),
                              "csm_coherent_cluster: null argument"))
    return st;
  return guarded([&] {
    bool flag = false;
    *value = to_c(chiral::beta_amplitude(
        n, std::span<const double>(xs, static_cast<size_t>(n)), state->out,
        &flag));
    write_flag(flagged, flag);
  });
}

csm_status csm_coherent_amplitude(const csm_coherent* state, const double* xs,
                                  int n, csm_complex* value, int* flagged) {
  if (csm_status st = require(state && value && (n == 0 || xs != nullptr),
                              "csm_coherent_amplitude: null argument"))
    return st;
  return guarded([&] {
    bool flag = false;
    *value = to_c(chiral::output_amplitude(
        n, std::span<const double>(xs, static_cast<size_t>(n)), state->out,
        &flag));
    write_flag(flagged, flag);
  });
}

csm_status csm_coherent_statistics(const csm_coherent* state, double* weights,
                                   double* errors, int capacity, int* count,
                                   double* nbar) {
  if (csm_status st = require(state && weights && count,
                              "csm_coherent_statistics: null argument"))
    return st;
  return guarded([&] {
    const auto stats = chiral::photon_statistics(state->out);
    const int found = static_cast<int>(stats.weights.size());
    *count = found;
    if (found > capacity)
      throw chiral::Error(chiral::ErrorCode::InvalidArgument,
                          "csm_coherent_statistics: capacity below n_max + 1");
    for (int i = 0; i < found; ++i) {
      weights[i] = stats.weights[static_cast<size_t>(i)];
      if (errors != nullptr) errors[i] = stats.errors[static_cast<size_t>(i)];
    }
    if (nbar != nullptr) *nbar = stats.nbar;
  });
}

csm_status csm_coherent_g2(const csm_coherent* state, double x1, double x2,
                           double* value, int* flagged) {
  if (csm_status st =
          require(state && value, "csm_coherent_g2: null argument"))
    return st;
  return guarded([&] {
    bool flag = false;
    *value = chiral::g2_pair(state->out, x1, x2, &flag);
    write_flag(flagged, flag);
  });
}

/* ------------------------------ oracle --------------------------------- */

csm_status csm_oracle_s1_run(const char* config_json, char** result_json) {
  return run_oracle(config_json, result_json, &chiral::oracle::run_s1_json);
}

csm_status csm_oracle_s2_run(const char* config_json, char** result_json) {
  return run_oracle(config_json, result_json, &chiral::oracle::run_s2_json);
}

void csm_string_free(char* s) { delete[] s; }

}  // extern "C"
