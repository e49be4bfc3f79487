#pragma once

#include <limits>
#include <string>
#include <vector>

#include "chiral/types.hpp"

/// Independent numerical oracle: the emitters are coupled to a band of
/// discretized chiral modes and the Schroedinger equation is integrated
/// directly (Krylov propagator).  Transmission data extracted from wave
/// packets cross-validates the closed-form amplitudes without sharing any
/// algebra with them.
namespace chiral::oracle {

/// Discretization request.  Negative entries select defaults derived from
/// the system's largest half-width gamma_scale = max(pi g^2, 1e-2):
/// bandwidth W = 40 gamma_scale, packet width sigma_p = gamma_scale / 4,
/// simulation box L = 2 pi n_modes / W, packet start x0 = -L/4, final time
/// t_final = L/2, initial step dt = 10 / W.  eta_switch > 0 ramps the
/// coupling on with time constant eta_switch (0 = always on).
struct DiscretizationConfig {
  int n_modes = 256;
  double bandwidth = -1.0;
  double sigma_p = -1.0;
  double x0 = std::numeric_limits<double>::quiet_NaN();
  double t_final = -1.0;
  double dt = -1.0;
  double eta_switch = 0.0;
  double lanczos_tol = 1e-9;
  int krylov_dim = 30;
};

/// Resolved discretization: modes nu_m = k_center - W/2 + (m + 1/2) dnu.
struct Discretization {
  int n_modes = 0;
  double W = 0.0;
  double dnu = 0.0;
  double L = 0.0;
  double k_center = 0.0;
  double gamma_scale = 0.0;
  double sigma_p = 0.0;
  double x0 = 0.0;
  double t_final = 0.0;
  double dt0 = 0.0;
  double eta_switch = 0.0;
  double lanczos_tol = 1e-9;
  int krylov_dim = 30;
  std::vector<double> nu;
  std::vector<std::string> warnings;  // narrow band / coarse mode comb
};

Discretization make_discretization(const EmitterChain& system, double k_center,
                                   const DiscretizationConfig& cfg);

struct EvolveStats {
  int steps = 0;
  long matvecs = 0;
  double norm_drift = 0.0;
  double max_step_error = 0.0;
};

/// One-excitation run: a Gaussian packet (momentum width sigma_p, centered
/// at k_center) is propagated through the system; the final photon
/// amplitudes with free phases removed give S(nu) = out/in on the packet
/// support (|in| > 1e-6 of the peak).  Throws Error{PacketNotSeparated} when
/// atomic population above 1e-4 survives at t_final, and
/// Error{StepControlFailure} when the propagator cannot hold its tolerance.
struct S1Run {
  Discretization disc;
  std::vector<complex> in_modes;
  std::vector<complex> out_modes;
  std::vector<complex> out_channel2;  // Lambda only: Raman channel amplitudes
  std::vector<int> support;
  std::vector<complex> s_ratio;
  double atomic_residual = 0.0;
  double chirality_left_tail = -1.0;  // scattered density left of the system
  EvolveStats stats;
};
S1Run run_s1(const EmitterChain& system, double k_center,
             const DiscretizationConfig& cfg, int lambda_incoming_channel = 1);

/// Two-excitation run for two-level emitters, Dicke clusters and two-atom
/// chains.  `in_pair` / `out_pair` are product-basis symmetric matrices
/// (row-major n x n, free phases removed); `predicted_pair` applies the
/// closed-form decomposition to the same initial packet:
///
///   out_ij = s(nu_i) s(nu_j) in_ij
///          + (i/2) dnu Sum_k T(nu_i, nu_j; nu_k, nu_{i+j-k}) in_{k, i+j-k}.
struct S2Run {
  Discretization disc;
  std::vector<complex> in_pair;
  std::vector<complex> out_pair;
  std::vector<complex> predicted_pair;
  std::vector<complex> s1_closed;
  double overlap_full = 0.0;       // |<out|pred>| / (|out| |pred|)
  double overlap_connected = 0.0;  // same for the elastic-subtracted parts
  double connected_norm_ratio = 0.0;
  double atomic_residual = 0.0;
  EvolveStats stats;
};
S2Run run_s2(const EmitterChain& system, double k_center,
             const DiscretizationConfig& cfg);

/// Local density of states of the first emitter's excited level in the
/// one-excitation sector, fitted against a window-truncated Lorentzian by
/// quantile matching (median and interquartile range).
struct LdosFit {
  double omega = 0.0;
  double gamma = 0.0;
};
LdosFit ldos_fit(const EmitterChain& system, double k_center,
                 const DiscretizationConfig& cfg);

/// Position-space pair-correlation diagnostics of a two-excitation run:
/// densities D(d) = dx * Sum_x |Phi(x, x + d)|^2 of the full, elastic and
/// connected (full - elastic) fields versus separation, the exponential
/// decay rate of the connected density fitted on d in [0.5, 2] / gamma, the
/// coincidence amplitude ratio full/elastic at d = 0, and the deepest point
/// of the full density within d in [0.6, 2.4] / gamma relative to d = 0.
struct PairDiagnostics {
  std::vector<double> separation;
  std::vector<double> full_density;
  std::vector<double> elastic_density;
  std::vector<double> connected_density;
  double fitted_tail_rate = 0.0;
  double coincidence_ratio = 0.0;
  double dip_ratio = 1.0;
  double dip_separation = 0.0;
};
PairDiagnostics pair_diagnostics(const S2Run& run);

/// JSON entry points used by the shared-library interface: `config_json`
/// mirrors the CLI oracle block; the returned document carries the resolved
/// discretization, extraction metrics and (for s1) the extracted amplitudes.
std::string run_s1_json(const std::string& config_json);
std::string run_s2_json(const std::string& config_json);

}  // namespace chiral::oracle
