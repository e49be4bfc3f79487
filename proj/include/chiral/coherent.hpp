#pragma once

#include <span>
#include <vector>

#include "chiral/types.hpp"

/// Outgoing state of a rectangular coherent pulse transmitted through a
/// single two-level emitter.
///
/// The input occupies one box mode of length L: its position profile is
/// beta(x) = alpha_bar * exp(i k x) inside (-L/2, L/2) with
/// alpha_bar = alpha_k / sqrt(L) and mean photon number N = |alpha_k|^2.
/// After scattering, the n-photon coefficient keeps the displaced structure
///
///   psi_n(x_1 <= ... <= x_n) = exp(-N/2) *
///       Sum_{S subset of {1..n}} C_{|S|}(x_S) Prod_{i not in S} beta(x_i),
///
/// where C_m is the connected m-photon cluster amplitude of the pulse
/// (beta_amplitude below).  Because |s(k)| = 1 mode for mode, the photon
/// number distribution of the full transmitted field stays exactly
/// Poissonian; the interesting physics lives in the cluster amplitudes
/// (exact antibunching at coincident points) and in the full-field pair
/// correlation (strong bunching at resonance).
namespace chiral {

struct WaveguideBox {
  double L = 1.0;
  /// Mode spacing of the quantization box: Delta = 2 pi / L.
  double mode_spacing() const { return 2.0 * kPi / L; }
};

struct CoherentInput {
  double k = 0.0;          ///< carrier momentum of the occupied mode
  complex alpha_k{};       ///< coherent amplitude of that mode
  WaveguideBox box{};

  complex alpha_bar() const { return alpha_k / std::sqrt(box.L); }
  double nbar() const { return std::norm(alpha_k); }
};

/// Box-broadened momentum delta: delta_L(q) = sin(q L / 2) / (pi q), with
/// delta_L(0) = L / (2 pi).  Its integral over the real line is 1; over the
/// window [-50/L, 50/L] it reaches ~0.975 (the tail oscillations carry the
/// rest).
double broadened_delta(double q, const WaveguideBox& box);

/// Pulse + emitter + truncation bundle used by all output-state evaluations.
struct CoherentOutput {
  CoherentInput input{};
  TwoLevel emitter{};
  int n_max = 3;
  Regularization reg{};
};

/// Validates the bundle (L > 0, 0 <= n_max <= 4, coupling >= 0).
/// n_max > 4 throws Error{TruncationExceeded}.
CoherentOutput make_coherent_output(const CoherentInput& input,
                                    const TwoLevel& emitter, int n_max,
                                    const Regularization& reg = {});

/// Connected n-photon cluster amplitude C_n at ordered coordinates
/// x_1 <= ... <= x_n (Error{UnorderedCoordinates} otherwise, and
/// Error{TruncationExceeded} for n > n_max):
///
///   C_n = A^n exp(i k sum x_j) * branch,   A = -2 pi i g^2 alpha_bar/(k - a),
///
/// branch (all x_j inside the box, x_{n+1} := L/2):
///     Prod_{j=1..n} (1 - exp(i (k - a)(x_{j+1} - x_j)))
/// branch (x_1 < -L/2 <= x_2, the late re-emission tail):
///     exp(-i (k - a)(x_1 + L/2)) * (1 - exp(i (k - a)(x_2 + L/2)))
///       * Prod_{j=2..n} (1 - exp(i (k - a)(x_{j+1} - x_j)))
///
/// where a is the dressed pole Omega - i pi g^2.  Two or more coordinates
/// below -L/2 give exactly zero (a single emitter re-emits one late photon),
/// as does any coordinate beyond the causal front L/2.  Coincident
/// coordinates give exactly zero: the scattered clusters are hard-core
/// antibunched.
complex beta_amplitude(int n, std::span<const double> xs,
                       const CoherentOutput& out, bool* flagged = nullptr);

/// Full n-photon coefficient psi_n (displaced cluster expansion above,
/// including the exp(-N/2) normalization) at ordered coordinates.
complex output_amplitude(int n, std::span<const double> xs,
                         const CoherentOutput& out, bool* flagged = nullptr);

/// Photon-number weights of the transmitted field, w_n = (1/n!) Int |psi_n|^2
/// for n = 0..n_max, by composite Gauss-Legendre panels over
/// [-L/2 - 10/gamma, L/2]^n reduced to ordered tuples.  `errors` holds
/// fine-vs-coarse rule differences.
struct PhotonStatistics {
  std::vector<double> weights;
  std::vector<double> errors;
  double nbar = 0.0;
};
PhotonStatistics photon_statistics(const CoherentOutput& out);

/// Normalized full-field pair correlation
///
///   g2(x1, x2) = |phi_2(x1, x2)|^2 / (|phi_1(x1)|^2 |phi_1(x2)|^2),
///
/// built from the exp(-N/2)-stripped coefficients phi_n.  Equals 1 for a
/// decoupled or far-detuned emitter; deep inside the pulse at coincident
/// points it approaches |2 s(k) - 1|^2 (= 9 on resonance: the transmitted
/// field is strongly bunched even though the scattered clusters themselves
/// are antibunched).  Densities below 1e-30 raise the flag.
double g2_pair(const CoherentOutput& out, double x1, double x2,
               bool* flagged = nullptr);

/// g2 at coincident coordinates, g2_pair(x, x).
double g2_zero_distance(const CoherentOutput& out, double x,
                        bool* flagged = nullptr);

}  // namespace chiral
