#pragma once

#include <complex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

/// Core value types for the chiral-channel scattering library.
///
/// Conventions used throughout:
///  * the channel is strictly unidirectional with linear dispersion and unit
///    group velocity, so momentum and frequency coincide;
///  * energies/momenta are measured in units of the reference linewidth
///    Gamma_ref = pi * g_ref^2, i.e. a coupling entered as g (relative to
///    g_ref) contributes an elastic half-width pi*g^2 in these units;
///  * all amplitudes are dimensionless; kernels carry one inverse energy.
namespace chiral {

using complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr complex kImag{0.0, 1.0};

/// Momentum of a channel photon (equals its frequency; unit group velocity).
using Momentum = double;

/// Status codes carried by Error exceptions (mirrored 1:1 by the C API).
enum class ErrorCode {
  InvalidArgument,
  EmptyChain,
  DuplicatePosition,
  UnequalDetunings,
  OffShell,
  UnorderedCoordinates,
  TruncationExceeded,
  QuadratureNotConverged,
  UnsupportedSpec,
  PacketNotSeparated,
  StepControlFailure,
};

/// Exception type used by every throwing operation in this library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Numerical safety knobs shared by the closed-form evaluators.
///
/// `eta` is the positive infinitesimal that defines retarded boundary
/// conditions in intermediate derivations.  Every closed form shipped here is
/// evaluated analytically at eta -> 0+, so the member only documents the
/// limit taken; it is not added to any denominator.  `pole_guard` is the
/// denominator magnitude (in Gamma_ref units) below which results are flagged
/// as pole-adjacent rather than trusted.
struct Regularization {
  double eta = 0.0;
  double pole_guard = 1e-10;
};

/// Two-level emitter: bare transition frequency Omega, coupling g >= 0.
struct TwoLevel {
  double Omega = 0.0;
  double g = 0.0;
};

/// Two-level emitter kept beyond the rotating-wave approximation:
/// `g` multiplies the excitation-conserving vertex and `gprime` the
/// counter-rotating one.
struct NonRwaTwoLevel {
  double Omega = 0.0;
  double g = 0.0;
  double gprime = 0.0;
};

/// M identical two-level emitters within a wavelength, coupled through the
/// fully symmetric collective ladder.
struct Dicke {
  int M = 1;
  double Omega = 0.0;
  double g = 0.0;
};

/// Lambda-type three-level emitter: two ground sublevels (1, 2) coupled to a
/// shared excited level 3 with strengths g31, g32.
struct Lambda {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps3 = 0.0;
  double g31 = 0.0;
  double g32 = 0.0;
};

/// V-type three-level emitter: one ground level 1 coupled to two excited
/// levels (2, 3) with strengths g21, g31.
struct Vscheme {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps3 = 0.0;
  double g21 = 0.0;
  double g31 = 0.0;
};

/// Sigma-type (cascade) three-level emitter: the channel drives 1 <-> 2 with
/// g21 while 2 <-> 3 carries a spectator coupling g32.
struct Sigma {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps3 = 0.0;
  double g21 = 0.0;
  double g32 = 0.0;
};

using EmitterSpec =
    std::variant<TwoLevel, NonRwaTwoLevel, Dicke, Lambda, Vscheme, Sigma>;

/// One emitter placed at a channel coordinate.
struct ChainEntry {
  EmitterSpec spec;
  double position = 0.0;
};

/// Ordered collection of emitters along the channel.  `concentrated` marks a
/// cluster placed within a wavelength, where positions are not required to be
/// distinct and position phases drop out non-trivially.
struct EmitterChain {
  std::vector<ChainEntry> entries;
  bool concentrated = false;
};

/// Dressed single-emitter parameters.
///
/// `alpha` is the complex pole of the dressed propagator (Omega - i*pi*g^2,
/// with the coupling weight M*g^2 for a Dicke cluster), `gamma = pi*g^2` the
/// elastic half-width per constituent.  For Dicke clusters
/// `alpha_collective` holds the one-excitation-less pole
/// Omega - i*pi*g^2*(M-1); for V-type emitters `alpha` and `alpha_collective`
/// hold the two dressed eigenvalues of the coupled excited doublet.
struct DerivedParams {
  complex alpha{};
  double gamma = 0.0;
  std::optional<complex> alpha_collective{};
};

/// On-shell kinematics of a photon pair: incoming (k1, k2), outgoing
/// (p1, p2), total energy E = p1 + p2 = k1 + k2 within `shell_tol`, and the
/// relative half-differences Delta = (k1 - k2)/2, DeltaPrime = (p1 - p2)/2.
struct TwoPhotonKinematics {
  double p1 = 0.0;
  double p2 = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  double E = 0.0;
  double Delta = 0.0;
  double DeltaPrime = 0.0;
  double shell_tol = 0.0;
};

/// Raises `flag` (when provided) without clearing it elsewhere.
inline void raise_flag(bool* flag) {
  if (flag != nullptr) *flag = true;
}

}  // namespace chiral
