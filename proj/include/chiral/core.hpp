#pragma once

#include "chiral/types.hpp"

/// Dressed parameters, response functions and chain validation.
namespace chiral {

/// Checks the static constraints of an emitter spec (couplings >= 0,
/// M >= 1, ...).  Throws Error{InvalidArgument} on violation.
void validate_spec(const EmitterSpec& spec);

/// Dressed pole(s) and elastic half-width of a single emitter.
///
/// Examples (Gamma_ref units): TwoLevel{0, 0} -> alpha = 0, gamma = 0;
/// TwoLevel{Omega = 5, g^2 = 1/pi} -> alpha = 5 - i;
/// Dicke{M = 2, Omega = 1, g^2 = 1/pi} -> alpha = 1 - 2i and
/// alpha_collective = 1 - i.
DerivedParams derive_params(const EmitterSpec& spec);

/// Response pair of a two-level-type emitter.
///
/// m(nu)  = 1 / (nu - alpha)                    (dressed propagator)
/// s(nu)  = 1 - 2*pi*i * weight * m(nu)         (elastic amplitude)
///
/// with weight = g^2 for a two-level emitter and M*g^2 for a Dicke cluster.
/// s() is computed through m() so the relation s - 1 = -2*pi*i*weight*m holds
/// at the bit level.  Evaluations with |nu - alpha| < pole_guard raise the
/// caller's flag and still return the (huge) value.
struct ResponseFunctions {
  complex alpha{};
  double weight = 0.0;
  double pole_guard = 1e-10;

  complex m(double nu, bool* flagged = nullptr) const;
  complex s(double nu, bool* flagged = nullptr) const;
};

/// Builds the response pair for TwoLevel and Dicke specs.
/// Other emitter families have no scalar (single-pole) response; they throw
/// Error{UnsupportedSpec}.
ResponseFunctions response_functions(const EmitterSpec& spec,
                                     const Regularization& reg = {});

/// Returns the chain sorted by ascending position (the order in which the
/// forward-moving photon meets the emitters).  Throws Error{EmptyChain} for
/// an empty chain and Error{DuplicatePosition} when two entries of a
/// non-concentrated chain share a coordinate.
EmitterChain validate_chain(const EmitterChain& chain);

/// On-shell kinematics constructor.  Validates |p1 + p2 - (k1 + k2)| against
/// `shell_tol` (default 1e-12 * max(1, |E|)) and throws Error{OffShell}
/// otherwise.
TwoPhotonKinematics make_kinematics(double p1, double p2, double k1, double k2,
                                    double shell_tol = -1.0);

}  // namespace chiral
