#pragma once

#include <array>

#include "chiral/core.hpp"

/// Closed-form single-photon transmission amplitudes.
///
/// Every amplitude below is a pure phase (unimodular) whenever the emitter
/// has a single open outgoing channel; for the Lambda emitter the 2x2
/// channel matrix has unit column norms instead.  Evaluations closer to a
/// dressed pole than `Regularization::pole_guard` raise the caller's flag.
namespace chiral {

/// Two-level emitter: s(p) = (p - Omega - i pi g^2) / (p - Omega + i pi g^2).
complex s1_two_level(double p, const TwoLevel& spec,
                     const Regularization& reg = {}, bool* flagged = nullptr);

/// Dicke cluster of M two-level emitters:
/// s(p) = 1 - 2 pi i M g^2 / (p - Omega + i pi M g^2).
complex s1_dicke(double p, const Dicke& spec, const Regularization& reg = {},
                 bool* flagged = nullptr);

/// Beyond the rotating-wave approximation the chiral transmission amplitude
/// is exactly unity for every momentum: the counter-rotating dressing
/// renormalizes the emitter but cannot scatter a unidirectional photon.
complex s1_non_rwa(double p, const NonRwaTwoLevel& spec);

/// Sigma (cascade) emitter: a two-level amplitude on the 1 <-> 2 transition;
/// the upper spectator coupling g32 does not enter at the one-photon level.
complex s1_sigma(double p, const Sigma& spec, const Regularization& reg = {},
                 bool* flagged = nullptr);

/// V-type emitter (shared ground state, doublet of excited levels):
///
///   s(p) = [(x2 - i pi g21^2)(x3 - i pi g31^2) + pi^2 g21^2 g31^2] /
///          [(x2 + i pi g21^2)(x3 + i pi g31^2) + pi^2 g21^2 g31^2],
///
/// with x_c = p + eps1 - eps_c.
complex s1_v(double p, const Vscheme& spec, const Regularization& reg = {},
             bool* flagged = nullptr);

/// Diagonalization data of the radiatively coupled V-scheme excited doublet:
/// dressed eigenvalues lambda2/lambda3 and the complex mixing angle phi with
/// its rotation matrix xi (xi[0][0] = xi[1][1] = cos(phi/2),
/// xi[0][1] = -xi[1][0] = sin(phi/2)).
struct VDiagonalization {
  complex lambda2{};
  complex lambda3{};
  complex phi{};
  std::array<std::array<complex, 2>, 2> xi{};
};
VDiagonalization v_diagonalization(const Vscheme& spec);

/// Lambda emitter scattering: a photon arriving in ground channel
/// `incoming_channel` (1 or 2) leaves in channel `out` with amplitude
///
///   channels[out][in] = delta_{out,in}
///       - 2 pi i g_{3,out} g_{3,in} / (p + eps_in - eps3 + i pi g^2),
///
/// g^2 = g31^2 + g32^2, and outgoing momentum p_out[out] = p + eps_in -
/// eps_out (Raman energy exchange).  `elastic` is the amplitude for staying
/// in the incoming channel.
struct S1LambdaResult {
  complex elastic{};
  std::array<std::array<complex, 2>, 2> channels{};  // [out][in], 0-based
  std::array<double, 2> p_out{};
  int incoming_channel = 1;
};
S1LambdaResult s1_lambda(double p, const Lambda& spec, int incoming_channel,
                         const Regularization& reg = {},
                         bool* flagged = nullptr);

/// Two two-level emitters within a wavelength with equal detunings: the pair
/// responds as one two-level emitter with g^2 -> g1^2 + g2^2.  Throws
/// Error{UnequalDetunings} when the transition frequencies differ.
complex s1_concentrated_pair(double p, const TwoLevel& a, const TwoLevel& b,
                             const Regularization& reg = {},
                             bool* flagged = nullptr);

/// Two co-located two-level emitters with arbitrary detunings:
///
///   s(p) = (R - i pi N) / (R + i pi N),
///   R = (p - Omega1)(p - Omega2),
///   N = g1^2 (p - Omega2) + g2^2 (p - Omega1).
complex s1_concentrated_pair_general(double p, const TwoLevel& a,
                                     const TwoLevel& b,
                                     const Regularization& reg = {},
                                     bool* flagged = nullptr);

/// Scalar elastic amplitude of a single emitter (dispatch over the spec).
/// Lambda emitters throw Error{UnsupportedSpec}: their scattering is a
/// channel matrix, not a scalar (use s1_lambda).
complex s1_emitter(double p, const EmitterSpec& spec,
                   const Regularization& reg = {}, bool* flagged = nullptr);

/// Transmission through a chain: the product of the member amplitudes, taken
/// in encounter order.  Distributed chains are position-independent (the
/// propagation phases cancel against the free evolution), hence the product
/// is permutation invariant.  A concentrated chain is supported for a single
/// entry or for exactly two two-level emitters (the co-located pair above).
complex s1_chain(double p, const EmitterChain& chain,
                 const Regularization& reg = {}, bool* flagged = nullptr);

}  // namespace chiral
