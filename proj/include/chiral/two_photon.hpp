#pragma once

#include <functional>
#include <vector>

#include "chiral/quadrature.hpp"
#include "chiral/types.hpp"

/// Connected (irreducible) two-photon transmission kernels.
///
/// The full two-photon element splits into a reducible part -- the product of
/// single-photon amplitudes on the pairing deltas -- and a connected kernel
/// that is smooth on the energy shell.  Functions here return the connected
/// kernel only; the momentum-conserving deltas are never included.
namespace chiral {

/// Connected kernel of a Dicke cluster, built from the unsimplified
/// excitation bracket
///
///   B = M - (M - 1) (E/2 - alpha_M) / (E/2 - alpha_{M-1}),
///
///   T(kin) = 8 pi g^4 M (E/2 - alpha_M) B /
///            {[(E/2 - alpha_M)^2 - Delta^2] [(E/2 - alpha_M)^2 - Delta'^2]}.
complex t2_dicke(const TwoPhotonKinematics& kin, const Dicke& spec,
                 const Regularization& reg = {}, bool* flagged = nullptr);

/// Same kernel evaluated both with the bracket above and with its commonly
/// quoted simplified bracket (E/2) / (E/2 - alpha_{M-1}); the two agree only
/// when Omega = 0.  Exposed so consistency reports can print the difference.
struct DickeKernelForms {
  complex bracket_form{};
  complex simplified_form{};
  complex difference{};
};
DickeKernelForms t2_dicke_forms(const TwoPhotonKinematics& kin,
                                const Dicke& spec,
                                const Regularization& reg = {},
                                bool* flagged = nullptr);

/// Connected kernel of two separated two-level emitters; `downstream` is the
/// emitter the forward-moving photon meets last.  The kernel is independent
/// of the separation (chiral propagation phases cancel on shell).
complex t2_two_atoms_irred(const TwoPhotonKinematics& kin,
                           const TwoLevel& downstream, const TwoLevel& upstream,
                           const Regularization& reg = {},
                           bool* flagged = nullptr);

/// Analytic continuations in the total energy E at fixed Delta / DeltaPrime,
/// used for pole residue analysis.
complex t2_dicke_continued(complex E, double Delta, double DeltaPrime,
                           const Dicke& spec, const Regularization& reg = {});
complex t2_two_atoms_continued(complex E, double Delta, double DeltaPrime,
                               const TwoLevel& downstream,
                               const TwoLevel& upstream,
                               const Regularization& reg = {});

/// Full two-photon transmission element of a supported system (a single
/// two-level emitter, a Dicke cluster, or two separated two-level emitters):
/// `elastic` is the single-photon amplitude entering the reducible product
/// S(p1) S(p2), `irreducible_kernel` the connected kernel.
struct S2Decomposition {
  std::function<complex(double, bool*)> elastic;
  std::function<complex(const TwoPhotonKinematics&, bool*)> irreducible_kernel;
  double shell_tol = 0.0;
};
S2Decomposition s2_full(const EmitterChain& system,
                        const Regularization& reg = {});

enum class IntegralRoute { ClosedForm, Quadrature };

/// Intermediate pair propagation integral
///
///   I(E) = Int dk' M_a(k') M_a(E - k') M_b(k') M_b(E - k')
///        = -4 pi i / [(E - alpha_a - alpha_b)(E - 2 alpha_a)(E - 2 alpha_b)]
///
/// evaluated either in closed form or by adaptive quadrature over the real
/// line with inverse-quartic tail handling.
struct IntegralValue {
  complex value{};
  double error = 0.0;
  int evaluations = 0;
};
IntegralValue intermediate_pair_integral(double E, const TwoLevel& a,
                                         const TwoLevel& b, IntegralRoute route,
                                         const QuadratureOptions& opts = {});

/// Composition of two single-emitter connected kernels into the connected
/// kernel of the pair they form along the channel:
///
///   T(p; k) = S_down(p1) S_down(p2) T_up(p; k)
///           + S_up(k1) S_up(k2) T_down(p; k)
///           + (i/2) Int dk' T_down(p1, p2; k', E - k') T_up(k', E - k'; k).
///
/// The exchange integral runs either through the closed form above or
/// through adaptive quadrature (IntegralRoute).  The composition is ordered:
/// convolving in the opposite order yields a different kernel.
struct ConvolutionTerms {
  complex downstream_dressed{};
  complex upstream_dressed{};
  complex exchange{};
  complex total{};
  double quadrature_error = 0.0;
};
ConvolutionTerms s2_convolve(const TwoLevel& downstream, const TwoLevel& upstream,
                             const TwoPhotonKinematics& kin, IntegralRoute route,
                             const Regularization& reg = {},
                             bool* flagged = nullptr);

/// Two-photon pole structure in the complex total-energy plane at fixed
/// Delta, DeltaPrime.  Every pole of a dissipative emitter lies strictly in
/// the lower half plane.
enum class PoleKind { SinglePhoton, PairBound, Collective };
struct Pole {
  complex location{};
  PoleKind kind = PoleKind::SinglePhoton;
};
struct PoleReport {
  std::vector<Pole> poles;
};

/// Enumerates the kernel poles of a supported system that fall inside the
/// disk |E - window_center| <= window_radius (empty window -> empty report).
PoleReport locate_poles(const EmitterChain& system, double Delta,
                        double DeltaPrime, complex window_center,
                        double window_radius);

/// Off-shell two-photon vertex of a Lambda emitter for channels c_in, c_out
/// in {1, 2} (0-based indices in the arrays):
///
///   T[c_out][c_in] = g_{3,c_out} g_{3,c_in}
///       * 1 / (omega - eps3 - nu2 + i pi g^2)
///       * Sum_m g_{3m}^2 / (omega - eps_m - nu2 - nu3)
///       * 1 / (omega - eps3 - nu3 + i pi g^2),        g^2 = g31^2 + g32^2.
///
/// The raw vertex depends on the inner legs nu2 (outgoing) and nu3
/// (incoming); `symmetrized` averages over nu1 <-> nu2 and nu3 <-> nu4.  The
/// matrix is rank one by construction (det_raw vanishes identically).
struct LambdaKernel {
  std::array<std::array<complex, 2>, 2> raw{};
  std::array<std::array<complex, 2>, 2> symmetrized{};
  complex det_raw{};
};
LambdaKernel t2_lambda_kernel(double nu1, double nu2, double nu3, double nu4,
                              double omega, const Lambda& spec,
                              const Regularization& reg = {},
                              bool* flagged = nullptr);

}  // namespace chiral
