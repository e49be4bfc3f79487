#pragma once

#include <functional>
#include <span>

#include "chiral/types.hpp"

/// Adaptive complex-valued quadrature used by the dual-route identity checks.
namespace chiral {

struct QuadratureOptions {
  double rel_tol = 1e-8;
  double abs_tol = 0.0;
  int max_intervals = 4000;
};

struct QuadratureResult {
  complex value{};
  double error = 0.0;
  int evaluations = 0;
  bool converged = false;
};

using Integrand = std::function<complex(double)>;

/// Globally adaptive Gauss(7)/Kronrod(15) integration of `f` over [a, b].
/// Never throws on non-convergence; inspect `converged`.
QuadratureResult integrate_gk(const Integrand& f, double a, double b,
                              const QuadratureOptions& opts = {});

/// Whole-line integration for integrands decaying like |k|^-4.
///
/// The core window [a, b] (which must straddle zero) is integrated directly;
/// the algebraic tails are folded in exactly through the substitution
/// u = 1/k, which maps them onto finite intervals where the integrand is
/// smooth precisely because of the inverse-quartic decay.  Throws
/// Error{QuadratureNotConverged} when the requested tolerance cannot be met
/// and Error{InvalidArgument} when a >= 0 or b <= 0.
QuadratureResult integrate_line_tail4(const Integrand& f, double a, double b,
                                      const QuadratureOptions& opts = {});

/// Fixed-order Gauss-Legendre rule on [-1, 1]; supported orders: 6, 8, 16.
struct GaussLegendreRule {
  std::span<const double> nodes;
  std::span<const double> weights;
};
GaussLegendreRule gl_rule(int order);

}  // namespace chiral
