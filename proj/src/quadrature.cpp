#include "chiral/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace chiral {

namespace {

// Gauss(7)/Kronrod(15) abscissae and weights on [-1, 1] (positive half; the
// rule is symmetric).  Even-indexed Kronrod nodes interleave the Gauss ones.
constexpr std::array<double, 8> kKronrodNodes = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0};
constexpr std::array<double, 8> kKronrodWeights = {
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278};
constexpr std::array<double, 4> kGaussWeights = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
    0.4179591836734694};

struct PanelEstimate {
  complex kronrod{};
  double error = 0.0;
};

PanelEstimate gk15(const Integrand& f, double a, double b, int& evaluations) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  complex kronrod = kKronrodWeights[7] * f(mid);
  complex gauss = kGaussWeights[3] * f(mid);
  ++evaluations;
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kKronrodNodes[i];
    const complex pair = f(mid - dx) + f(mid + dx);
    evaluations += 2;
    kronrod += kKronrodWeights[i] * pair;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * pair;
  }
  kronrod *= half;
  gauss *= half;
  return {kronrod, std::abs(kronrod - gauss)};
}

}  // namespace

QuadratureResult integrate_gk(const Integrand& f, double a, double b,
                              const QuadratureOptions& opts) {
  QuadratureResult result;
  if (a == b) {
    result.converged = true;
    return result;
  }

  struct Segment {
    double a, b;
    complex value;
    double error;
  };
  // Worst-error-first queue; the running counter breaks ties so the refinement
  // order (and therefore the result, bit for bit) is deterministic.
  std::multimap<std::pair<double, long>, Segment, std::greater<>> queue;
  long counter = 0;

  PanelEstimate first = gk15(f, a, b, result.evaluations);
  queue.emplace(std::make_pair(first.error, counter++),
                Segment{a, b, first.kronrod, first.error});
  complex total = first.kronrod;
  double total_error = first.error;

  auto tolerance = [&]() {
    return std::max(opts.abs_tol, opts.rel_tol * std::abs(total));
  };

  while (total_error > tolerance() &&
         static_cast<int>(queue.size()) < opts.max_intervals) {
    auto worst_it = queue.begin();
    Segment worst = worst_it->second;
    queue.erase(worst_it);
    total -= worst.value;
    total_error -= worst.error;

    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // Interval is at floating-point resolution; keep its estimate.
      total += worst.value;
      total_error += worst.error;
      break;
    }
    for (const auto& [lo, hi] :
         {std::pair{worst.a, mid}, std::pair{mid, worst.b}}) {
      PanelEstimate est = gk15(f, lo, hi, result.evaluations);
      queue.emplace(std::make_pair(est.error, counter++),
                    Segment{lo, hi, est.kronrod, est.error});
      total += est.kronrod;
      total_error += est.error;
    }
  }

  result.value = total;
  result.error = total_error;
  result.converged = total_error <= tolerance();
  return result;
}

QuadratureResult integrate_line_tail4(const Integrand& f, double a, double b,
                                      const QuadratureOptions& opts) {
  if (!(a < 0.0 && b > 0.0))
    throw Error(ErrorCode::InvalidArgument,
                "whole-line integration needs a core window straddling zero");

  // Split the requested tolerance between the core and the two mapped tails.
  QuadratureOptions part = opts;
  part.rel_tol = opts.rel_tol / 3.0;

  QuadratureResult core = integrate_gk(f, a, b, part);
  QuadratureResult right = integrate_gk(
      [&f](double u) {
        const double k = 1.0 / u;
        return f(k) * k * k;
      },
      0.0, 1.0 / b, part);
  QuadratureResult left = integrate_gk(
      [&f](double u) {
        const double k = -1.0 / u;
        return f(k) * k * k;
      },
      0.0, -1.0 / a, part);

  QuadratureResult result;
  result.value = core.value + right.value + left.value;
  result.error = core.error + right.error + left.error;
  result.evaluations =
      core.evaluations + right.evaluations + left.evaluations;
  result.converged = core.converged && right.converged && left.converged;
  if (!result.converged ||
      result.error >
          std::max(opts.abs_tol, opts.rel_tol * std::abs(result.value))) {
    throw Error(ErrorCode::QuadratureNotConverged,
                "adaptive whole-line quadrature failed to reach the requested "
                "tolerance");
  }
  return result;
}

GaussLegendreRule gl_rule(int order) {
  static constexpr std::array<double, 6> n6 = {
      -0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
      0.2386191860831969,  0.6612093864662645,  0.9324695142031521};
  static constexpr std::array<double, 6> w6 = {
      0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
      0.4679139345726910, 0.3607615730481386, 0.1713244923791704};
  static constexpr std::array<double, 8> n8 = {
      -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
      -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
      0.7966664774136267,  0.9602898564975363};
  static constexpr std::array<double, 8> w8 = {
      0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
      0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
      0.2223810344533745, 0.1012285362903763};
  static constexpr std::array<double, 12> n12 = {
      -0.9815606342467192, -0.9041172563704749, -0.7699026741943047,
      -0.5873179542866175, -0.3678314989981802, -0.1252334085114689,
      0.1252334085114689,  0.3678314989981802,  0.5873179542866175,
      0.7699026741943047,  0.9041172563704749,  0.9815606342467192};
  static constexpr std::array<double, 12> w12 = {
      0.0471753363865118, 0.1069393259953184, 0.1600783285433462,
      0.2031674267230659, 0.2334925365383548, 0.2491470458134028,
      0.2491470458134028, 0.2334925365383548, 0.2031674267230659,
      0.1600783285433462, 0.1069393259953184, 0.0471753363865118};
  static constexpr std::array<double, 16> n16 = {
      -0.9894009349916499, -0.9445750230732326, -0.8656312023878318,
      -0.7554044083550030, -0.6178762444026438, -0.4580167776572274,
      -0.2816035507792589, -0.0950125098376374, 0.0950125098376374,
      0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
      0.7554044083550030,  0.8656312023878318,  0.9445750230732326,
      0.9894009349916499};
  static constexpr std::array<double, 16> w16 = {
      0.0271524594117541, 0.0622535239386479, 0.0951585116824928,
      0.1246289712555339, 0.1495959888165767, 0.1691565193950025,
      0.1826034150449236, 0.1894506104550685, 0.1894506104550685,
      0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
      0.1246289712555339, 0.0951585116824928, 0.0622535239386479,
      0.0271524594117541};
  switch (order) {
    case 6:
      return {n6, w6};
    case 8:
      return {n8, w8};
    case 12:
      return {n12, w12};
    case 16:
      return {n16, w16};
    default:
      throw Error(ErrorCode::InvalidArgument,
                  "supported Gauss-Legendre orders are 6, 8, 12 and 16");
  }
}

}  // namespace chiral
