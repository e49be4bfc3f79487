#include <cmath>
#include <complex>

#include "chiral/quadrature.hpp"
#include "chiral/types.hpp"
#include "doctest.h"

using namespace chiral;

TEST_CASE("adaptive panels reproduce simple definite integrals") {
  const QuadratureResult poly =
      integrate_gk([](double x) { return complex{x * x, 0.0}; }, 0.0, 1.0);
  CHECK(poly.converged);
  CHECK(std::abs(poly.value - complex{1.0 / 3.0, 0.0}) < 1e-13);
  CHECK(poly.evaluations >= 15);

  const QuadratureResult osc = integrate_gk(
      [](double x) { return std::exp(kImag * x); }, 0.0, kPi);
  CHECK(osc.converged);
  CHECK(std::abs(osc.value - complex{0.0, 2.0}) < 1e-12);
}

TEST_CASE("empty interval integrates to zero") {
  const QuadratureResult res =
      integrate_gk([](double) { return complex{1.0, 0.0}; }, 2.0, 2.0);
  CHECK(res.converged);
  CHECK(res.value == complex{0.0, 0.0});
}

TEST_CASE("a sharp peak defeats a starved interval budget") {
  QuadratureOptions opts;
  opts.max_intervals = 2;
  const QuadratureResult res = integrate_gk(
      [](double x) {
        const double d = x - 0.37;
        return complex{1.0 / (d * d + 1e-12), 0.0};
      },
      0.0, 1.0, opts);
  CHECK(!res.converged);
}

TEST_CASE("whole-line integration captures quartic-decay tails") {
  // 1/((k - z1)(k - z2)) with z1 below and z2 above the axis integrates to
  // 2 pi i / (z2 - z1) by closing in the upper half plane.
  const complex z1{0.0, -1.0};
  const complex z2{0.0, 2.0};
  const QuadratureResult res = integrate_line_tail4(
      [&](double k) { return 1.0 / ((k - z1) * (k - z2)); }, -40.0, 40.0);
  const complex expect = 2.0 * kPi * kImag / (z2 - z1);
  CHECK(std::abs(res.value - expect) < 1e-8 * std::abs(expect));
  CHECK(res.error < 1e-6);

  // Product of four resolvents (the shape used for pair exchange):
  // closed form -4 pi i / ((E-a-b)(E-2a)(E-2b)) at E = 0.
  const complex a{0.0, -1.0};
  const complex b{1.0, -1.0};
  const QuadratureResult pair = integrate_line_tail4(
      [&](double k) {
        return 1.0 / ((k - a) * (-k - a) * (k - b) * (-k - b));
      },
      -60.0, 60.0);
  const complex closed =
      -4.0 * kPi * kImag / ((-a - b) * (-2.0 * a) * (-2.0 * b));
  CHECK(std::abs(pair.value - closed) < 1e-8 * std::abs(closed));
}

TEST_CASE("whole-line integration insists on a window straddling zero") {
  const auto f = [](double k) { return complex{1.0 / (k * k + 1.0), 0.0}; };
  CHECK_THROWS_AS(integrate_line_tail4(f, 1.0, 2.0, {}), Error);
  CHECK_THROWS_AS(integrate_line_tail4(f, -2.0, -1.0, {}), Error);
}

TEST_CASE("Gauss-Legendre rules are consistent and exact on polynomials") {
  for (int order : {6, 8, 16}) {
    const GaussLegendreRule rule = gl_rule(order);
    REQUIRE(rule.nodes.size() == static_cast<std::size_t>(order));
    double wsum = 0.0;
    double x4 = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      wsum += rule.weights[i];
      x4 += rule.weights[i] * std::pow(rule.nodes[i], 4);
    }
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(x4 == doctest::Approx(0.4).epsilon(1e-13));
  }
  CHECK_THROWS_AS(gl_rule(7), Error);
}
