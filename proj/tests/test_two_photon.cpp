#include <cmath>
#include <complex>
#include <vector>

#include "chiral/core.hpp"
#include "chiral/single_photon.hpp"
#include "chiral/two_photon.hpp"
#include "doctest.h"

using namespace chiral;

namespace {

const double kG1 = 1.0 / std::sqrt(kPi);             // half-width 1
const double kG2 = std::sqrt(2.0) / std::sqrt(kPi);  // half-width 2

TwoPhotonKinematics kin_of(double e, double delta, double delta_prime) {
  return make_kinematics(0.5 * e + delta_prime, 0.5 * e - delta_prime,
                         0.5 * e + delta, 0.5 * e - delta);
}

}  // namespace

TEST_CASE("Dicke pair kernel at a frozen reference point") {
  // M = 2, Omega = 1, g^2 = 1/pi, E = 0, Delta = Delta' = 0:
  //   T = (72 + 104 i) / (125 pi).
  const Dicke spec{2, 1.0, kG1};
  const complex t = t2_dicke(kin_of(0.0, 0.0, 0.0), spec);
  const complex expect = complex{72.0, 104.0} / (125.0 * kPi);
  CHECK(std::abs(t - expect) < 1e-14 * std::abs(expect));
}

TEST_CASE("Dicke kernel bracket forms: equal at zero detuning, split away "
          "from it") {
  // The unsimplified bracket reduces to (E/2 - Omega) / (E/2 - alpha_{M-1});
  // the historic simplification printed E/2 in the numerator.  They agree
  // exactly when Omega = 0 and differ otherwise.
  const TwoPhotonKinematics kin = kin_of(0.4, 0.1, 0.05);
  const DickeKernelForms at_zero = t2_dicke_forms(kin, Dicke{2, 0.0, kG1});
  CHECK(std::abs(at_zero.difference) < 1e-13);

  const TwoPhotonKinematics kin1 = kin_of(2.4, 0.1, 0.05);
  const DickeKernelForms detuned = t2_dicke_forms(kin1, Dicke{2, 1.0, kG1});
  CHECK(std::abs(detuned.difference) > 1e-3);
  CHECK(std::abs(detuned.bracket_form - detuned.simplified_form -
                 detuned.difference) == 0.0);

  // At the historic reference point (Omega = 0, E = 0) both forms vanish.
  const DickeKernelForms frozen =
      t2_dicke_forms(kin_of(0.0, 0.0, 0.0), Dicke{2, 0.0, kG1});
  CHECK(std::abs(frozen.bracket_form) < 1e-14);
  CHECK(std::abs(frozen.simplified_form) < 1e-14);
}

TEST_CASE("single-emitter kernel is symmetric in each photon pair") {
  const Dicke spec{3, 0.5, kG1};
  for (double e : {-1.0, 0.4, 2.2}) {
    for (double d : {0.0, 0.3, 1.1}) {
      const complex base = t2_dicke(kin_of(e, d, 0.7), spec);
      CHECK(std::abs(t2_dicke(kin_of(e, -d, 0.7), spec) - base) < 1e-13);
      CHECK(std::abs(t2_dicke(kin_of(e, d, -0.7), spec) - base) < 1e-13);
    }
  }
}

TEST_CASE("M = 1 cluster kernel equals the transparent-partner pair kernel") {
  const Dicke single{1, 0.6, kG1};
  const TwoLevel atom{0.6, kG1};
  const TwoLevel off{0.6, 0.0};
  for (double e : {0.0, 1.2, 3.0}) {
    for (double d : {0.0, 0.4}) {
      const TwoPhotonKinematics kin = kin_of(e, d, 0.2);
      const complex dicke = t2_dicke(kin, single);
      // Either the upstream or the downstream partner may be transparent.
      CHECK(std::abs(t2_two_atoms_irred(kin, atom, off) - dicke) <
            1e-10 * std::max(1.0, std::abs(dicke)));
      CHECK(std::abs(t2_two_atoms_irred(kin, off, atom) - dicke) <
            1e-10 * std::max(1.0, std::abs(dicke)));
    }
  }
}

TEST_CASE("M = 1 cluster has no collective pole") {
  // Continuation to complex E near 2 alpha_0 = 2 Omega stays finite for
  // M = 1 (the hazardous bracket is absent).
  const Dicke single{1, 0.5, kG1};
  const complex near{1.0, 1e-8};
  const complex val = t2_dicke_continued(near, 0.2, 0.1, single, {});
  CHECK(std::isfinite(std::abs(val)));
  CHECK(std::abs(val) < 1e3);
}

TEST_CASE("two-atom kernel at a frozen reference point") {
  // Downstream Omega = 0, upstream Omega = 1, both with half-width 1,
  // evaluated at E = 0, Delta = Delta' = 0:
  //   terms (1+i)/(2 pi), 2/pi, (-4-8i)/(5 pi) sum to (17-11i)/(10 pi),
  //   kernel = -4i * sum = -(22+34i)/(5 pi).
  const TwoLevel down{0.0, kG1};
  const TwoLevel up{1.0, kG1};
  const complex t = t2_two_atoms_irred(kin_of(0.0, 0.0, 0.0), down, up);
  const complex expect = complex{-22.0, -34.0} / (5.0 * kPi);
  CHECK(std::abs(t - expect) < 1e-13 * std::abs(expect));
}

TEST_CASE("two-atom kernel symmetry and far-detuned falloff") {
  const TwoLevel down{0.0, kG1};
  const TwoLevel up{0.5, kG2};
  const complex base = t2_two_atoms_irred(kin_of(1.0, 0.3, 0.6), down, up);
  CHECK(std::abs(t2_two_atoms_irred(kin_of(1.0, -0.3, 0.6), down, up) - base) <
        1e-13);
  CHECK(std::abs(t2_two_atoms_irred(kin_of(1.0, 0.3, -0.6), down, up) - base) <
        1e-13);

  const complex resonant = t2_two_atoms_irred(kin_of(0.5, 0.25, 0.25), down, up);
  const complex detuned =
      t2_two_atoms_irred(kin_of(2000.0, 0.0, 0.0), down, up);
  CHECK(std::abs(detuned) < 1e-4 * std::abs(resonant));
}

TEST_CASE("identical atoms at E = 2 Omega have a vanishing connected kernel") {
  const TwoLevel atom{0.5, kG1};
  for (double d : {0.0, 0.3, 1.0}) {
    const complex t = t2_two_atoms_irred(kin_of(1.0, d, 0.2), atom, atom);
    CHECK(std::abs(t) < 1e-12);
  }
  // Away from E = 2 Omega the kernel is manifestly nonzero.
  CHECK(std::abs(t2_two_atoms_irred(kin_of(1.5, 0.0, 0.0), atom, atom)) >
        1e-3);
}

TEST_CASE("intermediate pair integral: frozen value and route agreement") {
  const TwoLevel a{0.0, kG1};
  const TwoLevel b{1.0, kG1};
  const IntegralValue closed =
      intermediate_pair_integral(0.0, a, b, IntegralRoute::ClosedForm);
  const complex expect = kPi * complex{1.0, -3.0} / 10.0;
  CHECK(std::abs(closed.value - expect) < 1e-15 * std::abs(expect));
  CHECK(closed.evaluations == 0);

  const IntegralValue quad =
      intermediate_pair_integral(0.0, a, b, IntegralRoute::Quadrature);
  CHECK(std::abs(quad.value - closed.value) < 1e-8 * std::abs(closed.value));
  CHECK(quad.evaluations > 0);
  CHECK(quad.error < 1e-6);

  for (double e : {-2.0, 0.7, 4.0}) {
    const complex c =
        intermediate_pair_integral(e, a, b, IntegralRoute::ClosedForm).value;
    const complex q =
        intermediate_pair_integral(e, a, b, IntegralRoute::Quadrature).value;
    CHECK(std::abs(c - q) < 1e-8 * std::max(1.0, std::abs(c)));
  }
}

TEST_CASE("ordered convolution reproduces the two-atom kernel") {
  const TwoLevel down{0.0, kG1};
  const TwoLevel up{1.0, kG1};
  const TwoPhotonKinematics kin = kin_of(0.0, 0.0, 0.0);
  const ConvolutionTerms terms =
      s2_convolve(down, up, kin, IntegralRoute::ClosedForm);

  // Frozen per-term values at this point (hand evaluation):
  CHECK(std::abs(terms.downstream_dressed - complex{2.0, -2.0} / kPi) <
        1e-13);
  CHECK(std::abs(terms.upstream_dressed - complex{0.0, -8.0} / kPi) < 1e-13);
  CHECK(std::abs(terms.exchange - complex{-32.0, 16.0} / (5.0 * kPi)) <
        1e-13);
  CHECK(std::abs(terms.total - complex{-22.0, -34.0} / (5.0 * kPi)) < 1e-13);

  // The composition equals the directly assembled kernel.
  const complex direct = t2_two_atoms_irred(kin, down, up);
  CHECK(std::abs(terms.total - direct) < 1e-12);

  // Quadrature route agrees with the closed form and reports its error.
  const ConvolutionTerms viaq =
      s2_convolve(down, up, kin, IntegralRoute::Quadrature);
  CHECK(std::abs(viaq.total - terms.total) < 1e-6 * std::abs(terms.total));
  CHECK(viaq.quadrature_error > 0.0);
  CHECK(viaq.quadrature_error < 1e-4);
}

TEST_CASE("convolution order matters: swapped emitters change the kernel") {
  const TwoLevel first{0.0, kG1};
  const TwoLevel second{0.0, kG2};
  double max_diff = 0.0;
  double max_mag = 0.0;
  for (double e : {-1.0, 0.0, 1.0, 2.0}) {
    for (double d : {0.0, 0.4, 0.9}) {
      const TwoPhotonKinematics kin = kin_of(e, d, 0.15);
      const complex ab =
          s2_convolve(first, second, kin, IntegralRoute::ClosedForm).total;
      const complex ba =
          s2_convolve(second, first, kin, IntegralRoute::ClosedForm).total;
      max_diff = std::max(max_diff, std::abs(ab - ba));
      max_mag = std::max({max_mag, std::abs(ab), std::abs(ba)});
    }
  }
  CHECK(max_diff > 1e-3 * max_mag);
}

TEST_CASE("transparent partner removes the exchange term") {
  const TwoLevel atom{0.3, kG1};
  const TwoLevel off{0.0, 0.0};
  const ConvolutionTerms terms =
      s2_convolve(atom, off, kin_of(0.6, 0.2, 0.0), IntegralRoute::ClosedForm);
  CHECK(terms.exchange == complex{0.0, 0.0});
  CHECK(terms.quadrature_error == 0.0);
}

TEST_CASE("full decomposition wires elastic and connected parts correctly") {
  Regularization reg;

  EmitterChain single;
  single.entries.push_back({EmitterSpec{TwoLevel{0.4, kG1}}, 0.0});
  const S2Decomposition one = s2_full(single);
  CHECK(std::abs(one.elastic(1.3, nullptr) -
                 s1_two_level(1.3, TwoLevel{0.4, kG1})) < 1e-15);
  const TwoPhotonKinematics kin = kin_of(0.9, 0.2, 0.1);
  CHECK(std::abs(one.irreducible_kernel(kin, nullptr) -
                 t2_dicke(kin, Dicke{1, 0.4, kG1})) < 1e-15);

  EmitterChain pair;
  pair.entries.push_back({EmitterSpec{TwoLevel{0.0, kG1}}, -1.0});
  pair.entries.push_back({EmitterSpec{TwoLevel{1.0, kG2}}, 2.0});
  const S2Decomposition two = s2_full(pair);
  CHECK(std::abs(two.elastic(0.5, nullptr) -
                 s1_two_level(0.5, TwoLevel{0.0, kG1}) *
                     s1_two_level(0.5, TwoLevel{1.0, kG2})) < 1e-15);
  // Downstream emitter is the one at the larger coordinate.
  CHECK(std::abs(two.irreducible_kernel(kin, nullptr) -
                 t2_two_atoms_irred(kin, TwoLevel{1.0, kG2},
                                    TwoLevel{0.0, kG1})) < 1e-15);

  // The assembled kernel does not depend on where the atoms sit, only on
  // their order along the channel.
  EmitterChain shifted = pair;
  shifted.entries[0].position = -30.0;
  shifted.entries[1].position = 45.0;
  const S2Decomposition moved = s2_full(shifted);
  CHECK(moved.irreducible_kernel(kin, nullptr) ==
        two.irreducible_kernel(kin, nullptr));

  EmitterChain three;
  for (int i = 0; i < 3; ++i)
    three.entries.push_back(
        {EmitterSpec{TwoLevel{0.0, kG1}}, static_cast<double>(i)});
  CHECK_THROWS_AS(s2_full(three), Error);

  EmitterChain lambda_chain;
  lambda_chain.entries.push_back({EmitterSpec{Lambda{0, 0, 1, kG1, kG1}}, 0.0});
  CHECK_THROWS_AS(s2_full(lambda_chain), Error);
  (void)reg;
}

TEST_CASE("continued kernels agree with the real-axis evaluations") {
  const Dicke spec{2, 0.7, kG1};
  const TwoPhotonKinematics kin = kin_of(1.8, 0.3, 0.1);
  CHECK(std::abs(t2_dicke_continued(complex{1.8, 0.0}, 0.3, 0.1, spec, {}) -
                 t2_dicke(kin, spec)) < 1e-15);

  const TwoLevel down{0.0, kG1};
  const TwoLevel up{1.0, kG2};
  CHECK(std::abs(
            t2_two_atoms_continued(complex{1.8, 0.0}, 0.3, 0.1, down, up, {}) -
            t2_two_atoms_irred(kin, down, up)) < 1e-14);
}

TEST_CASE("collective pole shows up in the continued Dicke kernel") {
  // For M = 2 the kernel has a pole at E = 2 alpha_{M-1}; halving the
  // distance to it doubles the magnitude.
  const Dicke spec{2, 1.0, kG1};
  const complex pole = 2.0 * complex{1.0, -1.0};
  const complex v1 =
      t2_dicke_continued(pole + complex{1e-4, 0.0}, 5.0, 3.0, spec, {});
  const complex v2 =
      t2_dicke_continued(pole + complex{2e-4, 0.0}, 5.0, 3.0, spec, {});
  CHECK(std::abs(v1) / std::abs(v2) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("pair bound state shows up in the continued two-atom kernel") {
  const TwoLevel down{0.0, kG1};
  const TwoLevel up{1.0, kG2};
  const complex pole = complex{0.0, -1.0} + complex{1.0, -2.0};
  const complex v1 =
      t2_two_atoms_continued(pole + complex{1e-4, 0.0}, 5.0, 3.0, down, up, {});
  const complex v2 =
      t2_two_atoms_continued(pole + complex{2e-4, 0.0}, 5.0, 3.0, down, up, {});
  CHECK(std::abs(v1) / std::abs(v2) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("pole report enumerates, filters and orders the singularities") {
  EmitterChain cluster;
  cluster.entries.push_back({EmitterSpec{Dicke{2, 1.0, kG1}}, 0.0});
  const PoleReport rep = locate_poles(cluster, 0.0, 0.0, complex{2.0, -2.0},
                                      20.0);
  // Delta = Delta' = 0 collapses the four single-photon copies onto one
  // location; the collective pole sits at 2 alpha_{M-1}.
  REQUIRE(rep.poles.size() == 2);
  CHECK(std::abs(rep.poles[0].location - complex{2.0, -4.0}) < 1e-14);
  CHECK(rep.poles[0].kind == PoleKind::SinglePhoton);
  CHECK(std::abs(rep.poles[1].location - complex{2.0, -2.0}) < 1e-14);
  CHECK(rep.poles[1].kind == PoleKind::Collective);
  for (const Pole& p : rep.poles) CHECK(p.location.imag() < 0.0);

  // A tight window drops everything.
  CHECK(locate_poles(cluster, 0.0, 0.0, complex{100.0, 0.0}, 1.0).poles.empty());

  EmitterChain pair;
  pair.entries.push_back({EmitterSpec{TwoLevel{0.0, kG1}}, 0.0});
  pair.entries.push_back({EmitterSpec{TwoLevel{1.0, kG2}}, 3.0});
  const PoleReport both = locate_poles(pair, 0.4, 0.0, complex{1.0, -2.0},
                                       30.0);
  bool has_pair_bound = false;
  for (const Pole& p : both.poles) {
    CHECK(p.location.imag() < 0.0);
    if (p.kind == PoleKind::PairBound) {
      has_pair_bound = true;
      CHECK(std::abs(p.location - complex{1.0, -3.0}) < 1e-14);
    }
  }
  CHECK(has_pair_bound);
}

TEST_CASE("Raman pair kernel: structure of the channel matrix") {
  const Lambda spec{0.0, 0.5, 2.0, kG1, kG2};
  const double omega = 3.1;
  const LambdaKernel k =
      t2_lambda_kernel(0.7, 0.9, 1.1, 0.4, omega, spec, {});

  // The raw vertex factorizes over channels: its determinant vanishes.
  double scale = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) scale = std::max(scale, std::abs(k.raw[i][j]));
  CHECK(std::abs(k.det_raw) < 1e-14 * scale * scale);

  // Symmetrization makes the kernel invariant under relabeling the outgoing
  // pair together with the incoming pair.
  const LambdaKernel swapped =
      t2_lambda_kernel(0.9, 0.7, 0.4, 1.1, omega, spec, {});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(k.symmetrized[i][j] - swapped.symmetrized[i][j]) <
            1e-13 * scale);

  // All entries share one reduced propagator chain: stripping the external
  // coupling factors leaves the same value in every channel slot.
  const complex reduced = k.raw[0][0] / (kG1 * kG1);
  CHECK(std::abs(k.raw[0][1] / (kG1 * kG2) - reduced) <
        1e-12 * std::abs(reduced));
  CHECK(std::abs(k.raw[1][0] / (kG2 * kG1) - reduced) <
        1e-12 * std::abs(reduced));
  CHECK(std::abs(k.raw[1][1] / (kG2 * kG2) - reduced) <
        1e-12 * std::abs(reduced));

  // A middle propagator hitting zero raises the flag: pick incoming/outgoing
  // legs whose sum exhausts the photon energy relative to channel 1.
  bool flagged = false;
  const double out_leg = 0.5;
  const double in_leg = omega - spec.eps1 - out_leg;  // nulls channel-1 term
  (void)t2_lambda_kernel(out_leg, 0.9, in_leg, 0.4, omega, spec, {},
                         &flagged);
  CHECK(flagged);
}
