#include <cmath>
#include <complex>

#include "chiral/core.hpp"
#include "doctest.h"

using namespace chiral;

namespace {
const double kG1 = 1.0 / std::sqrt(kPi);  // coupling with half-width 1
}

TEST_CASE("parameter validation rejects unphysical couplings") {
  CHECK_THROWS_AS(validate_spec(EmitterSpec{TwoLevel{0.0, -1.0}}), Error);
  CHECK_THROWS_AS(validate_spec(EmitterSpec{Dicke{0, 0.0, kG1}}), Error);
  CHECK_THROWS_AS(validate_spec(EmitterSpec{NonRwaTwoLevel{0.0, kG1, -0.1}}),
                  Error);
  CHECK_THROWS_AS(validate_spec(EmitterSpec{Lambda{0, 0, 1, -kG1, kG1}}),
                  Error);
  try {
    validate_spec(EmitterSpec{TwoLevel{0.0, -1.0}});
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::InvalidArgument);
  }
  CHECK_NOTHROW(validate_spec(EmitterSpec{TwoLevel{-3.0, 0.0}}));
}

TEST_CASE("dressed pole of a two-level emitter") {
  const DerivedParams dp = derive_params(EmitterSpec{TwoLevel{5.0, kG1}});
  CHECK(dp.gamma == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(dp.alpha - complex{5.0, -1.0}) < 1e-14);
  CHECK(!dp.alpha_collective.has_value());

  const DerivedParams zero = derive_params(EmitterSpec{TwoLevel{0.0, kG1}});
  CHECK(std::abs(zero.alpha - complex{0.0, -1.0}) < 1e-14);
}

TEST_CASE("Dicke cluster carries an M-fold broadened pole plus a collective "
          "one") {
  const DerivedParams dp = derive_params(EmitterSpec{Dicke{2, 1.0, kG1}});
  CHECK(std::abs(dp.alpha - complex{1.0, -2.0}) < 1e-14);
  REQUIRE(dp.alpha_collective.has_value());
  CHECK(std::abs(*dp.alpha_collective - complex{1.0, -1.0}) < 1e-14);
  CHECK(dp.gamma == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("V-scheme dressed eigenvalues solve the quadratic exactly") {
  const Vscheme spec{0.3, 1.0, 2.5, kG1, std::sqrt(2.0) * kG1};
  const DerivedParams dp = derive_params(EmitterSpec{spec});
  const double a = kPi * spec.g21 * spec.g21;
  const double b = kPi * spec.g31 * spec.g31;
  REQUIRE(dp.alpha_collective.has_value());
  // (lambda - l2)(lambda - l3) == (lambda - eps2 + ia)(lambda - eps3 + ib)
  //                               + a b   for every lambda.
  for (double lam : {-2.0, 0.0, 1.3, 4.0}) {
    const complex lhs = (lam - dp.alpha) * (lam - *dp.alpha_collective);
    const complex rhs = (lam - complex{spec.eps2, -a}) *
                            (lam - complex{spec.eps3, -b}) +
                        a * b;
    CHECK(std::abs(lhs - rhs) < 1e-12);
  }
  // Both dressed levels radiate: strictly negative imaginary parts.
  CHECK(dp.alpha.imag() < 0.0);
  CHECK(dp.alpha_collective->imag() < 0.0);
}

TEST_CASE("poles stay in the lower half plane whenever coupling is on") {
  for (const EmitterSpec& spec :
       {EmitterSpec{TwoLevel{2.0, 0.3}}, EmitterSpec{Dicke{4, -1.0, 0.7}},
        EmitterSpec{Sigma{0.0, 1.0, 5.0, 0.4, 0.9}}}) {
    const DerivedParams dp = derive_params(spec);
    CHECK(dp.alpha.imag() < 0.0);
    CHECK(dp.gamma >= 0.0);
  }
}

TEST_CASE("scalar response: the amplitude is built through the resolvent") {
  const EmitterSpec spec{TwoLevel{0.5, kG1}};
  const ResponseFunctions rf = response_functions(spec);
  CHECK(rf.weight == doctest::Approx(kG1 * kG1).epsilon(1e-16));
  for (double nu : {-3.0, 0.0, 0.5, 2.7}) {
    const complex m = rf.m(nu);
    const complex expect = 1.0 - 2.0 * kPi * kImag * rf.weight * m;
    CHECK(rf.s(nu) == expect);  // same arithmetic path, bit for bit
    CHECK(std::abs(std::abs(rf.s(nu)) - 1.0) < 1e-14);
  }
}

TEST_CASE("Dicke response weight scales with the cluster size") {
  const ResponseFunctions rf = response_functions(EmitterSpec{Dicke{5, 0.0, kG1}});
  CHECK(rf.weight == doctest::Approx(5.0 * kG1 * kG1).epsilon(1e-15));
  CHECK(std::abs(rf.alpha - complex{0.0, -5.0}) < 1e-13);
}

TEST_CASE("scalar response refuses the channel-matrix emitter") {
  CHECK_THROWS_AS(response_functions(EmitterSpec{Lambda{0, 0, 1, kG1, kG1}}),
                  Error);
  try {
    response_functions(EmitterSpec{Lambda{0, 0, 1, kG1, kG1}});
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::UnsupportedSpec);
  }
}

TEST_CASE("near-pole evaluations raise the flag instead of failing") {
  // Tiny coupling puts the dressed pole within the guard distance of the
  // real axis.
  const ResponseFunctions rf =
      response_functions(EmitterSpec{TwoLevel{0.0, 1e-8}});
  bool flagged = false;
  const complex value = rf.m(0.0, &flagged);
  CHECK(flagged);
  CHECK(std::isfinite(value.real()));
  flagged = false;
  (void)rf.m(1.0, &flagged);  // far from the pole: no flag
  CHECK(!flagged);
}

TEST_CASE("chain validation sorts by position and rejects collisions") {
  EmitterChain chain;
  chain.entries.push_back({EmitterSpec{TwoLevel{1.0, kG1}}, 3.0});
  chain.entries.push_back({EmitterSpec{TwoLevel{2.0, kG1}}, -1.0});
  chain.entries.push_back({EmitterSpec{TwoLevel{3.0, kG1}}, 0.0});
  const EmitterChain sorted = validate_chain(chain);
  REQUIRE(sorted.entries.size() == 3);
  CHECK(sorted.entries[0].position == -1.0);
  CHECK(sorted.entries[1].position == 0.0);
  CHECK(sorted.entries[2].position == 3.0);
  CHECK(std::get<TwoLevel>(sorted.entries[0].spec).Omega == 2.0);

  EmitterChain empty;
  CHECK_THROWS_AS(validate_chain(empty), Error);

  EmitterChain dup;
  dup.entries.push_back({EmitterSpec{TwoLevel{1.0, kG1}}, 0.0});
  dup.entries.push_back({EmitterSpec{TwoLevel{2.0, kG1}}, 0.0});
  CHECK_THROWS_AS(validate_chain(dup), Error);
  try {
    validate_chain(dup);
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::DuplicatePosition);
  }
  dup.concentrated = true;  // co-located emitters are allowed when declared
  CHECK_NOTHROW(validate_chain(dup));
}

TEST_CASE("two-photon kinematics live on the energy shell") {
  const TwoPhotonKinematics kin = make_kinematics(3.0, 1.0, 2.0, 2.0);
  CHECK(kin.E == 4.0);
  CHECK(kin.Delta == 0.0);
  CHECK(kin.DeltaPrime == 1.0);
  CHECK(kin.shell_tol == doctest::Approx(4e-12).epsilon(1e-3));

  CHECK_THROWS_AS(make_kinematics(1.0, 0.0, 2.0, 2.0), Error);
  try {
    make_kinematics(1.0, 0.0, 2.0, 2.0);
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::OffShell);
  }
  // A generous tolerance admits the same point.
  CHECK_NOTHROW(make_kinematics(1.0, 0.0, 2.0, 2.0, 10.0));
}
