#include <cmath>
#include <complex>
#include <cstring>
#include <string>

#include "chiral_smatrix.h"
#include "doctest.h"
#include "json.hpp"

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
const double kG1 = 1.0 / std::sqrt(kPi);  // half-width 1 in reference units

using cx = std::complex<double>;

cx lift(csm_complex z) { return {z.re, z.im}; }

bool close(csm_complex got, cx want, double rel) {
  return std::abs(lift(got) - want) <=
         rel * std::max(1.0, std::abs(want));
}

struct EmitterGuard {
  csm_emitter* ptr = nullptr;
  explicit EmitterGuard(csm_emitter* p) : ptr(p) {}
  ~EmitterGuard() { csm_emitter_free(ptr); }
  EmitterGuard(const EmitterGuard&) = delete;
  EmitterGuard& operator=(const EmitterGuard&) = delete;
};

struct ChainGuard {
  csm_chain* ptr = nullptr;
  explicit ChainGuard(csm_chain* p) : ptr(p) {}
  ~ChainGuard() { csm_chain_free(ptr); }
  ChainGuard(const ChainGuard&) = delete;
  ChainGuard& operator=(const ChainGuard&) = delete;
};

}  // namespace

TEST_CASE("version and error channel") {
  REQUIRE(csm_version() != nullptr);
  CHECK(std::string(csm_version()) == "1.0.0");
  REQUIRE(csm_last_error() != nullptr);
}

TEST_CASE("emitter construction, validation and dressed parameters") {
  EmitterGuard two(csm_emitter_two_level(5.0, kG1));
  REQUIRE(two.ptr != nullptr);
  csm_complex alpha{};
  double gamma = 0.0;
  csm_complex second{};
  int has_second = -1;
  REQUIRE(csm_derive_params(two.ptr, &alpha, &gamma, &second, &has_second) ==
          CSM_OK);
  CHECK(close(alpha, {5.0, -1.0}, 1e-14));
  CHECK(gamma == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(has_second == 0);

  EmitterGuard dicke(csm_emitter_dicke(2, 1.0, kG1));
  REQUIRE(dicke.ptr != nullptr);
  REQUIRE(csm_derive_params(dicke.ptr, &alpha, &gamma, &second, &has_second) ==
          CSM_OK);
  CHECK(close(alpha, {1.0, -2.0}, 1e-14));
  CHECK(has_second == 1);
  CHECK(close(second, {1.0, -1.0}, 1e-14));

  CHECK(csm_emitter_two_level(0.0, -1.0) == nullptr);
  CHECK(std::strlen(csm_last_error()) > 0);
  CHECK(csm_emitter_dicke(0, 0.0, kG1) == nullptr);

  CHECK(csm_derive_params(nullptr, &alpha, &gamma, nullptr, nullptr) ==
        CSM_ERR_INVALID_ARGUMENT);
}

TEST_CASE("chain assembly raises the documented status codes") {
  ChainGuard chain(csm_chain_new(0));
  REQUIRE(chain.ptr != nullptr);
  CHECK(csm_chain_validate(chain.ptr) == CSM_ERR_EMPTY_CHAIN);

  EmitterGuard atom(csm_emitter_two_level(0.0, kG1));
  REQUIRE(csm_chain_add(chain.ptr, atom.ptr, 0.0) == CSM_OK);
  REQUIRE(csm_chain_add(chain.ptr, atom.ptr, 0.0) == CSM_OK);
  CHECK(csm_chain_validate(chain.ptr) == CSM_ERR_DUPLICATE_POSITION);

  ChainGuard cluster(csm_chain_new(1));
  REQUIRE(csm_chain_add(cluster.ptr, atom.ptr, 0.0) == CSM_OK);
  REQUIRE(csm_chain_add(cluster.ptr, atom.ptr, 0.0) == CSM_OK);
  CHECK(csm_chain_validate(cluster.ptr) == CSM_OK);

  CHECK(csm_chain_add(nullptr, atom.ptr, 0.0) == CSM_ERR_INVALID_ARGUMENT);
}

TEST_CASE("single-photon amplitudes across the interface") {
  EmitterGuard dicke(csm_emitter_dicke(2, 0.0, kG1));
  csm_complex s{};
  int flagged = -1;
  REQUIRE(csm_s1_emitter(dicke.ptr, 2.0, 0.0, &s, &flagged) == CSM_OK);
  CHECK(close(s, {0.0, -1.0}, 1e-14));
  CHECK(flagged == 0);

  // Pole-adjacent evaluation raises the flag instead of failing.
  EmitterGuard weak(csm_emitter_two_level(0.0, 1e-8));
  REQUIRE(csm_s1_emitter(weak.ptr, 0.0, 0.0, &s, &flagged) == CSM_OK);
  CHECK(flagged == 1);

  ChainGuard chain(csm_chain_new(0));
  EmitterGuard a(csm_emitter_two_level(0.0, kG1));
  EmitterGuard b(csm_emitter_two_level(1.0, kG1));
  REQUIRE(csm_chain_add(chain.ptr, a.ptr, 0.0) == CSM_OK);
  REQUIRE(csm_chain_add(chain.ptr, b.ptr, 2.0) == CSM_OK);
  csm_complex s_chain{};
  REQUIRE(csm_s1_chain(chain.ptr, 0.5, 0.0, &s_chain, nullptr) == CSM_OK);
  csm_complex sa{}, sb{};
  REQUIRE(csm_s1_emitter(a.ptr, 0.5, 0.0, &sa, nullptr) == CSM_OK);
  REQUIRE(csm_s1_emitter(b.ptr, 0.5, 0.0, &sb, nullptr) == CSM_OK);
  CHECK(close(s_chain, lift(sa) * lift(sb), 1e-14));
  CHECK(std::abs(std::abs(lift(s_chain)) - 1.0) < 1e-14);

  EmitterGuard lam(csm_emitter_lambda(0.0, 0.5, 2.0, kG1, kG1));
  ChainGuard lam_chain(csm_chain_new(0));
  REQUIRE(csm_chain_add(lam_chain.ptr, lam.ptr, 0.0) == CSM_OK);
  CHECK(csm_s1_chain(lam_chain.ptr, 0.5, 0.0, &s_chain, nullptr) ==
        CSM_ERR_UNSUPPORTED_SPEC);
}

TEST_CASE("Raman channel matrix of the ground-state doublet") {
  EmitterGuard lam(csm_emitter_lambda(0.0, 0.5, 2.0, kG1, kG1));
  csm_complex channels[4] = {};
  double p_out[2] = {};
  csm_complex elastic{};
  int flagged = -1;
  REQUIRE(csm_s1_lambda(lam.ptr, 2.0, 1, 0.0, channels, p_out, &elastic,
                        &flagged) == CSM_OK);
  CHECK(std::abs(lift(channels[0])) < 1e-14);              // [out=0][in=0]
  CHECK(close(channels[2], {-1.0, 0.0}, 1e-14));           // [out=1][in=0]
  CHECK(p_out[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p_out[1] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(std::abs(lift(elastic) - lift(channels[0])) == 0.0);

  EmitterGuard atom(csm_emitter_two_level(0.0, kG1));
  CHECK(csm_s1_lambda(atom.ptr, 1.0, 1, 0.0, channels, p_out, &elastic,
                      nullptr) == CSM_ERR_UNSUPPORTED_SPEC);
}

TEST_CASE("connected two-photon kernels across the interface") {
  // Collective cluster at zero relative momenta.
  ChainGuard dicke_chain(csm_chain_new(0));
  EmitterGuard dicke(csm_emitter_dicke(2, 1.0, kG1));
  REQUIRE(csm_chain_add(dicke_chain.ptr, dicke.ptr, 0.0) == CSM_OK);
  csm_complex t{};
  int flagged = -1;
  REQUIRE(csm_t2_kernel(dicke_chain.ptr, 0.0, 0.0, 0.0, 0.0, 0.0, &t,
                        &flagged) == CSM_OK);
  const cx dicke_ref = cx(72.0, 104.0) / (125.0 * kPi);
  CHECK(close(t, dicke_ref, 1e-13));

  // Two separated emitters, fully resonant kinematics.
  ChainGuard pair(csm_chain_new(0));
  EmitterGuard down(csm_emitter_two_level(0.0, kG1));
  EmitterGuard up(csm_emitter_two_level(1.0, kG1));
  REQUIRE(csm_chain_add(pair.ptr, down.ptr, 0.0) == CSM_OK);
  REQUIRE(csm_chain_add(pair.ptr, up.ptr, 1.0) == CSM_OK);
  REQUIRE(csm_t2_kernel(pair.ptr, 0.0, 0.0, 0.0, 0.0, 0.0, &t, &flagged) ==
          CSM_OK);
  const cx pair_ref = -cx(22.0, 34.0) / (5.0 * kPi);
  CHECK(close(t, pair_ref, 1e-13));

  // Energy must be conserved between the pairs.
  CHECK(csm_t2_kernel(pair.ptr, 1.0, 0.0, 0.0, 0.0, 0.0, &t, nullptr) ==
        CSM_ERR_OFF_SHELL);
}

TEST_CASE("excitation-bracket forms agree only at zero detuning") {
  EmitterGuard resonant(csm_emitter_dicke(2, 0.0, kG1));
  csm_complex bracket{}, simplified{};
  REQUIRE(csm_t2_dicke_forms(resonant.ptr, 0.3, 0.1, 0.2, 0.2, 0.0, &bracket,
                             &simplified) == CSM_OK);
  CHECK(std::abs(lift(bracket) - lift(simplified)) < 1e-13);

  EmitterGuard detuned(csm_emitter_dicke(2, 1.0, kG1));
  REQUIRE(csm_t2_dicke_forms(detuned.ptr, 1.2, 1.2, 1.2, 1.2, 0.0, &bracket,
                             &simplified) == CSM_OK);
  CHECK(std::abs(lift(bracket) - lift(simplified)) > 1e-4);

  // A two-level emitter is wrapped as the single-excitation cluster, and its
  // bracket-form kernel must coincide with the general connected kernel.
  EmitterGuard two(csm_emitter_two_level(1.0, kG1));
  csm_complex b2{}, s2{};
  REQUIRE(csm_t2_dicke_forms(two.ptr, 1.2, 1.2, 1.2, 1.2, 0.0, &b2, &s2) ==
          CSM_OK);
  ChainGuard single(csm_chain_new(0));
  REQUIRE(csm_chain_add(single.ptr, two.ptr, 0.0) == CSM_OK);
  csm_complex t_single{};
  REQUIRE(csm_t2_kernel(single.ptr, 1.2, 1.2, 1.2, 1.2, 0.0, &t_single,
                        nullptr) == CSM_OK);
  CHECK(std::abs(lift(b2) - lift(t_single)) <
        1e-13 * std::max(1.0, std::abs(lift(t_single))));
  CHECK(std::abs(lift(b2) - lift(s2)) > 1e-4);  // detuned: forms disagree

  EmitterGuard lam(csm_emitter_lambda(0.0, 0.5, 2.0, kG1, kG1));
  CHECK(csm_t2_dicke_forms(lam.ptr, 0.0, 0.0, 0.0, 0.0, 0.0, &bracket,
                           &simplified) == CSM_ERR_UNSUPPORTED_SPEC);
}

TEST_CASE("ordered composition and its dual-route exchange integral") {
  EmitterGuard down(csm_emitter_two_level(0.0, kG1));
  EmitterGuard up(csm_emitter_two_level(1.0, kG1));
  csm_complex dd{}, ud{}, ex{}, total{};
  double qerr = -1.0;
  REQUIRE(csm_s2_convolve(down.ptr, up.ptr, 0.0, 0.0, 0.0, 0.0, 0, &dd, &ud,
                          &ex, &total, &qerr) == CSM_OK);
  CHECK(close(dd, cx(2.0, -2.0) / kPi, 1e-13));
  CHECK(close(ud, cx(0.0, -8.0) / kPi, 1e-13));
  CHECK(close(ex, cx(-32.0, 16.0) / (5.0 * kPi), 1e-13));
  CHECK(close(total, -cx(22.0, 34.0) / (5.0 * kPi), 1e-13));
  CHECK(qerr == 0.0);

  csm_complex total_q{};
  REQUIRE(csm_s2_convolve(down.ptr, up.ptr, 0.0, 0.0, 0.0, 0.0, 1, nullptr,
                          nullptr, nullptr, &total_q, &qerr) == CSM_OK);
  CHECK(std::abs(lift(total_q) - lift(total)) <
        1e-6 * std::abs(lift(total)));
  CHECK(qerr > 0.0);

  EmitterGuard dicke(csm_emitter_dicke(2, 0.0, kG1));
  CHECK(csm_s2_convolve(down.ptr, dicke.ptr, 0.0, 0.0, 0.0, 0.0, 0, nullptr,
                        nullptr, nullptr, &total, nullptr) ==
        CSM_ERR_UNSUPPORTED_SPEC);
}

TEST_CASE("intermediate pair integral: closed form versus quadrature") {
  EmitterGuard a(csm_emitter_two_level(0.0, kG1));
  EmitterGuard b(csm_emitter_two_level(1.0, kG1));
  csm_complex value{};
  double error = -1.0;
  int evaluations = -1;
  REQUIRE(csm_intermediate_pair_integral(a.ptr, b.ptr, 0.0, 0, &value, &error,
                                         &evaluations) == CSM_OK);
  const cx ref = kPi * cx(1.0, -3.0) / 10.0;
  CHECK(close(value, ref, 1e-14));
  CHECK(evaluations == 0);

  csm_complex quad{};
  REQUIRE(csm_intermediate_pair_integral(a.ptr, b.ptr, 0.0, 1, &quad, &error,
                                         &evaluations) == CSM_OK);
  CHECK(std::abs(lift(quad) - ref) < 1e-8 * std::abs(ref));
  CHECK(evaluations > 0);
}

TEST_CASE("kernel pole report with bounded capacity") {
  ChainGuard chain(csm_chain_new(0));
  EmitterGuard dicke(csm_emitter_dicke(2, 1.0, kG1));
  REQUIRE(csm_chain_add(chain.ptr, dicke.ptr, 0.0) == CSM_OK);

  csm_complex locations[4] = {};
  int kinds[4] = {};
  int count = -1;
  REQUIRE(csm_locate_poles(chain.ptr, 0.0, 0.0, {0.0, 0.0}, 10.0, locations,
                           kinds, 4, &count) == CSM_OK);
  REQUIRE(count == 2);
  CHECK(close(locations[0], {2.0, -4.0}, 1e-14));
  CHECK(kinds[0] == 0);
  CHECK(close(locations[1], {2.0, -2.0}, 1e-14));
  CHECK(kinds[1] == 2);

  csm_complex one_loc[1] = {};
  int one_kind[1] = {};
  CHECK(csm_locate_poles(chain.ptr, 0.0, 0.0, {0.0, 0.0}, 10.0, one_loc,
                         one_kind, 1, &count) == CSM_ERR_INVALID_ARGUMENT);
  CHECK(count == 2);  // the report size is still communicated
}

TEST_CASE("coherent pulse handle: statistics, clusters and correlations") {
  csm_coherent* state =
      csm_coherent_new(0.0, std::sqrt(0.2), 0.0, 30.0, 0.0, kG1, 3);
  REQUIRE(state != nullptr);

  double weights[4] = {};
  double errors[4] = {};
  int count = 0;
  double nbar = 0.0;
  REQUIRE(csm_coherent_statistics(state, weights, errors, 4, &count, &nbar) ==
          CSM_OK);
  REQUIRE(count == 4);
  CHECK(nbar == doctest::Approx(0.2).epsilon(1e-12));
  double poisson = std::exp(-0.2);
  for (int n = 0; n < 4; ++n) {
    CHECK(std::abs(weights[n] - poisson) < 1e-6);
    poisson *= 0.2 / (n + 1);
  }
  CHECK(csm_coherent_statistics(state, weights, errors, 3, &count, &nbar) ==
        CSM_ERR_INVALID_ARGUMENT);

  // Scattered clusters are hard-core antibunched.
  const double coincident[2] = {5.0, 5.0};
  csm_complex cluster{};
  REQUIRE(csm_coherent_cluster(state, coincident, 2, &cluster, nullptr) ==
          CSM_OK);
  CHECK(std::abs(lift(cluster)) < 1e-12);

  const double unordered[2] = {1.0, 0.0};
  CHECK(csm_coherent_cluster(state, unordered, 2, &cluster, nullptr) ==
        CSM_ERR_UNORDERED_COORDINATES);

  // Full field is strongly bunched at resonance: g2 -> |2s - 1|^2 = 9.
  double g2 = 0.0;
  int flagged = -1;
  REQUIRE(csm_coherent_g2(state, 5.0, 5.0, &g2, &flagged) == CSM_OK);
  CHECK(g2 == doctest::Approx(9.0).epsilon(1e-2));
  CHECK(flagged == 0);

  // The full amplitude includes the displaced coherent part.
  const double xs[1] = {-2.0};
  csm_complex amp{};
  REQUIRE(csm_coherent_amplitude(state, xs, 1, &amp, nullptr) == CSM_OK);
  csm_complex c1{};
  REQUIRE(csm_coherent_cluster(state, xs, 1, &c1, nullptr) == CSM_OK);
  const cx alpha_bar = std::sqrt(0.2) / std::sqrt(30.0);
  const cx expected = std::exp(-0.1) * (alpha_bar + lift(c1));
  CHECK(close(amp, expected, 1e-13));

  csm_coherent_free(state);

  CHECK(csm_coherent_new(0.0, 1.0, 0.0, -5.0, 0.0, kG1, 2) == nullptr);
  CHECK(csm_coherent_new(0.0, 1.0, 0.0, 30.0, 0.0, kG1, 7) == nullptr);
  CHECK(std::strlen(csm_last_error()) > 0);
}

TEST_CASE("oracle JSON entry points round-trip through the interface") {
  nlohmann::json cfg;
  cfg["system"]["emitters"] = nlohmann::json::array(
      {{{"type", "two_level"}, {"omega", 0.0}, {"g", kG1}, {"position", 0.0}}});
  cfg["k_center"] = 0.0;
  cfg["discretization"] = {{"n_modes", 128},
                           {"bandwidth", 40.0},
                           {"sigma_p", 1.0},
                           {"x0", -6.0},
                           {"t_final", 12.0}};
  const std::string doc = cfg.dump();

  char* result = nullptr;
  REQUIRE(csm_oracle_s1_run(doc.c_str(), &result) == CSM_OK);
  REQUIRE(result != nullptr);
  const nlohmann::json parsed = nlohmann::json::parse(result);
  CHECK(parsed.at("kind").get<std::string>() == "one_photon_oracle");
  CHECK(parsed.at("support").size() > 0);
  csm_string_free(result);

  result = nullptr;
  CHECK(csm_oracle_s1_run("{ not json", &result) == CSM_ERR_INVALID_ARGUMENT);
  CHECK(result == nullptr);
  CHECK(csm_oracle_s1_run(nullptr, &result) == CSM_ERR_INVALID_ARGUMENT);
}

TEST_CASE("null handles are handled without crashing") {
  csm_emitter_free(nullptr);
  csm_chain_free(nullptr);
  csm_coherent_free(nullptr);
  csm_string_free(nullptr);

  csm_complex s{};
  CHECK(csm_s1_emitter(nullptr, 0.0, 0.0, &s, nullptr) ==
        CSM_ERR_INVALID_ARGUMENT);
  EmitterGuard atom(csm_emitter_two_level(0.0, kG1));
  CHECK(csm_s1_emitter(atom.ptr, 0.0, 0.0, nullptr, nullptr) ==
        CSM_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(csm_last_error()) > 0);
}
