#include "chiral/two_photon.hpp"

#include <algorithm>
#include <cmath>

#include "chiral/core.hpp"
#include "chiral/single_photon.hpp"

namespace chiral {

namespace {

struct AtomParams {
  complex alpha{};
  double g2 = 0.0;     // g^2
  double gamma = 0.0;  // pi g^2
  double Omega = 0.0;
};

AtomParams atom_params(const TwoLevel& spec) {
  validate_spec(spec);
  AtomParams p;
  p.g2 = spec.g * spec.g;
  p.gamma = kPi * p.g2;
  p.alpha = complex{spec.Omega, -p.gamma};
  p.Omega = spec.Omega;
  return p;
}

void guard(const complex& den, double scale, const Regularization& reg,
           bool* flagged) {
  if (std::abs(den) < reg.pole_guard * std::max(1.0, scale))
    raise_flag(flagged);
}

complex m_of(const complex& nu, const AtomParams& a, const Regularization& reg,
             bool* flagged) {
  const complex den = nu - a.alpha;
  guard(den, std::abs(nu), reg, flagged);
  return 1.0 / den;
}

complex s_of(const complex& nu, const AtomParams& a, const Regularization& reg,
             bool* flagged) {
  return 1.0 - 2.0 * kPi * kImag * a.g2 * m_of(nu, a, reg, flagged);
}

/// Connected kernel of one two-level emitter with free external legs
/// (nu1, nu2 outgoing; nu3, nu4 incoming; E = nu3 + nu4).
complex t_single(const complex& nu1, const complex& nu2, const complex& nu3,
                 const complex& nu4, const AtomParams& a,
                 const Regularization& reg, bool* flagged) {
  const complex E = nu3 + nu4;
  return 4.0 * kPi * a.g2 * a.g2 * (E - 2.0 * a.alpha) *
         m_of(nu1, a, reg, flagged) * m_of(nu2, a, reg, flagged) *
         m_of(nu3, a, reg, flagged) * m_of(nu4, a, reg, flagged);
}

complex dicke_kernel(const complex& E, double Delta, double DeltaPrime,
                     const Dicke& spec, const Regularization& reg,
                     bool* flagged, bool simplified_bracket) {
  const DerivedParams dp = derive_params(spec);
  const complex x = 0.5 * E - dp.alpha;
  const complex y = 0.5 * E - *dp.alpha_collective;
  const double g2 = spec.g * spec.g;
  const double scale =
      std::max({1.0, std::abs(x), std::abs(Delta), std::abs(DeltaPrime)});

  complex bracket;
  if (simplified_bracket) {
    guard(y, scale, reg, flagged);
    bracket = (0.5 * E) / y;
  } else if (spec.M == 1) {
    bracket = 1.0;  // the (M - 1) term is absent; avoids 0/0 at E = 2 Omega
  } else {
    guard(y, scale, reg, flagged);
    bracket = static_cast<double>(spec.M) -
              static_cast<double>(spec.M - 1) * x / y;
  }

  for (const complex& factor :
       {x - Delta, x + Delta, x - DeltaPrime, x + DeltaPrime})
    guard(factor, scale, reg, flagged);
  const complex den =
      (x * x - Delta * Delta) * (x * x - DeltaPrime * DeltaPrime);
  return 8.0 * kPi * g2 * g2 * static_cast<double>(spec.M) * x * bracket / den;
}

complex two_atoms_kernel(const complex& p1, const complex& p2,
                         const complex& k1, const complex& k2,
                         const AtomParams& down, const AtomParams& up,
                         const Regularization& reg, bool* flagged) {
  // A transparent partner reduces the pair kernel exactly to the single-atom
  // kernel; the raw three-term sum would instead multiply the vanishing
  // coupling into the partner's bare-resonance pole (0 * inf at exact
  // resonance).
  if (down.g2 == 0.0 && up.g2 == 0.0) return complex{0.0, 0.0};
  if (up.g2 == 0.0) return t_single(p1, p2, k1, k2, down, reg, flagged);
  if (down.g2 == 0.0) return t_single(p1, p2, k1, k2, up, reg, flagged);

  const complex E = p1 + p2;
  const complex pair_pole = E - down.alpha - up.alpha;
  guard(pair_pole, std::abs(E), reg, flagged);

  // (s - 1) evaluated through the response so every factor shares the same
  // dressed pole and guard.
  auto s_minus_1 = [&](const complex& nu, const AtomParams& a) {
    return -2.0 * kPi * kImag * a.g2 * m_of(nu, a, reg, flagged);
  };

  const complex t1 = (E - 2.0 * up.alpha) / (4.0 * kPi * kImag) *
                     (s_of(p1, down, reg, flagged) * m_of(p1, up, reg, flagged)) *
                     (s_of(p2, down, reg, flagged) * m_of(p2, up, reg, flagged)) *
                     s_minus_1(k1, up) * s_minus_1(k2, up);
  const complex t2 = (E - 2.0 * down.alpha) / (4.0 * kPi * kImag) *
                     (m_of(k1, down, reg, flagged) * s_of(k1, up, reg, flagged)) *
                     (m_of(k2, down, reg, flagged) * s_of(k2, up, reg, flagged)) *
                     s_minus_1(p1, down) * s_minus_1(p2, down);
  const complex t3 = -1.0 / (2.0 * kPi * kImag) * s_minus_1(p1, down) *
                     s_minus_1(p2, down) * s_minus_1(k1, up) *
                     s_minus_1(k2, up) / pair_pole;
  return -4.0 * kImag * (t1 + t2 + t3);
}

complex closed_pair_integral(const complex& E, const AtomParams& a,
                             const AtomParams& b) {
  return -4.0 * kPi * kImag /
         ((E - a.alpha - b.alpha) * (E - 2.0 * a.alpha) * (E - 2.0 * b.alpha));
}

/// Real-axis integration window covering every dressed resonance of the two
/// emitters with a 50-half-width margin, extended to straddle zero so the
/// inverse-quartic tail maps stay finite.
std::pair<double, double> pair_window(double E, const AtomParams& a,
                                      const AtomParams& b) {
  const double gm = std::max({a.gamma, b.gamma, 1e-2});
  double lo = std::min({0.5 * E, a.Omega, E - a.Omega, b.Omega, E - b.Omega});
  double hi = std::max({0.5 * E, a.Omega, E - a.Omega, b.Omega, E - b.Omega});
  lo -= 50.0 * gm;
  hi += 50.0 * gm;
  lo = std::min(lo, -10.0 * gm);
  hi = std::max(hi, 10.0 * gm);
  return {lo, hi};
}

}  // namespace

complex t2_dicke(const TwoPhotonKinematics& kin, const Dicke& spec,
                 const Regularization& reg, bool* flagged) {
  return dicke_kernel(complex{kin.E, 0.0}, kin.Delta, kin.DeltaPrime, spec, reg,
                      flagged, /*simplified_bracket=*/false);
}

DickeKernelForms t2_dicke_forms(const TwoPhotonKinematics& kin,
                                const Dicke& spec, const Regularization& reg,
                                bool* flagged) {
  DickeKernelForms forms;
  forms.bracket_form = dicke_kernel(complex{kin.E, 0.0}, kin.Delta,
                                    kin.DeltaPrime, spec, reg, flagged, false);
  forms.simplified_form = dicke_kernel(complex{kin.E, 0.0}, kin.Delta,
                                       kin.DeltaPrime, spec, reg, flagged, true);
  forms.difference = forms.bracket_form - forms.simplified_form;
  return forms;
}

complex t2_two_atoms_irred(const TwoPhotonKinematics& kin,
                           const TwoLevel& downstream, const TwoLevel& upstream,
                           const Regularization& reg, bool* flagged) {
  return two_atoms_kernel(complex{kin.p1, 0.0}, complex{kin.p2, 0.0},
                          complex{kin.k1, 0.0}, complex{kin.k2, 0.0},
                          atom_params(downstream), atom_params(upstream), reg,
                          flagged);
}

complex t2_dicke_continued(complex E, double Delta, double DeltaPrime,
                           const Dicke& spec, const Regularization& reg) {
  return dicke_kernel(E, Delta, DeltaPrime, spec, reg, nullptr, false);
}

complex t2_two_atoms_continued(complex E, double Delta, double DeltaPrime,
                               const TwoLevel& downstream,
                               const TwoLevel& upstream,
                               const Regularization& reg) {
  const complex half = 0.5 * E;
  return two_atoms_kernel(half + DeltaPrime, half - DeltaPrime, half + Delta,
                          half - Delta, atom_params(downstream),
                          atom_params(upstream), reg, nullptr);
}

S2Decomposition s2_full(const EmitterChain& system, const Regularization& reg) {
  const EmitterChain sorted = validate_chain(system);
  S2Decomposition out;
  out.shell_tol = 1e-12;

  if (sorted.entries.size() == 1) {
    Dicke effective;
    if (const auto* tl = std::get_if<TwoLevel>(&sorted.entries[0].spec)) {
      effective = Dicke{1, tl->Omega, tl->g};
    } else if (const auto* dk = std::get_if<Dicke>(&sorted.entries[0].spec)) {
      effective = *dk;
    } else {
      throw Error(ErrorCode::UnsupportedSpec,
                  "two-photon kernels cover two-level emitters, Dicke "
                  "clusters and two-atom chains");
    }
    out.elastic = [effective, reg](double p, bool* flagged) {
      return s1_dicke(p, effective, reg, flagged);
    };
    out.irreducible_kernel = [effective, reg](const TwoPhotonKinematics& kin,
                                              bool* flagged) {
      return t2_dicke(kin, effective, reg, flagged);
    };
    return out;
  }

  if (sorted.entries.size() == 2 && !sorted.concentrated) {
    const auto* up = std::get_if<TwoLevel>(&sorted.entries[0].spec);
    const auto* down = std::get_if<TwoLevel>(&sorted.entries[1].spec);
    if (up == nullptr || down == nullptr)
      throw Error(ErrorCode::UnsupportedSpec,
                  "two-emitter two-photon kernels need two two-level atoms");
    const TwoLevel upstream = *up;
    const TwoLevel downstream = *down;
    out.elastic = [upstream, downstream, reg](double p, bool* flagged) {
      return s1_two_level(p, upstream, reg, flagged) *
             s1_two_level(p, downstream, reg, flagged);
    };
    out.irreducible_kernel = [upstream, downstream, reg](
                                 const TwoPhotonKinematics& kin, bool* flagged) {
      return t2_two_atoms_irred(kin, downstream, upstream, reg, flagged);
    };
    return out;
  }

  throw Error(ErrorCode::UnsupportedSpec,
              "two-photon transmission is implemented for a single emitter "
              "or two separated two-level atoms");
}

IntegralValue intermediate_pair_integral(double E, const TwoLevel& a,
                                         const TwoLevel& b, IntegralRoute route,
                                         const QuadratureOptions& opts) {
  const AtomParams pa = atom_params(a);
  const AtomParams pb = atom_params(b);
  IntegralValue out;
  if (route == IntegralRoute::ClosedForm) {
    out.value = closed_pair_integral(complex{E, 0.0}, pa, pb);
    return out;
  }
  const auto [lo, hi] = pair_window(E, pa, pb);
  Regularization no_guard;
  no_guard.pole_guard = 0.0;
  const QuadratureResult res = integrate_line_tail4(
      [&](double k) {
        return m_of(complex{k, 0.0}, pa, no_guard, nullptr) *
               m_of(complex{E - k, 0.0}, pa, no_guard, nullptr) *
               m_of(complex{k, 0.0}, pb, no_guard, nullptr) *
               m_of(complex{E - k, 0.0}, pb, no_guard, nullptr);
      },
      lo, hi, opts);
  out.value = res.value;
  out.error = res.error;
  out.evaluations = res.evaluations;
  return out;
}

ConvolutionTerms s2_convolve(const TwoLevel& downstream,
                             const TwoLevel& upstream,
                             const TwoPhotonKinematics& kin,
                             IntegralRoute route, const Regularization& reg,
                             bool* flagged) {
  const AtomParams a = atom_params(downstream);
  const AtomParams b = atom_params(upstream);
  const complex p1{kin.p1, 0.0}, p2{kin.p2, 0.0};
  const complex k1{kin.k1, 0.0}, k2{kin.k2, 0.0};
  const complex E{kin.E, 0.0};

  ConvolutionTerms terms;
  terms.downstream_dressed = s_of(p1, a, reg, flagged) *
                             s_of(p2, a, reg, flagged) *
                             t_single(p1, p2, k1, k2, b, reg, flagged);
  terms.upstream_dressed = s_of(k1, b, reg, flagged) *
                           s_of(k2, b, reg, flagged) *
                           t_single(p1, p2, k1, k2, a, reg, flagged);

  if (a.g2 == 0.0 || b.g2 == 0.0) {
    terms.exchange = 0.0;  // one emitter is transparent: nothing to exchange
  } else {
    const complex bracket_down = 4.0 * kPi * a.g2 * a.g2 * (E - 2.0 * a.alpha) *
                                 m_of(p1, a, reg, flagged) *
                                 m_of(p2, a, reg, flagged);
    const complex bracket_up = 4.0 * kPi * b.g2 * b.g2 * (E - 2.0 * b.alpha) *
                               m_of(k1, b, reg, flagged) *
                               m_of(k2, b, reg, flagged);
    const IntegralValue mid = intermediate_pair_integral(
        kin.E, downstream, upstream, route, QuadratureOptions{});
    terms.exchange = 0.5 * kImag * bracket_down * bracket_up * mid.value;
    terms.quadrature_error =
        0.5 * std::abs(bracket_down * bracket_up) * mid.error;
  }
  terms.total =
      terms.downstream_dressed + terms.upstream_dressed + terms.exchange;
  return terms;
}

PoleReport locate_poles(const EmitterChain& system, double Delta,
                        double DeltaPrime, complex window_center,
                        double window_radius) {
  const EmitterChain sorted = validate_chain(system);
  std::vector<Pole> all;
  auto add_single_photon = [&](const complex& alpha) {
    for (double d : {Delta, DeltaPrime}) {
      all.push_back({2.0 * alpha + 2.0 * d, PoleKind::SinglePhoton});
      all.push_back({2.0 * alpha - 2.0 * d, PoleKind::SinglePhoton});
    }
  };

  if (sorted.entries.size() == 1) {
    const DerivedParams dp = derive_params(sorted.entries[0].spec);
    if (const auto* dk = std::get_if<Dicke>(&sorted.entries[0].spec)) {
      add_single_photon(dp.alpha);
      if (dk->M >= 2)
        all.push_back({2.0 * *dp.alpha_collective, PoleKind::Collective});
    } else if (std::get_if<TwoLevel>(&sorted.entries[0].spec) != nullptr) {
      add_single_photon(dp.alpha);
    } else {
      throw Error(ErrorCode::UnsupportedSpec,
                  "pole enumeration covers two-level emitters, Dicke "
                  "clusters and two-atom chains");
    }
  } else if (sorted.entries.size() == 2 && !sorted.concentrated) {
    const auto* up = std::get_if<TwoLevel>(&sorted.entries[0].spec);
    const auto* down = std::get_if<TwoLevel>(&sorted.entries[1].spec);
    if (up == nullptr || down == nullptr)
      throw Error(ErrorCode::UnsupportedSpec,
                  "pole enumeration for two emitters needs two-level atoms");
    const complex a_up = derive_params(*up).alpha;
    const complex a_down = derive_params(*down).alpha;
    add_single_photon(a_up);
    add_single_photon(a_down);
    all.push_back({a_up + a_down, PoleKind::PairBound});
  } else {
    throw Error(ErrorCode::UnsupportedSpec,
                "pole enumeration is implemented for a single emitter or two "
                "separated two-level atoms");
  }

  PoleReport report;
  for (const Pole& pole : all) {
    if (std::abs(pole.location - window_center) > window_radius) continue;
    const bool seen =
        std::any_of(report.poles.begin(), report.poles.end(),
                    [&](const Pole& p) { return p.location == pole.location; });
    if (!seen) report.poles.push_back(pole);
  }
  std::sort(report.poles.begin(), report.poles.end(),
            [](const Pole& a, const Pole& b) {
              if (a.location.real() != b.location.real())
                return a.location.real() < b.location.real();
              if (a.location.imag() != b.location.imag())
                return a.location.imag() < b.location.imag();
              return static_cast<int>(a.kind) < static_cast<int>(b.kind);
            });
  return report;
}

LambdaKernel t2_lambda_kernel(double nu1, double nu2, double nu3, double nu4,
                              double omega, const Lambda& spec,
                              const Regularization& reg, bool* flagged) {
  validate_spec(spec);
  const double g2 = spec.g31 * spec.g31 + spec.g32 * spec.g32;
  const std::array<double, 2> g = {spec.g31, spec.g32};
  const std::array<double, 2> eps = {spec.eps1, spec.eps2};

  auto vertex = [&](double out_leg, double in_leg) {
    const double scale = std::max(
        {1.0, std::abs(omega), std::abs(out_leg), std::abs(in_leg)});
    const complex left = complex{omega - spec.eps3 - out_leg, kPi * g2};
    const complex right = complex{omega - spec.eps3 - in_leg, kPi * g2};
    guard(left, scale, reg, flagged);
    guard(right, scale, reg, flagged);
    complex middle = 0.0;
    for (int mid = 0; mid < 2; ++mid) {
      const complex den = complex{omega - eps[mid] - out_leg - in_leg, 0.0};
      guard(den, scale, reg, flagged);
      middle += g[mid] * g[mid] / den;
    }
    std::array<std::array<complex, 2>, 2> t{};
    const complex chain = middle / (left * right);
    for (int c_out = 0; c_out < 2; ++c_out)
      for (int c_in = 0; c_in < 2; ++c_in)
        t[c_out][c_in] = g[c_out] * g[c_in] * chain;
    return t;
  };

  LambdaKernel kernel;
  kernel.raw = vertex(nu2, nu3);
  const auto v2 = vertex(nu1, nu3);
  const auto v3 = vertex(nu2, nu4);
  const auto v4 = vertex(nu1, nu4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      kernel.symmetrized[i][j] =
          0.25 * (kernel.raw[i][j] + v2[i][j] + v3[i][j] + v4[i][j]);
  kernel.det_raw = kernel.raw[0][0] * kernel.raw[1][1] -
                   kernel.raw[0][1] * kernel.raw[1][0];
  return kernel;
}

}  // namespace chiral
