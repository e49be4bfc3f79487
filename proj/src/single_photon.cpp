#include "chiral/single_photon.hpp"

#include <cmath>

namespace chiral {

namespace {

/// Pole proximity guard for composite denominators: compares |den| against
/// pole_guard times a linear energy scale so the guard keeps the dimension of
/// an energy distance.
void guard_denominator(const complex& den, double scale,
                       const Regularization& reg, bool* flagged) {
  if (std::abs(den) < reg.pole_guard * std::max(1.0, scale))
    raise_flag(flagged);
}

}  // namespace

complex s1_two_level(double p, const TwoLevel& spec, const Regularization& reg,
                     bool* flagged) {
  return response_functions(spec, reg).s(p, flagged);
}

complex s1_dicke(double p, const Dicke& spec, const Regularization& reg,
                 bool* flagged) {
  return response_functions(spec, reg).s(p, flagged);
}

complex s1_non_rwa(double p, const NonRwaTwoLevel& spec) {
  (void)p;
  validate_spec(spec);
  return complex{1.0, 0.0};
}

complex s1_sigma(double p, const Sigma& spec, const Regularization& reg,
                 bool* flagged) {
  validate_spec(spec);
  TwoLevel effective{spec.eps2 - spec.eps1, spec.g21};
  return s1_two_level(p, effective, reg, flagged);
}

complex s1_v(double p, const Vscheme& spec, const Regularization& reg,
             bool* flagged) {
  validate_spec(spec);
  // The raw numerator and denominator are complex conjugates and share a real
  // root exactly when one branch decouples or the excited levels are
  // degenerate.  Those cases reduce to a two-level emitter; delegating
  // performs the cancellation analytically instead of evaluating 0/0.
  if (spec.g21 == 0.0)
    return s1_two_level(p, TwoLevel{spec.eps3 - spec.eps1, spec.g31}, reg,
                        flagged);
  if (spec.g31 == 0.0)
    return s1_two_level(p, TwoLevel{spec.eps2 - spec.eps1, spec.g21}, reg,
                        flagged);
  if (spec.eps2 == spec.eps3) {
    const double g_sum =
        std::sqrt(spec.g21 * spec.g21 + spec.g31 * spec.g31);
    return s1_two_level(p, TwoLevel{spec.eps2 - spec.eps1, g_sum}, reg,
                        flagged);
  }
  const double x2 = p + spec.eps1 - spec.eps2;
  const double x3 = p + spec.eps1 - spec.eps3;
  const double a = kPi * spec.g21 * spec.g21;
  const double b = kPi * spec.g31 * spec.g31;
  const complex num = (x2 - kImag * a) * (x3 - kImag * b) + a * b;
  const complex den = (x2 + kImag * a) * (x3 + kImag * b) + a * b;
  guard_denominator(den, std::max(std::abs(x2), std::abs(x3)), reg, flagged);
  return num / den;
}

VDiagonalization v_diagonalization(const Vscheme& spec) {
  validate_spec(spec);
  const complex a{spec.eps2, -kPi * spec.g21 * spec.g21};
  const complex b{spec.eps3, -kPi * spec.g31 * spec.g31};
  const complex c = kPi * kPi * spec.g21 * spec.g21 * spec.g31 * spec.g31;
  const complex rad = std::sqrt(0.25 * (a - b) * (a - b) - c);
  VDiagonalization out;
  out.lambda2 = 0.5 * (a + b) + rad;
  out.lambda3 = 0.5 * (a + b) - rad;
  const complex dl = out.lambda2 - out.lambda3;
  if (std::abs(dl) == 0.0)
    throw Error(ErrorCode::InvalidArgument,
                "V-scheme excited doublet is degenerate after dressing; the "
                "mixing angle is undefined");
  const complex cos_phi = (a - b) / dl;
  const complex sin_phi = -2.0 * kImag * kPi * spec.g21 * spec.g31 / dl;
  out.phi = -kImag * std::log(cos_phi + kImag * sin_phi);
  out.xi[0][0] = out.xi[1][1] = std::cos(0.5 * out.phi);
  out.xi[0][1] = std::sin(0.5 * out.phi);
  out.xi[1][0] = -out.xi[0][1];
  return out;
}

S1LambdaResult s1_lambda(double p, const Lambda& spec, int incoming_channel,
                         const Regularization& reg, bool* flagged) {
  validate_spec(spec);
  if (incoming_channel != 1 && incoming_channel != 2)
    throw Error(ErrorCode::InvalidArgument,
                "Lambda incoming channel must be 1 or 2");
  const double g2 = spec.g31 * spec.g31 + spec.g32 * spec.g32;
  const std::array<double, 2> eps = {spec.eps1, spec.eps2};
  const std::array<double, 2> g = {spec.g31, spec.g32};

  S1LambdaResult result;
  result.incoming_channel = incoming_channel;
  for (int in = 0; in < 2; ++in) {
    const complex den = complex{p + eps[in] - spec.eps3, kPi * g2};
    guard_denominator(den, std::abs(p + eps[in] - spec.eps3), reg, flagged);
    for (int out = 0; out < 2; ++out) {
      const complex kronecker = (out == in) ? 1.0 : 0.0;
      result.channels[out][in] =
          kronecker - 2.0 * kPi * kImag * g[out] * g[in] / den;
    }
  }
  const int in0 = incoming_channel - 1;
  for (int out = 0; out < 2; ++out)
    result.p_out[out] = p + eps[in0] - eps[out];
  result.elastic = result.channels[in0][in0];
  return result;
}

complex s1_concentrated_pair(double p, const TwoLevel& a, const TwoLevel& b,
                             const Regularization& reg, bool* flagged) {
  validate_spec(a);
  validate_spec(b);
  if (a.Omega != b.Omega)
    throw Error(ErrorCode::UnequalDetunings,
                "equal-detuning concentrated pair requires Omega1 == Omega2; "
                "use the general co-located form instead");
  TwoLevel effective{a.Omega, std::sqrt(a.g * a.g + b.g * b.g)};
  return s1_two_level(p, effective, reg, flagged);
}

complex s1_concentrated_pair_general(double p, const TwoLevel& a,
                                     const TwoLevel& b,
                                     const Regularization& reg,
                                     bool* flagged) {
  validate_spec(a);
  validate_spec(b);
  // Numerator and denominator share a real root when either partner
  // decouples or the detunings coincide; both cases reduce exactly to a
  // single two-level emitter, so delegate instead of evaluating 0/0.
  if (a.g == 0.0) return s1_two_level(p, b, reg, flagged);
  if (b.g == 0.0) return s1_two_level(p, a, reg, flagged);
  if (a.Omega == b.Omega) {
    TwoLevel effective{a.Omega, std::sqrt(a.g * a.g + b.g * b.g)};
    return s1_two_level(p, effective, reg, flagged);
  }
  const double r = (p - a.Omega) * (p - b.Omega);
  const double n = a.g * a.g * (p - b.Omega) + b.g * b.g * (p - a.Omega);
  const complex den = complex{r, kPi * n};
  guard_denominator(den, std::max(std::abs(p - a.Omega), std::abs(p - b.Omega)),
                    reg, flagged);
  return complex{r, -kPi * n} / den;
}

complex s1_emitter(double p, const EmitterSpec& spec, const Regularization& reg,
                   bool* flagged) {
  return std::visit(
      [&](const auto& s) -> complex {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TwoLevel>) {
          return s1_two_level(p, s, reg, flagged);
        } else if constexpr (std::is_same_v<T, Dicke>) {
          return s1_dicke(p, s, reg, flagged);
        } else if constexpr (std::is_same_v<T, NonRwaTwoLevel>) {
          return s1_non_rwa(p, s);
        } else if constexpr (std::is_same_v<T, Vscheme>) {
          return s1_v(p, s, reg, flagged);
        } else if constexpr (std::is_same_v<T, Sigma>) {
          return s1_sigma(p, s, reg, flagged);
        } else {
          throw Error(ErrorCode::UnsupportedSpec,
                      "Lambda emitter has a 2x2 channel matrix, not a scalar "
                      "amplitude; evaluate it with s1_lambda");
        }
      },
      spec);
}

complex s1_chain(double p, const EmitterChain& chain, const Regularization& reg,
                 bool* flagged) {
  const EmitterChain sorted = validate_chain(chain);
  if (sorted.concentrated) {
    if (sorted.entries.size() == 1)
      return s1_emitter(p, sorted.entries[0].spec, reg, flagged);
    if (sorted.entries.size() == 2) {
      const auto* a = std::get_if<TwoLevel>(&sorted.entries[0].spec);
      const auto* b = std::get_if<TwoLevel>(&sorted.entries[1].spec);
      if (a != nullptr && b != nullptr)
        return s1_concentrated_pair_general(p, *a, *b, reg, flagged);
    }
    throw Error(ErrorCode::UnsupportedSpec,
                "concentrated chains are supported for a single emitter or a "
                "pair of two-level emitters");
  }
  complex product{1.0, 0.0};
  for (const auto& entry : sorted.entries)
    product *= s1_emitter(p, entry.spec, reg, flagged);
  return product;
}

}  // namespace chiral
