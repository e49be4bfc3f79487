#include "chiral/coherent.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "chiral/core.hpp"
#include "chiral/quadrature.hpp"

namespace chiral {

namespace {

/// Precomputed pulse/emitter quantities shared by the output-state
/// evaluators.  z = i (k - a) with the dressed pole a = Omega - i pi g^2, so
/// exp(z * d) carries both the propagation phase and the e^{-gamma d} decay
/// of every branch factor.
struct PulseContext {
  double L = 0.0;
  double k = 0.0;
  complex alpha_bar{};
  double nbar = 0.0;
  complex z{};
  complex A{};
  double gamma = 0.0;
  bool near_pole = false;
};

PulseContext make_context(const CoherentOutput& out) {
  PulseContext c;
  c.L = out.input.box.L;
  c.k = out.input.k;
  c.alpha_bar = out.input.alpha_bar();
  c.nbar = out.input.nbar();
  const double g2 = out.emitter.g * out.emitter.g;
  c.gamma = kPi * g2;
  const complex kma = complex{c.k - out.emitter.Omega, c.gamma};
  c.z = kImag * kma;
  c.near_pole = std::abs(kma) < out.reg.pole_guard;
  c.A = (g2 == 0.0) ? complex{0.0, 0.0}
                    : -2.0 * kPi * kImag * g2 * c.alpha_bar / kma;
  return c;
}

void check_ordered(std::span<const double> xs) {
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] < xs[i - 1])
      throw Error(ErrorCode::UnorderedCoordinates,
                  "cluster coordinates must be sorted ascending");
  }
}

/// Branch product for sorted coordinates with at most one entry below -L/2
/// and none beyond L/2.
complex branch_value(const PulseContext& c, std::span<const double> xs) {
  const double half = 0.5 * c.L;
  complex prod{1.0, 0.0};
  std::size_t start = 0;
  if (xs[0] < -half) {
    prod *= std::exp(-c.z * (xs[0] + half));
    const double next = xs.size() > 1 ? xs[1] : half;
    prod *= complex{1.0, 0.0} - std::exp(c.z * (next + half));
    start = 1;
  }
  for (std::size_t j = start; j < xs.size(); ++j) {
    const double gap = (j + 1 < xs.size() ? xs[j + 1] : half) - xs[j];
    prod *= complex{1.0, 0.0} - std::exp(c.z * gap);
  }
  return prod;
}

complex cluster_amplitude(const PulseContext& c, std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) return complex{1.0, 0.0};
  const double half = 0.5 * c.L;
  if (xs.back() > half) return complex{0.0, 0.0};  // beyond the causal front
  std::size_t below = 0;
  for (double x : xs) below += (x < -half) ? 1 : 0;
  if (below >= 2) return complex{0.0, 0.0};
  if (c.A == complex{0.0, 0.0}) return complex{0.0, 0.0};

  complex value{1.0, 0.0};
  double xsum = 0.0;
  for (double x : xs) {
    value *= c.A;
    xsum += x;
  }
  value *= std::exp(kImag * c.k * xsum);
  return value * branch_value(c, xs);
}

/// Displaced cluster expansion without the exp(-N/2) prefactor.
complex unnormalized_amplitude(const PulseContext& c, int n,
                               std::span<const double> xs) {
  const double half = 0.5 * c.L;
  complex sum{0.0, 0.0};
  std::array<double, 8> cluster_xs{};
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    complex complement{1.0, 0.0};
    int m = 0;
    bool zero = false;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        cluster_xs[m++] = xs[i];
      } else {
        if (xs[i] < -half || xs[i] > half) {
          zero = true;  // beta vanishes outside the box
          break;
        }
        complement *= c.alpha_bar * std::exp(kImag * c.k * xs[i]);
      }
    }
    if (zero) continue;
    sum += complement *
           cluster_amplitude(c, std::span<const double>(cluster_xs.data(),
                                                        static_cast<std::size_t>(m)));
  }
  return sum;
}

/// Integration panel with edges pinned to the box rear/front where the
/// integrands lose smoothness.  `tail` marks panels behind the pulse rear.
struct Panel {
  double a = 0.0;
  double b = 0.0;
  bool tail = false;
};

/// Panels covering the re-emission tail [-L/2 - 10/gamma, -L/2] and the
/// pulse box [-L/2, L/2].
std::vector<Panel> build_panels(const PulseContext& c) {
  const double half = 0.5 * c.L;
  const double tail = c.gamma > 0.0 ? 10.0 / c.gamma : 0.0;
  const double target = c.gamma > 0.0 ? std::min(2.0 / c.gamma, 0.25 * c.L)
                                      : 0.125 * c.L;
  std::vector<Panel> panels;
  auto add_region = [&](double a, double b, bool is_tail) {
    if (b <= a) return;
    const int count =
        std::max(1, static_cast<int>(std::ceil((b - a) / target)));
    const double width = (b - a) / count;
    for (int p = 0; p < count; ++p)
      panels.push_back({a + p * width, a + (p + 1) * width, is_tail});
  };
  add_region(-half - tail, -half, true);
  add_region(-half, half, false);
  return panels;
}

/// n-photon weight (1/n!) \int |psi_n|^2, evaluated directly over the
/// ordered sector x_1 <= ... <= x_n.  |psi_n|^2 has derivative kinks across
/// the coordinate diagonals, so a tensor-product rule over the cube only
/// converges algebraically; instead coordinates are assigned to ascending
/// panels and coordinates sharing a panel use the nested-interval (Duffy)
/// substitution x_r = x_{r-1} + (b - x_{r-1}) u_r, which maps the panel
/// simplex onto a cube where the integrand is smooth and Gauss-Legendre
/// keeps its spectral accuracy.  Assignments with two or more coordinates
/// behind the pulse rear are skipped: at most one photon of a cluster trails
/// the rear, so the amplitude vanishes there identically.
double weight_integral(const PulseContext& c, const std::vector<Panel>& panels,
                       int order, int n) {
  if (n == 0) return std::exp(-c.nbar);

  const GaussLegendreRule rule = gl_rule(order);
  const std::size_t q = rule.nodes.size();
  std::vector<double> u01(q), w01(q);
  for (std::size_t i = 0; i < q; ++i) {
    u01[i] = 0.5 * (1.0 + rule.nodes[i]);
    w01[i] = 0.5 * rule.weights[i];
  }

  const complex U_front = std::exp(c.z * (0.5 * c.L));   // exp(z L/2)
  const complex U_back = std::exp(-c.z * (0.5 * c.L));   // exp(-z L/2)
  std::array<complex, 5> A_pow;
  A_pow[0] = 1.0;
  for (int m = 1; m <= 4; ++m) A_pow[m] = A_pow[m - 1] * c.A;

  std::array<int, 4> assign{};   // panel of each sorted coordinate
  std::array<double, 4> xs{};
  std::array<complex, 4> E{};    // exp(z x) per coordinate
  std::array<char, 4> inb{};     // coordinate inside the box?
  std::array<int, 4> sel{};

  // Cluster amplitude of the selected coordinates modulo the global
  // exp(i k sum x) phase shared by every displaced-cluster term: gaps become
  // ratios of the cached exponentials.
  auto cluster = [&](int m) -> complex {
    if (m == 0) return complex{1.0, 0.0};
    if (c.A == complex{0.0, 0.0}) return complex{0.0, 0.0};
    complex val = A_pow[m];
    int start = 0;
    if (!inb[sel[0]]) {
      val *= U_back / E[sel[0]];
      val *= complex{1.0, 0.0} -
             (m > 1 ? E[sel[1]] * U_front : U_front * U_front);
      start = 1;
    }
    for (int r = start; r < m; ++r) {
      const complex ahead =
          (r + 1 < m) ? E[sel[r + 1]] / E[sel[r]] : U_front / E[sel[r]];
      val *= complex{1.0, 0.0} - ahead;
    }
    return val;
  };

  auto psi_norm2 = [&]() -> double {
    complex sum{0.0, 0.0};
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      int m = 0;
      bool zero = false;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          sel[m++] = i;
        } else if (!inb[i]) {
          zero = true;  // beta vanishes outside the box
          break;
        }
      }
      if (zero) continue;
      complex term = cluster(m);
      for (int r = 0; r < n - m; ++r) term *= c.alpha_bar;
      sum += term;
    }
    return std::norm(sum);
  };

  double total = 0.0;
  // Quadrature nodes for the current panel assignment; coordinates sharing
  // a panel chain through the nested-interval substitution.
  auto eval_nodes = [&](auto&& self, int r, double wprod) -> void {
    if (r == n) {
      total += wprod * psi_norm2();
      return;
    }
    const Panel& panel = panels[static_cast<std::size_t>(assign[r])];
    const double base =
        (r > 0 && assign[r - 1] == assign[r]) ? xs[r - 1] : panel.a;
    const double len = panel.b - base;
    inb[r] = panel.tail ? 0 : 1;
    for (std::size_t i = 0; i < q; ++i) {
      xs[r] = base + len * u01[i];
      E[r] = std::exp(c.z * xs[r]);
      self(self, r + 1, wprod * len * w01[i]);
    }
  };

  // Ascending panel assignments with at most one coordinate behind the rear.
  auto choose = [&](auto&& self, int depth, int start, int behind) -> void {
    if (depth == n) {
      eval_nodes(eval_nodes, 0, 1.0);
      return;
    }
    for (int p = start; p < static_cast<int>(panels.size()); ++p) {
      const bool tail_panel = panels[static_cast<std::size_t>(p)].tail;
      if (tail_panel && behind >= 1) continue;
      assign[depth] = p;
      self(self, depth + 1, p, behind + (tail_panel ? 1 : 0));
    }
  };
  choose(choose, 0, 0, 0);
  return total * std::exp(-c.nbar);
}

}  // namespace

double broadened_delta(double q, const WaveguideBox& box) {
  if (box.L <= 0.0)
    throw Error(ErrorCode::InvalidArgument, "box length must be positive");
  if (q == 0.0) return box.L / (2.0 * kPi);
  return std::sin(0.5 * q * box.L) / (kPi * q);
}

CoherentOutput make_coherent_output(const CoherentInput& input,
                                    const TwoLevel& emitter, int n_max,
                                    const Regularization& reg) {
  if (input.box.L <= 0.0)
    throw Error(ErrorCode::InvalidArgument, "box length must be positive");
  if (n_max < 0)
    throw Error(ErrorCode::InvalidArgument, "n_max must be non-negative");
  if (n_max > 4)
    throw Error(ErrorCode::TruncationExceeded,
                "output-state truncation supports at most four photons");
  validate_spec(EmitterSpec{emitter});
  const double gamma = kPi * emitter.g * emitter.g;
  if (gamma * (input.box.L + 10.0) > 600.0)
    throw Error(ErrorCode::InvalidArgument,
                "pulse is too many linewidths long for stable closed-form "
                "evaluation");
  return CoherentOutput{input, emitter, n_max, reg};
}

complex beta_amplitude(int n, std::span<const double> xs,
                       const CoherentOutput& out, bool* flagged) {
  if (n < 0 || static_cast<std::size_t>(n) != xs.size())
    throw Error(ErrorCode::InvalidArgument,
                "coordinate count must match the photon number");
  if (n > out.n_max)
    throw Error(ErrorCode::TruncationExceeded,
                "cluster order exceeds the configured n_max");
  check_ordered(xs);
  if (n == 0) return complex{1.0, 0.0};
  const PulseContext c = make_context(out);
  if (c.near_pole) raise_flag(flagged);
  return cluster_amplitude(c, xs);
}

complex output_amplitude(int n, std::span<const double> xs,
                         const CoherentOutput& out, bool* flagged) {
  if (n < 0 || static_cast<std::size_t>(n) != xs.size())
    throw Error(ErrorCode::InvalidArgument,
                "coordinate count must match the photon number");
  if (n > out.n_max)
    throw Error(ErrorCode::TruncationExceeded,
                "photon number exceeds the configured n_max");
  check_ordered(xs);
  const PulseContext c = make_context(out);
  if (c.near_pole) raise_flag(flagged);
  return std::exp(-0.5 * c.nbar) * unnormalized_amplitude(c, n, xs);
}

PhotonStatistics photon_statistics(const CoherentOutput& out) {
  if (out.n_max > 4)
    throw Error(ErrorCode::TruncationExceeded,
                "photon statistics support at most n_max = 4");
  const PulseContext c = make_context(out);
  PhotonStatistics st;
  st.nbar = c.nbar;
  st.weights.assign(out.n_max + 1, 0.0);
  st.errors.assign(out.n_max + 1, 0.0);

  const std::vector<Panel> panels = build_panels(c);
  for (int n = 0; n <= out.n_max; ++n) {
    if (n == 0) {
      st.weights[0] = std::exp(-c.nbar);
      st.errors[0] = 0.0;
    } else if (n <= 3) {
      st.weights[n] = weight_integral(c, panels, 16, n);
      st.errors[n] =
          std::abs(st.weights[n] - weight_integral(c, panels, 12, n));
    } else {
      st.weights[n] = weight_integral(c, panels, 8, n);
      st.errors[n] =
          std::abs(st.weights[n] - weight_integral(c, panels, 6, n));
    }
  }
  return st;
}

double g2_pair(const CoherentOutput& out, double x1, double x2,
               bool* flagged) {
  if (out.n_max < 2)
    throw Error(ErrorCode::TruncationExceeded,
                "pair correlation needs n_max >= 2");
  if (x1 > x2) std::swap(x1, x2);
  const PulseContext c = make_context(out);
  if (c.near_pole) raise_flag(flagged);
  const std::array<double, 2> pair = {x1, x2};
  const std::array<double, 1> first = {x1};
  const std::array<double, 1> second = {x2};
  const complex phi2 = unnormalized_amplitude(c, 2, pair);
  const complex phi1a = unnormalized_amplitude(c, 1, first);
  const complex phi1b = unnormalized_amplitude(c, 1, second);
  const double density = std::norm(phi1a) * std::norm(phi1b);
  if (density < 1e-30) {
    raise_flag(flagged);  // one-photon density vanishes here
    return std::norm(phi2) / 1e-30;
  }
  return std::norm(phi2) / density;
}

double g2_zero_distance(const CoherentOutput& out, double x, bool* flagged) {
  return g2_pair(out, x, x, flagged);
}

}  // namespace chiral
