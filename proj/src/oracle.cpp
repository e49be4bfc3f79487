#include "chiral/oracle.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "chiral/core.hpp"
#include "chiral/single_photon.hpp"
#include "chiral/two_photon.hpp"

namespace chiral::oracle {
namespace {

using SpMat = Eigen::SparseMatrix<complex>;
using Triplet = Eigen::Triplet<complex>;
using Vec = Eigen::VectorXcd;

std::string format_double(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// System digest: flatten the chain into what the discretized model supports.
// ---------------------------------------------------------------------------

enum class SysKind { Atoms, DickeCluster, LambdaEmitter, VEmitter, SigmaEmitter };

struct AtomLike {
  double omega = 0.0;
  double g = 0.0;
  double r = 0.0;
};

struct Digest {
  SysKind kind = SysKind::Atoms;
  std::vector<AtomLike> atoms;  // Atoms: one per entry; DickeCluster: the rung
  int M = 1;
  Lambda lam{};
  Vscheme vsc{};
  Sigma sig{};
  double r0 = 0.0;
  double r_min = 0.0;
  double gamma_raw = 0.0;  // largest elastic half-width of the chain
};

double emitter_half_width(const EmitterSpec& spec) {
  struct Visitor {
    double operator()(const TwoLevel& e) const { return kPi * e.g * e.g; }
    double operator()(const NonRwaTwoLevel& e) const { return kPi * e.g * e.g; }
    double operator()(const Dicke& e) const { return kPi * e.g * e.g * e.M; }
    double operator()(const Lambda& e) const {
      return kPi * (e.g31 * e.g31 + e.g32 * e.g32);
    }
    double operator()(const Vscheme& e) const {
      return kPi * (e.g21 * e.g21 + e.g31 * e.g31);
    }
    double operator()(const Sigma& e) const { return kPi * e.g21 * e.g21; }
  };
  return std::visit(Visitor{}, spec);
}

Digest digest_system(const EmitterChain& system, int excitations) {
  const EmitterChain sorted = validate_chain(system);
  Digest dig;
  dig.r_min = sorted.entries.front().position;
  for (const auto& entry : sorted.entries) {
    validate_spec(entry.spec);
    dig.gamma_raw = std::max(dig.gamma_raw, emitter_half_width(entry.spec));
  }

  const bool single = sorted.entries.size() == 1;
  const auto& first = sorted.entries.front().spec;
  if (single && std::holds_alternative<Dicke>(first)) {
    const auto& d = std::get<Dicke>(first);
    dig.kind = SysKind::DickeCluster;
    dig.M = d.M;
    dig.atoms = {{d.Omega, d.g, sorted.entries.front().position}};
    return dig;
  }
  if (single && std::holds_alternative<Lambda>(first)) {
    if (excitations != 1)
      throw Error(ErrorCode::UnsupportedSpec,
                  "discretized model supports Lambda emitters only in the "
                  "one-excitation sector");
    dig.kind = SysKind::LambdaEmitter;
    dig.lam = std::get<Lambda>(first);
    dig.r0 = sorted.entries.front().position;
    return dig;
  }
  if (single && std::holds_alternative<Vscheme>(first)) {
    if (excitations != 1)
      throw Error(ErrorCode::UnsupportedSpec,
                  "discretized model supports V emitters only in the "
                  "one-excitation sector");
    dig.kind = SysKind::VEmitter;
    dig.vsc = std::get<Vscheme>(first);
    dig.r0 = sorted.entries.front().position;
    return dig;
  }
  if (single && std::holds_alternative<Sigma>(first)) {
    if (excitations != 1)
      throw Error(ErrorCode::UnsupportedSpec,
                  "discretized model supports Sigma emitters only in the "
                  "one-excitation sector");
    dig.kind = SysKind::SigmaEmitter;
    dig.sig = std::get<Sigma>(first);
    dig.r0 = sorted.entries.front().position;
    return dig;
  }

  dig.kind = SysKind::Atoms;
  for (const auto& entry : sorted.entries) {
    if (!std::holds_alternative<TwoLevel>(entry.spec))
      throw Error(ErrorCode::UnsupportedSpec,
                  "discretized model supports chains of two-level emitters, a "
                  "single Dicke cluster, or a single three-level emitter");
    const auto& t = std::get<TwoLevel>(entry.spec);
    dig.atoms.push_back({t.Omega, t.g, entry.position});
  }
  if (dig.atoms.size() > 4)
    throw Error(ErrorCode::UnsupportedSpec,
                "discretized model is limited to four two-level emitters");
  return dig;
}

}  // namespace

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

Discretization make_discretization(const EmitterChain& system, double k_center,
                                   const DiscretizationConfig& cfg) {
  if (cfg.n_modes < 8 || cfg.n_modes > 4096)
    throw Error(ErrorCode::InvalidArgument,
                "n_modes must lie in [8, 4096], got " +
                    std::to_string(cfg.n_modes));
  if (cfg.krylov_dim < 4 || cfg.krylov_dim > 120)
    throw Error(ErrorCode::InvalidArgument,
                "krylov_dim must lie in [4, 120]");
  if (!(cfg.lanczos_tol > 0.0))
    throw Error(ErrorCode::InvalidArgument, "lanczos_tol must be positive");
  if (cfg.eta_switch < 0.0)
    throw Error(ErrorCode::InvalidArgument, "eta_switch must be >= 0");

  const Digest dig = digest_system(system, 1);

  Discretization d;
  d.n_modes = cfg.n_modes;
  d.gamma_scale = std::max(dig.gamma_raw, 1e-2);
  d.W = cfg.bandwidth > 0.0 ? cfg.bandwidth : 40.0 * d.gamma_scale;
  d.dnu = d.W / d.n_modes;
  d.L = 2.0 * kPi / d.dnu;
  d.k_center = k_center;
  d.sigma_p = cfg.sigma_p > 0.0 ? cfg.sigma_p : 0.25 * d.gamma_scale;
  d.x0 = std::isnan(cfg.x0) ? -0.25 * d.L : cfg.x0;
  d.t_final = cfg.t_final > 0.0 ? cfg.t_final : 0.5 * d.L;
  d.dt0 = cfg.dt > 0.0 ? cfg.dt : 10.0 / d.W;
  d.eta_switch = cfg.eta_switch;
  d.lanczos_tol = cfg.lanczos_tol;
  d.krylov_dim = cfg.krylov_dim;

  d.nu.resize(d.n_modes);
  for (int m = 0; m < d.n_modes; ++m)
    d.nu[m] = k_center - 0.5 * d.W + (m + 0.5) * d.dnu;

  if (dig.gamma_raw > 0.0 && d.W < 20.0 * dig.gamma_raw)
    d.warnings.push_back("bandwidth " + format_double(d.W) +
                         " is below 20 emitter half-widths; truncated "
                         "Lorentzian tails will bias the extraction");
  if (dig.gamma_raw > 0.0 && d.dnu > 0.25 * dig.gamma_raw)
    d.warnings.push_back("mode spacing " + format_double(d.dnu) +
                         " exceeds a quarter of the narrowest resonance; "
                         "the comb undersamples the line");
  if (d.sigma_p < 2.0 * d.dnu)
    d.warnings.push_back("packet width sigma_p covers fewer than two mode "
                         "spacings; the packet is barely resolved");
  const double sigma_x = 0.5 / d.sigma_p;
  if (d.x0 - 3.0 * sigma_x < -0.5 * d.L)
    d.warnings.push_back("initial packet is clipped by the simulation box");
  if (d.x0 + d.t_final + 3.0 * sigma_x > 0.5 * d.L)
    d.warnings.push_back("packet reaches the box edge before t_final; "
                         "wrap-around will contaminate the output");
  return d;
}

namespace {

// ---------------------------------------------------------------------------
// Hamiltonian assembly.  All energies are shifted by -k_center per excitation
// so the propagator works with the smallest possible spectral radius; the
// shift is a global phase within each fixed-excitation sector and is undone
// consistently when free phases are removed.
// ---------------------------------------------------------------------------

struct BuiltH {
  SpMat h_static;    // diagonal part (always applied)
  SpMat h_coupling;  // light-matter couplings (scaled by the switch ramp)
  bool ramped = false;
  double eta_switch = 0.0;
  int dim = 0;
  int atom_offset = 0;  // first non-photon basis index
};

void add_hermitian(std::vector<Triplet>& trips, int row, int col, complex v) {
  trips.emplace_back(row, col, v);
  trips.emplace_back(col, row, std::conj(v));
}

BuiltH assemble(int dim, std::vector<Triplet> diag, std::vector<Triplet> coup,
                const Discretization& disc) {
  BuiltH built;
  built.dim = dim;
  built.ramped = disc.eta_switch > 0.0;
  built.eta_switch = disc.eta_switch;
  if (built.ramped) {
    built.h_static.resize(dim, dim);
    built.h_static.setFromTriplets(diag.begin(), diag.end());
    built.h_coupling.resize(dim, dim);
    built.h_coupling.setFromTriplets(coup.begin(), coup.end());
  } else {
    diag.insert(diag.end(), coup.begin(), coup.end());
    built.h_static.resize(dim, dim);
    built.h_static.setFromTriplets(diag.begin(), diag.end());
  }
  return built;
}

complex mode_phase(double nu, double r) {
  return std::polar(1.0, nu * r);
}

BuiltH build_h1(const Digest& dig, const Discretization& disc) {
  const int n = disc.n_modes;
  const double root_dnu = std::sqrt(disc.dnu);
  std::vector<Triplet> diag;
  std::vector<Triplet> coup;

  const auto photon_diag = [&](int offset, double extra) {
    for (int m = 0; m < n; ++m)
      diag.emplace_back(offset + m, offset + m,
                        complex(disc.nu[m] - disc.k_center + extra, 0.0));
  };

  int dim = 0;
  int atom_offset = 0;
  switch (dig.kind) {
    case SysKind::Atoms:
    case SysKind::DickeCluster: {
      const int k = static_cast<int>(dig.atoms.size());
      dim = n + k;
      atom_offset = n;
      photon_diag(0, 0.0);
      for (int j = 0; j < k; ++j) {
        const auto& a = dig.atoms[j];
        const double geff =
            dig.kind == SysKind::DickeCluster ? a.g * std::sqrt(double(dig.M))
                                              : a.g;
        diag.emplace_back(n + j, n + j, complex(a.omega - disc.k_center, 0.0));
        for (int m = 0; m < n; ++m)
          add_hermitian(coup, n + j, m,
                        geff * root_dnu * mode_phase(disc.nu[m], a.r));
      }
      break;
    }
    case SysKind::SigmaEmitter: {
      dim = n + 1;
      atom_offset = n;
      photon_diag(0, 0.0);
      diag.emplace_back(
          n, n, complex(dig.sig.eps2 - dig.sig.eps1 - disc.k_center, 0.0));
      for (int m = 0; m < n; ++m)
        add_hermitian(coup, n, m,
                      dig.sig.g21 * root_dnu * mode_phase(disc.nu[m], dig.r0));
      break;
    }
    case SysKind::VEmitter: {
      dim = n + 2;
      atom_offset = n;
      photon_diag(0, 0.0);
      diag.emplace_back(
          n, n, complex(dig.vsc.eps2 - dig.vsc.eps1 - disc.k_center, 0.0));
      diag.emplace_back(
          n + 1, n + 1,
          complex(dig.vsc.eps3 - dig.vsc.eps1 - disc.k_center, 0.0));
      for (int m = 0; m < n; ++m) {
        const complex ph = root_dnu * mode_phase(disc.nu[m], dig.r0);
        add_hermitian(coup, n, m, dig.vsc.g21 * ph);
        add_hermitian(coup, n + 1, m, dig.vsc.g31 * ph);
      }
      break;
    }
    case SysKind::LambdaEmitter: {
      dim = 2 * n + 1;
      atom_offset = 2 * n;
      photon_diag(0, 0.0);
      photon_diag(n, dig.lam.eps2 - dig.lam.eps1);
      diag.emplace_back(
          2 * n, 2 * n,
          complex(dig.lam.eps3 - dig.lam.eps1 - disc.k_center, 0.0));
      for (int m = 0; m < n; ++m) {
        const complex ph = root_dnu * mode_phase(disc.nu[m], dig.r0);
        add_hermitian(coup, 2 * n, m, dig.lam.g31 * ph);
        add_hermitian(coup, 2 * n, n + m, dig.lam.g32 * ph);
      }
      break;
    }
  }

  BuiltH built = assemble(dim, std::move(diag), std::move(coup), disc);
  built.atom_offset = atom_offset;
  return built;
}

inline int pair_index(int m, int q, int n) {
  // Index of the unordered pair (m <= q) in row-major upper-triangular order.
  return m * n - m * (m - 1) / 2 + (q - m);
}

BuiltH build_h2(const Digest& dig, const Discretization& disc) {
  const int n = disc.n_modes;
  const int np = n * (n + 1) / 2;
  const double root_dnu = std::sqrt(disc.dnu);
  const double root2 = std::sqrt(2.0);
  std::vector<Triplet> diag;
  std::vector<Triplet> coup;

  const bool dicke = dig.kind == SysKind::DickeCluster;
  const int k = static_cast<int>(dig.atoms.size());
  const int n_double = dicke ? (dig.M >= 2 ? 1 : 0) : k * (k - 1) / 2;
  const int dim = np + k * n + n_double;
  diag.reserve(static_cast<size_t>(dim));
  coup.reserve(static_cast<size_t>(np) * 4 * k + 8 * static_cast<size_t>(n));

  std::vector<double> shifted(n);
  for (int m = 0; m < n; ++m) shifted[m] = disc.nu[m] - disc.k_center;

  std::vector<std::vector<complex>> cphase(k, std::vector<complex>(n));
  for (int j = 0; j < k; ++j) {
    const double geff =
        dicke ? dig.atoms[j].g * std::sqrt(double(dig.M)) : dig.atoms[j].g;
    for (int m = 0; m < n; ++m)
      cphase[j][m] = geff * root_dnu * mode_phase(disc.nu[m], dig.atoms[j].r);
  }

  for (int m = 0; m < n; ++m) {
    for (int q = m; q < n; ++q) {
      const int idx = pair_index(m, q, n);
      diag.emplace_back(idx, idx, complex(shifted[m] + shifted[q], 0.0));
      for (int j = 0; j < k; ++j) {
        const int ej = np + j * n;
        if (m == q) {
          add_hermitian(coup, ej + m, idx, root2 * cphase[j][m]);
        } else {
          add_hermitian(coup, ej + q, idx, cphase[j][m]);
          add_hermitian(coup, ej + m, idx, cphase[j][q]);
        }
      }
    }
  }

  for (int j = 0; j < k; ++j) {
    const double ej_energy = dig.atoms[j].omega - disc.k_center;
    for (int m = 0; m < n; ++m)
      diag.emplace_back(np + j * n + m, np + j * n + m,
                        complex(ej_energy + shifted[m], 0.0));
  }

  if (dicke) {
    if (dig.M >= 2) {
      const int dbl = np + n;
      diag.emplace_back(dbl, dbl,
                        complex(2.0 * (dig.atoms[0].omega - disc.k_center), 0.0));
      const double rung = std::sqrt(2.0 * (dig.M - 1)) * dig.atoms[0].g;
      for (int m = 0; m < n; ++m)
        add_hermitian(coup, dbl, np + m,
                      rung * root_dnu * mode_phase(disc.nu[m], dig.atoms[0].r));
    }
  } else {
    int dbl = np + k * n;
    for (int j = 0; j < k; ++j) {
      for (int jp = j + 1; jp < k; ++jp, ++dbl) {
        diag.emplace_back(dbl, dbl,
                          complex(dig.atoms[j].omega + dig.atoms[jp].omega -
                                      2.0 * disc.k_center,
                                  0.0));
        for (int m = 0; m < n; ++m) {
          // Absorbing the remaining photon excites the other atom.
          add_hermitian(coup, dbl, np + j * n + m, cphase[jp][m]);
          add_hermitian(coup, dbl, np + jp * n + m, cphase[j][m]);
        }
      }
    }
  }

  BuiltH built = assemble(dim, std::move(diag), std::move(coup), disc);
  built.atom_offset = np;
  return built;
}

// ---------------------------------------------------------------------------
// Krylov propagator
// ---------------------------------------------------------------------------

struct ApplyH {
  const BuiltH* built;
  mutable long matvecs = 0;

  void operator()(const Vec& x, Vec& y, double t) const {
    y.noalias() = built->h_static * x;
    if (built->ramped) {
      const double s = 1.0 - std::exp(-t / built->eta_switch);
      y.noalias() += s * (built->h_coupling * x);
    }
    ++matvecs;
  }
};

// One Krylov step v <- exp(-i H dt) v.  Returns an a-posteriori error
// estimate: the coefficient-space distance between the full m-dimensional
// approximation and the one truncated to m - 2 Lanczos vectors.
double krylov_exp_step(const ApplyH& apply, double t_mid, Vec& v, double dt,
                       int m_max) {
  const double nrm = v.norm();
  if (nrm == 0.0) return 0.0;

  const int dim = static_cast<int>(v.size());
  const int m_cap = std::min(m_max, dim);
  std::vector<Vec> basis;
  basis.reserve(static_cast<size_t>(m_cap) + 1);
  basis.push_back(v / nrm);

  Eigen::VectorXd alpha(m_cap), beta(m_cap);
  Vec w(dim);
  int m_eff = m_cap;
  bool happy = false;
  double scale = 1.0;
  for (int j = 0; j < m_cap; ++j) {
    apply(basis[static_cast<size_t>(j)], w, t_mid);
    alpha(j) = std::real(basis[static_cast<size_t>(j)].dot(w));
    w -= alpha(j) * basis[static_cast<size_t>(j)];
    if (j > 0) w -= beta(j - 1) * basis[static_cast<size_t>(j) - 1];
    // Full reorthogonalization keeps the basis numerically orthonormal, so
    // the propagated norm drift stays at rounding level over long runs.
    for (int i = 0; i <= j; ++i) {
      const complex c = basis[static_cast<size_t>(i)].dot(w);
      w -= c * basis[static_cast<size_t>(i)];
    }
    beta(j) = w.norm();
    scale = std::max(scale, std::abs(alpha(j)) + beta(j));
    if (beta(j) < 1e-13 * scale) {
      m_eff = j + 1;
      happy = true;
      break;
    }
    if (j + 1 < m_cap) basis.push_back(w / beta(j));
  }

  const auto krylov_coeffs = [&](int m) -> Eigen::VectorXcd {
    Eigen::MatrixXd t_mat = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      t_mat(i, i) = alpha(i);
      if (i + 1 < m) {
        t_mat(i, i + 1) = beta(i);
        t_mat(i + 1, i) = beta(i);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t_mat);
    const Eigen::VectorXd& lam = es.eigenvalues();
    const Eigen::MatrixXd& q = es.eigenvectors();
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(m);
    for (int a = 0; a < m; ++a) {
      const complex phase = std::polar(1.0, -lam(a) * dt);
      for (int i = 0; i < m; ++i) y(i) += q(i, a) * phase * q(0, a);
    }
    return y;
  };

  const Eigen::VectorXcd y = krylov_coeffs(m_eff);
  double err = 0.0;
  if (!happy && m_eff > 4) {
    const int m_trunc = m_eff - 2;
    const Eigen::VectorXcd y2 = krylov_coeffs(m_trunc);
    for (int i = 0; i < m_eff; ++i) {
      const complex d = i < m_trunc ? y(i) - y2(i) : y(i);
      err += std::norm(d);
    }
    err = std::sqrt(err);
  }

  v.setZero();
  const int n_basis = std::min<int>(m_eff, static_cast<int>(basis.size()));
  for (int i = 0; i < n_basis; ++i)
    v += (nrm * y(i)) * basis[static_cast<size_t>(i)];
  return err;
}

void evolve_segment(const ApplyH& apply, const Discretization& disc, Vec& v,
                    double t_begin, double t_end, EvolveStats& stats) {
  if (t_end <= t_begin) return;
  const double span = t_end - t_begin;
  double t = t_begin;
  double dt = std::min(disc.dt0, span);
  const double dt_floor = std::max(span * 1e-9, 1e-300);
  int rejects = 0;

  while (t < t_end - 1e-12 * span) {
    const double step = std::min(dt, t_end - t);
    Vec saved = v;
    const double err =
        krylov_exp_step(apply, t + 0.5 * step, v, step, disc.krylov_dim);
    if (err > disc.lanczos_tol) {
      if (step <= dt_floor || ++rejects > 200)
        throw Error(ErrorCode::StepControlFailure,
                    "propagator step control cannot reach tolerance " +
                        format_double(disc.lanczos_tol) +
                        " (step error " + format_double(err) + ")");
      v = std::move(saved);
      dt = 0.5 * step;
      continue;
    }
    t += step;
    ++stats.steps;
    stats.max_step_error = std::max(stats.max_step_error, err);
    if (err < 0.01 * disc.lanczos_tol)
      dt = std::min(step * 1.5, 8.0 * disc.dt0);
    if (stats.steps > 200000)
      throw Error(ErrorCode::StepControlFailure,
                  "propagator exceeded the step budget");
  }
}

std::vector<complex> packet_amplitudes(const Discretization& disc) {
  std::vector<complex> f(static_cast<size_t>(disc.n_modes));
  double norm2 = 0.0;
  for (int m = 0; m < disc.n_modes; ++m) {
    const double dev = disc.nu[m] - disc.k_center;
    const double mag = std::exp(-dev * dev / (4.0 * disc.sigma_p * disc.sigma_p));
    f[static_cast<size_t>(m)] =
        mag * std::polar(1.0, -disc.nu[m] * disc.x0);
    norm2 += mag * mag;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& c : f) c *= inv;
  return f;
}

double check_norm_drift(const Vec& v) {
  return std::abs(v.norm() - 1.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// One-excitation run
// ---------------------------------------------------------------------------

S1Run run_s1(const EmitterChain& system, double k_center,
             const DiscretizationConfig& cfg, int lambda_incoming_channel) {
  const Digest dig = digest_system(system, 1);
  S1Run run;
  run.disc = make_discretization(system, k_center, cfg);
  const Discretization& disc = run.disc;
  const int n = disc.n_modes;

  if (dig.kind != SysKind::LambdaEmitter && lambda_incoming_channel != 1)
    throw Error(ErrorCode::InvalidArgument,
                "incoming_channel is meaningful only for Lambda emitters");
  if (lambda_incoming_channel != 1 && lambda_incoming_channel != 2)
    throw Error(ErrorCode::InvalidArgument,
                "incoming_channel must be 1 or 2");

  const BuiltH built = build_h1(dig, disc);
  ApplyH apply{&built};

  const std::vector<complex> f = packet_amplitudes(disc);
  const int in_offset = dig.kind == SysKind::LambdaEmitter
                            ? (lambda_incoming_channel - 1) * n
                            : 0;
  Vec v = Vec::Zero(built.dim);
  for (int m = 0; m < n; ++m) v(in_offset + m) = f[static_cast<size_t>(m)];

  const double t_half = 0.5 * disc.t_final;
  evolve_segment(apply, disc, v, 0.0, t_half, run.stats);
  const Vec mid = v;
  evolve_segment(apply, disc, v, t_half, disc.t_final, run.stats);
  run.stats.matvecs = apply.matvecs;
  run.stats.norm_drift = check_norm_drift(v);
  if (run.stats.norm_drift > 1e-8)
    throw Error(ErrorCode::StepControlFailure,
                "propagated state norm drifted by " +
                    format_double(run.stats.norm_drift));

  const auto diag_energy = [&](int offset, int m) {
    double e = disc.nu[m] - disc.k_center;
    if (dig.kind == SysKind::LambdaEmitter && offset == n)
      e += dig.lam.eps2 - dig.lam.eps1;
    return e;
  };

  run.in_modes = f;
  run.out_modes.resize(static_cast<size_t>(n));
  for (int m = 0; m < n; ++m)
    run.out_modes[static_cast<size_t>(m)] =
        v(in_offset + m) *
        std::polar(1.0, diag_energy(in_offset, m) * disc.t_final);
  if (dig.kind == SysKind::LambdaEmitter) {
    const int other = in_offset == 0 ? n : 0;
    run.out_channel2.resize(static_cast<size_t>(n));
    for (int m = 0; m < n; ++m)
      run.out_channel2[static_cast<size_t>(m)] =
          v(other + m) * std::polar(1.0, diag_energy(other, m) * disc.t_final);
  }

  run.atomic_residual = 0.0;
  for (int i = built.atom_offset; i < built.dim; ++i)
    run.atomic_residual += std::norm(v(i));
  if (run.atomic_residual > 1e-4)
    throw Error(ErrorCode::PacketNotSeparated,
                "atomic population " + format_double(run.atomic_residual) +
                    " has not decayed at t_final; enlarge the box or the "
                    "final time");

  double peak = 0.0;
  for (const auto& c : f) peak = std::max(peak, std::abs(c));
  for (int m = 0; m < n; ++m) {
    if (std::abs(f[static_cast<size_t>(m)]) > 1e-6 * peak) {
      run.support.push_back(m);
      run.s_ratio.push_back(run.out_modes[static_cast<size_t>(m)] /
                            f[static_cast<size_t>(m)]);
    }
  }

  // Chirality diagnostic: at t_half the elastic-subtracted field must vanish
  // upstream of the system (the channel only carries scattered light
  // forward).  Quoted as integrated probability left of r_min - 2/gamma.
  {
    const double dx = disc.L / n;
    const double x_cut = dig.r_min - 2.0 / disc.gamma_scale;
    std::vector<complex> resid(static_cast<size_t>(n));
    for (int m = 0; m < n; ++m)
      resid[static_cast<size_t>(m)] =
          mid(in_offset + m) -
          f[static_cast<size_t>(m)] *
              std::polar(1.0, -diag_energy(in_offset, m) * t_half);
    double tail = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = -0.5 * disc.L + (i + 0.5) * dx;
      if (x >= x_cut) continue;
      complex field = 0.0;
      complex field2 = 0.0;
      const complex step = std::polar(1.0, disc.dnu * x);
      complex ph = std::polar(1.0, disc.nu[0] * x);
      for (int m = 0; m < n; ++m) {
        field += resid[static_cast<size_t>(m)] * ph;
        if (dig.kind == SysKind::LambdaEmitter) {
          const int other = in_offset == 0 ? n : 0;
          field2 += mid(other + m) * ph;
        }
        ph *= step;
      }
      tail += (std::norm(field) + std::norm(field2)) / disc.L * dx;
    }
    run.chirality_left_tail = tail;
  }

  return run;
}

// ---------------------------------------------------------------------------
// Two-excitation run
// ---------------------------------------------------------------------------

S2Run run_s2(const EmitterChain& system, double k_center,
             const DiscretizationConfig& cfg) {
  const Digest dig = digest_system(system, 2);
  if (cfg.n_modes > 768)
    throw Error(ErrorCode::InvalidArgument,
                "two-excitation runs are limited to n_modes <= 768");

  S2Run run;
  run.disc = make_discretization(system, k_center, cfg);
  const Discretization& disc = run.disc;
  const int n = disc.n_modes;
  const int np = n * (n + 1) / 2;

  const BuiltH built = build_h2(dig, disc);
  ApplyH apply{&built};

  const std::vector<complex> f = packet_amplitudes(disc);
  Vec v = Vec::Zero(built.dim);
  const double root2 = std::sqrt(2.0);
  for (int m = 0; m < n; ++m) {
    for (int q = m; q < n; ++q) {
      const complex amp = f[static_cast<size_t>(m)] * f[static_cast<size_t>(q)];
      v(pair_index(m, q, n)) = (m == q) ? amp : root2 * amp;
    }
  }

  evolve_segment(apply, disc, v, 0.0, disc.t_final, run.stats);
  run.stats.matvecs = apply.matvecs;
  run.stats.norm_drift = check_norm_drift(v);
  if (run.stats.norm_drift > 1e-8)
    throw Error(ErrorCode::StepControlFailure,
                "propagated state norm drifted by " +
                    format_double(run.stats.norm_drift));

  run.atomic_residual = 0.0;
  for (int i = np; i < built.dim; ++i) run.atomic_residual += std::norm(v(i));
  if (run.atomic_residual > 1e-4)
    throw Error(ErrorCode::PacketNotSeparated,
                "excited-state population " +
                    format_double(run.atomic_residual) +
                    " has not decayed at t_final");

  const size_t nn = static_cast<size_t>(n) * static_cast<size_t>(n);
  run.in_pair.assign(nn, complex(0.0, 0.0));
  run.out_pair.assign(nn, complex(0.0, 0.0));
  std::vector<double> shifted(static_cast<size_t>(n));
  for (int m = 0; m < n; ++m)
    shifted[static_cast<size_t>(m)] = disc.nu[m] - disc.k_center;
  for (int m = 0; m < n; ++m) {
    for (int q = m; q < n; ++q) {
      const complex in_amp =
          f[static_cast<size_t>(m)] * f[static_cast<size_t>(q)];
      const complex phase = std::polar(
          1.0, (shifted[static_cast<size_t>(m)] +
                shifted[static_cast<size_t>(q)]) *
                   disc.t_final);
      const complex raw = v(pair_index(m, q, n)) * phase;
      const complex out_amp = (m == q) ? raw : raw / root2;
      run.in_pair[static_cast<size_t>(m) * n + q] = in_amp;
      run.in_pair[static_cast<size_t>(q) * n + m] = in_amp;
      run.out_pair[static_cast<size_t>(m) * n + q] = out_amp;
      run.out_pair[static_cast<size_t>(q) * n + m] = out_amp;
    }
  }

  // Closed-form prediction on the same grid:
  //   pred_ij = s_i s_j in_ij
  //           + (i/2) dnu Sum_k T(nu_i,nu_j; nu_k,nu_{i+j-k}) in_{k,i+j-k}.
  const S2Decomposition dec = s2_full(system);
  run.s1_closed.resize(static_cast<size_t>(n));
  bool flagged = false;
  for (int m = 0; m < n; ++m)
    run.s1_closed[static_cast<size_t>(m)] = dec.elastic(disc.nu[m], &flagged);

  run.predicted_pair.assign(nn, complex(0.0, 0.0));
  std::vector<complex> elastic(nn);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      elastic[static_cast<size_t>(i) * n + j] =
          run.s1_closed[static_cast<size_t>(i)] *
          run.s1_closed[static_cast<size_t>(j)] *
          run.in_pair[static_cast<size_t>(i) * n + j];
  run.predicted_pair = elastic;

  double peak = 0.0;
  for (const auto& c : f) peak = std::max(peak, std::abs(c));
  int k_lo = n, k_hi = -1;
  for (int m = 0; m < n; ++m) {
    if (std::abs(f[static_cast<size_t>(m)]) > 1e-8 * peak) {
      k_lo = std::min(k_lo, m);
      k_hi = std::max(k_hi, m);
    }
  }

  const complex half_i = complex(0.0, 0.5) * disc.dnu;
  for (int s = 2 * k_lo; s <= 2 * k_hi; ++s) {
    const int kk_lo = std::max(k_lo, s - k_hi);
    const int kk_hi = std::min(k_hi, s - k_lo);
    if (kk_lo > kk_hi) continue;
    const int i_lo = std::max(0, s - (n - 1));
    const int i_hi = std::min(n - 1, s);
    for (int i = i_lo; i <= i_hi; ++i) {
      const int j = s - i;
      complex acc = 0.0;
      for (int kk = kk_lo; kk <= kk_hi; ++kk) {
        const int ll = s - kk;
        const TwoPhotonKinematics kin = make_kinematics(
            disc.nu[i], disc.nu[j], disc.nu[kk], disc.nu[ll], 1e-9);
        acc += dec.irreducible_kernel(kin, &flagged) *
               run.in_pair[static_cast<size_t>(kk) * n + ll];
      }
      run.predicted_pair[static_cast<size_t>(i) * n + j] += half_i * acc;
    }
  }

  // Overlap metrics (full state and elastic-subtracted parts).
  complex dot_full = 0.0;
  double n_out = 0.0, n_pred = 0.0;
  complex dot_conn = 0.0;
  double n_conn_out = 0.0, n_conn_pred = 0.0;
  for (size_t i = 0; i < nn; ++i) {
    dot_full += std::conj(run.out_pair[i]) * run.predicted_pair[i];
    n_out += std::norm(run.out_pair[i]);
    n_pred += std::norm(run.predicted_pair[i]);
    const complex co = run.out_pair[i] - elastic[i];
    const complex cp = run.predicted_pair[i] - elastic[i];
    dot_conn += std::conj(co) * cp;
    n_conn_out += std::norm(co);
    n_conn_pred += std::norm(cp);
  }
  run.overlap_full = n_out > 0.0 && n_pred > 0.0
                         ? std::abs(dot_full) / std::sqrt(n_out * n_pred)
                         : 0.0;
  run.overlap_connected =
      n_conn_out > 0.0 && n_conn_pred > 0.0
          ? std::abs(dot_conn) / std::sqrt(n_conn_out * n_conn_pred)
          : 0.0;
  run.connected_norm_ratio =
      n_conn_out > 0.0 ? std::sqrt(n_conn_pred / n_conn_out)
                       : (n_conn_pred > 0.0 ? std::numeric_limits<double>::infinity()
                                            : 1.0);
  return run;
}

// ---------------------------------------------------------------------------
// Local density of states (one excitation): truncated-Lorentzian quantile fit
// ---------------------------------------------------------------------------

LdosFit ldos_fit(const EmitterChain& system, double k_center,
                 const DiscretizationConfig& cfg) {
  const Digest dig = digest_system(system, 1);
  if (dig.kind != SysKind::Atoms && dig.kind != SysKind::DickeCluster)
    throw Error(ErrorCode::UnsupportedSpec,
                "the spectral-density fit supports two-level-type emitters");

  const Discretization disc = make_discretization(system, k_center, cfg);
  if (disc.n_modes > 2048)
    throw Error(ErrorCode::InvalidArgument,
                "the spectral-density fit is limited to n_modes <= 2048");
  const BuiltH built = build_h1(dig, disc);

  Eigen::MatrixXcd dense = Eigen::MatrixXcd(built.h_static);
  if (built.ramped) dense += Eigen::MatrixXcd(built.h_coupling);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense);
  if (es.info() != Eigen::Success)
    throw Error(ErrorCode::StepControlFailure,
                "dense diagonalization failed in the spectral-density fit");

  const int dim = built.dim;
  const int atom_index = built.atom_offset;  // first emitter's excited level
  std::vector<double> energy(static_cast<size_t>(dim));
  std::vector<double> weight(static_cast<size_t>(dim));
  for (int a = 0; a < dim; ++a) {
    energy[static_cast<size_t>(a)] = es.eigenvalues()(a) + disc.k_center;
    weight[static_cast<size_t>(a)] = std::norm(es.eigenvectors()(atom_index, a));
  }

  // Empirical quantile with each eigenvalue's weight smeared uniformly over
  // one mode cell; this removes the O(dnu) staircase bias of raw quantiles.
  const double half_cell = 0.5 * disc.dnu;
  const auto quantile = [&](double q) {
    double c = 0.0;
    for (int a = 0; a < dim; ++a) {
      const double w = weight[static_cast<size_t>(a)];
      if (w <= 0.0) continue;
      if (q <= c + w) {
        const double frac = (q - c) / w;
        return energy[static_cast<size_t>(a)] - half_cell + frac * disc.dnu;
      }
      c += w;
    }
    return energy.back() + half_cell;
  };
  const double med = quantile(0.5);
  const double iqr = quantile(0.75) - quantile(0.25);

  const double e_lo = disc.k_center - 0.5 * disc.W;
  const double e_hi = disc.k_center + 0.5 * disc.W;
  const auto model_quantile = [&](double q, double omega, double gamma) {
    const double th_lo = std::atan((e_lo - omega) / gamma);
    const double th_hi = std::atan((e_hi - omega) / gamma);
    return omega + gamma * std::tan(th_lo + q * (th_hi - th_lo));
  };
  const auto omega_for = [&](double gamma) {
    double lo = e_lo - disc.W, hi = e_hi + disc.W;
    for (int it = 0; it < 200; ++it) {
      const double mid_omega = 0.5 * (lo + hi);
      if (model_quantile(0.5, mid_omega, gamma) < med)
        lo = mid_omega;
      else
        hi = mid_omega;
    }
    return 0.5 * (lo + hi);
  };

  double g_lo = disc.dnu / 50.0, g_hi = 4.0 * disc.W;
  for (int it = 0; it < 200; ++it) {
    const double g_mid = std::sqrt(g_lo * g_hi);
    const double omega = omega_for(g_mid);
    const double model_iqr =
        model_quantile(0.75, omega, g_mid) - model_quantile(0.25, omega, g_mid);
    if (model_iqr < iqr)
      g_lo = g_mid;
    else
      g_hi = g_mid;
  }
  LdosFit fit;
  fit.gamma = std::sqrt(g_lo * g_hi);
  fit.omega = omega_for(fit.gamma);
  return fit;
}

// ---------------------------------------------------------------------------
// Pair-correlation diagnostics
// ---------------------------------------------------------------------------

PairDiagnostics pair_diagnostics(const S2Run& run) {
  const Discretization& disc = run.disc;
  const int n = disc.n_modes;
  const double dx = disc.L / n;
  const double gs = disc.gamma_scale;

  using RowMat =
      Eigen::Matrix<complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> out(run.out_pair.data(), n, n);
  Eigen::Map<const RowMat> in(run.in_pair.data(), n, n);

  RowMat elastic(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      elastic(i, j) = run.s1_closed[static_cast<size_t>(i)] *
                      run.s1_closed[static_cast<size_t>(j)] * in(i, j);

  Eigen::MatrixXcd f_mat(n, n);
  const double inv_root_l = 1.0 / std::sqrt(disc.L);
  for (int m = 0; m < n; ++m) {
    for (int i = 0; i < n; ++i) {
      const double x = -0.5 * disc.L + (i + 0.5) * dx;
      f_mat(m, i) = std::polar(inv_root_l, disc.nu[m] * x);
    }
  }

  const Eigen::MatrixXcd phi_full = f_mat.transpose() * (out * f_mat);
  const Eigen::MatrixXcd phi_el = f_mat.transpose() * (elastic * f_mat);

  PairDiagnostics diag;
  const int m_max =
      std::min(n - 1, static_cast<int>(std::ceil(4.0 / (gs * dx))));
  diag.separation.resize(static_cast<size_t>(m_max) + 1);
  diag.full_density.resize(static_cast<size_t>(m_max) + 1);
  diag.elastic_density.resize(static_cast<size_t>(m_max) + 1);
  diag.connected_density.resize(static_cast<size_t>(m_max) + 1);
  for (int m = 0; m <= m_max; ++m) {
    double d_full = 0.0, d_el = 0.0, d_conn = 0.0;
    for (int i = 0; i + m < n; ++i) {
      d_full += std::norm(phi_full(i, i + m));
      d_el += std::norm(phi_el(i, i + m));
      d_conn += std::norm(phi_full(i, i + m) - phi_el(i, i + m));
    }
    diag.separation[static_cast<size_t>(m)] = m * dx;
    diag.full_density[static_cast<size_t>(m)] = d_full * dx;
    diag.elastic_density[static_cast<size_t>(m)] = d_el * dx;
    diag.connected_density[static_cast<size_t>(m)] = d_conn * dx;
  }

  // Exponential decay rate of the connected density over d in [0.5, 2]/gamma
  // (least squares on the logarithm).
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (int m = 0; m <= m_max; ++m) {
    const double d = diag.separation[static_cast<size_t>(m)];
    if (d < 0.5 / gs || d > 2.0 / gs) continue;
    const double val = diag.connected_density[static_cast<size_t>(m)];
    if (val <= 0.0) continue;
    const double ln = std::log(val);
    sx += d;
    sy += ln;
    sxx += d * d;
    sxy += d * ln;
    ++count;
  }
  if (count >= 3) {
    const double denom = count * sxx - sx * sx;
    if (denom > 0.0) diag.fitted_tail_rate = -(count * sxy - sx * sy) / denom;
  }

  if (diag.elastic_density[0] > 0.0)
    diag.coincidence_ratio =
        std::sqrt(diag.full_density[0] / diag.elastic_density[0]);

  if (diag.full_density[0] > 0.0) {
    for (int m = 0; m <= m_max; ++m) {
      const double d = diag.separation[static_cast<size_t>(m)];
      if (d < 0.6 / gs || d > 2.4 / gs) continue;
      const double ratio =
          diag.full_density[static_cast<size_t>(m)] / diag.full_density[0];
      if (ratio < diag.dip_ratio) {
        diag.dip_ratio = ratio;
        diag.dip_separation = d;
      }
    }
  }
  return diag;
}

}  // namespace chiral::oracle
