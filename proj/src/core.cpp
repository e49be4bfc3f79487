#include "chiral/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chiral {

namespace {

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

}  // namespace

void validate_spec(const EmitterSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TwoLevel>) {
          require(s.g >= 0.0, ErrorCode::InvalidArgument,
                  "two-level coupling g must be >= 0");
        } else if constexpr (std::is_same_v<T, NonRwaTwoLevel>) {
          require(s.g >= 0.0 && s.gprime >= 0.0, ErrorCode::InvalidArgument,
                  "non-RWA couplings g, gprime must be >= 0");
        } else if constexpr (std::is_same_v<T, Dicke>) {
          require(s.M >= 1, ErrorCode::InvalidArgument,
                  "Dicke cluster needs M >= 1");
          require(s.g >= 0.0, ErrorCode::InvalidArgument,
                  "Dicke coupling g must be >= 0");
        } else if constexpr (std::is_same_v<T, Lambda>) {
          require(s.g31 >= 0.0 && s.g32 >= 0.0, ErrorCode::InvalidArgument,
                  "Lambda couplings g31, g32 must be >= 0");
        } else if constexpr (std::is_same_v<T, Vscheme>) {
          require(s.g21 >= 0.0 && s.g31 >= 0.0, ErrorCode::InvalidArgument,
                  "V-scheme couplings g21, g31 must be >= 0");
        } else if constexpr (std::is_same_v<T, Sigma>) {
          require(s.g21 >= 0.0 && s.g32 >= 0.0, ErrorCode::InvalidArgument,
                  "Sigma couplings g21, g32 must be >= 0");
        }
      },
      spec);
}

DerivedParams derive_params(const EmitterSpec& spec) {
  validate_spec(spec);
  DerivedParams out;
  std::visit(
      [&out](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TwoLevel>) {
          out.gamma = kPi * s.g * s.g;
          out.alpha = complex{s.Omega, -out.gamma};
        } else if constexpr (std::is_same_v<T, NonRwaTwoLevel>) {
          // Dressed pole of the rotating part; the elastic amplitude of the
          // full non-RWA emitter is nevertheless exactly unity.
          out.gamma = kPi * s.g * s.g;
          out.alpha = complex{s.Omega, -out.gamma};
        } else if constexpr (std::is_same_v<T, Dicke>) {
          out.gamma = kPi * s.g * s.g;
          out.alpha = complex{s.Omega, -out.gamma * s.M};
          out.alpha_collective = complex{s.Omega, -out.gamma * (s.M - 1)};
        } else if constexpr (std::is_same_v<T, Lambda>) {
          out.gamma = kPi * (s.g31 * s.g31 + s.g32 * s.g32);
          out.alpha = complex{s.eps3, -out.gamma};
        } else if constexpr (std::is_same_v<T, Vscheme>) {
          // Dressed eigenvalues of the radiatively coupled excited doublet.
          const complex a{s.eps2, -kPi * s.g21 * s.g21};
          const complex b{s.eps3, -kPi * s.g31 * s.g31};
          const complex c = kPi * kPi * s.g21 * s.g21 * s.g31 * s.g31;
          const complex rad = std::sqrt(0.25 * (a - b) * (a - b) - c);
          out.alpha = 0.5 * (a + b) + rad;
          out.alpha_collective = 0.5 * (a + b) - rad;
          out.gamma = kPi * (s.g21 * s.g21 + s.g31 * s.g31);
        } else if constexpr (std::is_same_v<T, Sigma>) {
          out.gamma = kPi * s.g21 * s.g21;
          out.alpha = complex{s.eps2, -out.gamma};
        }
      },
      spec);
  return out;
}

complex ResponseFunctions::m(double nu, bool* flagged) const {
  const complex den = complex{nu, 0.0} - alpha;
  if (std::abs(den) < pole_guard) raise_flag(flagged);
  return 1.0 / den;
}

complex ResponseFunctions::s(double nu, bool* flagged) const {
  // A decoupled emitter is exactly transparent; evaluating the generic form
  // would multiply a vanishing weight into the bare-resonance pole.
  if (weight == 0.0) return complex{1.0, 0.0};
  return complex{1.0, 0.0} - 2.0 * kPi * kImag * weight * m(nu, flagged);
}

ResponseFunctions response_functions(const EmitterSpec& spec,
                                     const Regularization& reg) {
  validate_spec(spec);
  ResponseFunctions rf;
  rf.pole_guard = reg.pole_guard;
  if (const auto* tl = std::get_if<TwoLevel>(&spec)) {
    rf.alpha = derive_params(spec).alpha;
    rf.weight = tl->g * tl->g;
    return rf;
  }
  if (const auto* dk = std::get_if<Dicke>(&spec)) {
    rf.alpha = derive_params(spec).alpha;
    rf.weight = static_cast<double>(dk->M) * dk->g * dk->g;
    return rf;
  }
  throw Error(ErrorCode::UnsupportedSpec,
              "scalar response functions exist only for two-level and Dicke "
              "emitters");
}

EmitterChain validate_chain(const EmitterChain& chain) {
  if (chain.entries.empty())
    throw Error(ErrorCode::EmptyChain, "emitter chain is empty");
  for (const auto& entry : chain.entries) validate_spec(entry.spec);

  EmitterChain sorted = chain;
  std::stable_sort(sorted.entries.begin(), sorted.entries.end(),
                   [](const ChainEntry& a, const ChainEntry& b) {
                     return a.position < b.position;
                   });
  if (!sorted.concentrated) {
    for (std::size_t i = 1; i < sorted.entries.size(); ++i) {
      if (sorted.entries[i].position == sorted.entries[i - 1].position) {
        std::ostringstream msg;
        msg << "distributed chain has two emitters at position "
            << sorted.entries[i].position;
        throw Error(ErrorCode::DuplicatePosition, msg.str());
      }
    }
  }
  return sorted;
}

TwoPhotonKinematics make_kinematics(double p1, double p2, double k1, double k2,
                                    double shell_tol) {
  TwoPhotonKinematics kin;
  kin.p1 = p1;
  kin.p2 = p2;
  kin.k1 = k1;
  kin.k2 = k2;
  kin.E = p1 + p2;
  kin.Delta = 0.5 * (k1 - k2);
  kin.DeltaPrime = 0.5 * (p1 - p2);
  kin.shell_tol =
      shell_tol >= 0.0 ? shell_tol : 1e-12 * std::max(1.0, std::abs(kin.E));
  const double mismatch = std::abs((p1 + p2) - (k1 + k2));
  if (mismatch > kin.shell_tol) {
    std::ostringstream msg;
    msg << "photon pair is off the energy shell: |p1+p2 - (k1+k2)| = "
        << mismatch << " exceeds tolerance " << kin.shell_tol;
    throw Error(ErrorCode::OffShell, msg.str());
  }
  return kin;
}

}  // namespace chiral
