#pragma once

// Three-level battery primitives: level structure, states, the rotating-frame
// drive Hamiltonian, ergotropy and the Hilbert-Schmidt norm.
//
// Basis order is fixed everywhere: index 0 = |g>, 1 = |e>, 2 = |f>.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "qbattery/errors.hpp"
#include "qbattery/units.hpp"

namespace qbattery {

using Complex = std::complex<double>;
using Matrix3 = Eigen::Matrix3cd;
using Vector3 = Eigen::Vector3cd;

inline constexpr int kG = 0;
inline constexpr int kE = 1;
inline constexpr int kF = 2;

/// Bare level energies in rad/s with E_g pinned to 0.
class LevelEnergies {
 public:
  LevelEnergies(double e_e, double e_f) : e_e_(e_e), e_f_(e_f) {
    if (!(std::isfinite(e_e) && std::isfinite(e_f)) || !(0.0 < e_e && e_e < e_f))
      throw std::invalid_argument("LevelEnergies: require 0 = E_g < E_e < E_f");
  }

  /// From the two measured transition frequencies omega_ge and omega_gf.
  static LevelEnergies from_transitions(double omega_ge, double omega_gf) {
    return {omega_ge, omega_gf};
  }

  double e_g() const noexcept { return 0.0; }
  double e_e() const noexcept { return e_e_; }
  double e_f() const noexcept { return e_f_; }
  double omega_ge() const noexcept { return e_e_; }
  double omega_ef() const noexcept { return e_f_ - e_e_; }
  double omega_gf() const noexcept { return e_f_; }
  double anharmonicity() const noexcept { return omega_ef() - omega_ge(); }
  /// Largest storable ergotropy, reached at |f><f|.
  double max_ergotropy() const noexcept { return e_f_; }

 private:
  double e_e_;
  double e_f_;
};

/// Measured device levels at the sweet spot (0.5 flux quanta).
inline LevelEnergies sweet_spot_levels() {
  return LevelEnergies::from_transitions(from_ghz(2.6612), from_ghz(6.1703));
}

/// Measured device levels at the charging bias (0.496 flux quanta).
inline LevelEnergies charging_bias_levels() {
  return LevelEnergies::from_transitions(from_ghz(2.7123), from_ghz(6.2180));
}

class PureState3 {
 public:
  static constexpr double kNormTolerance = 1e-10;

  explicit PureState3(const Vector3& amplitudes) : amp_(amplitudes) {
    if (!amp_.allFinite()) throw std::invalid_argument("PureState3: non-finite amplitude");
    if (std::abs(amp_.squaredNorm() - 1.0) > kNormTolerance)
      throw std::invalid_argument("PureState3: amplitudes not normalized");
  }

  static PureState3 basis(int level) {
    if (level < 0 || level > 2) throw std::invalid_argument("PureState3::basis: level must be 0, 1 or 2");
    Vector3 v = Vector3::Zero();
    v(level) = 1.0;
    return PureState3(v);
  }
  static PureState3 normalized(const Vector3& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("PureState3::normalized: zero vector");
    return PureState3(v / n);
  }

  const Vector3& amplitudes() const noexcept { return amp_; }
  Complex g() const noexcept { return amp_(kG); }
  Complex e() const noexcept { return amp_(kE); }
  Complex f() const noexcept { return amp_(kF); }

  Matrix3 projector() const { return amp_ * amp_.adjoint(); }

 private:
  Vector3 amp_;
};

class DensityMatrix3 {
 public:
  static constexpr double kHermitianTolerance = 1e-10;
  static constexpr double kTraceTolerance = 1e-8;
  static constexpr double kEigenTolerance = 1e-8;

  /// Validates Hermiticity, unit trace and positivity (with `eigen_tolerance`).
  explicit DensityMatrix3(const Matrix3& rho, double eigen_tolerance = kEigenTolerance) : rho_(rho) {
    if (!rho.allFinite()) throw std::invalid_argument("DensityMatrix3: non-finite entry");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > kHermitianTolerance)
      throw std::invalid_argument("DensityMatrix3: not Hermitian");
    if (std::abs(rho.trace() - Complex(1.0)) > kTraceTolerance)
      throw std::invalid_argument("DensityMatrix3: trace differs from 1");
    if (min_eigenvalue(rho) < -eigen_tolerance)
      throw std::invalid_argument("DensityMatrix3: negative eigenvalue");
  }
  DensityMatrix3(const PureState3& psi) : rho_(psi.projector()) {}  // NOLINT: implicit by intent

  static DensityMatrix3 basis(int level) { return DensityMatrix3(PureState3::basis(level)); }
  static DensityMatrix3 maximally_mixed() { return DensityMatrix3(Matrix3(Matrix3::Identity() / 3.0)); }
  static DensityMatrix3 diagonal(double p_g, double p_e, double p_f) {
    Matrix3 m = Matrix3::Zero();
    m(kG, kG) = p_g;
    m(kE, kE) = p_e;
    m(kF, kF) = p_f;
    return DensityMatrix3(m);
  }

  const Matrix3& matrix() const noexcept { return rho_; }
  double population(int level) const { return rho_(level, level).real(); }

  static double min_eigenvalue(const Matrix3& m) {
    Eigen::SelfAdjointEigenSolver<Matrix3> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

 private:
  Matrix3 rho_;
};

/// Instantaneous drive amplitudes (rad/s) and the Hamiltonian-frame g-f phase.
struct DriveSample {
  double omega_ge = 0.0;
  double omega_ef = 0.0;
  double omega_gf = 0.0;
  double phi = 0.0;
};

/// Rotating-frame interaction Hamiltonian: g-e, e-f and g-f couplings with the
/// complex phase on the g-f element, plus a detuning on the |f><f| diagonal.
inline Matrix3 assemble_interaction_hamiltonian(const DriveSample& d, double detuning = 0.0) {
  if (!(std::isfinite(d.omega_ge) && std::isfinite(d.omega_ef) && std::isfinite(d.omega_gf) &&
        std::isfinite(d.phi) && std::isfinite(detuning))) {
    throw std::invalid_argument("assemble_interaction_hamiltonian: non-finite input (omega_ge=" +
                                fmt_num(d.omega_ge) + ", omega_ef=" + fmt_num(d.omega_ef) +
                                ", omega_gf=" + fmt_num(d.omega_gf) + ", phi=" + fmt_num(d.phi) +
                                ", detuning=" + fmt_num(detuning) + ")");
  }
  const Complex gf = d.omega_gf * std::polar(1.0, d.phi);
  Matrix3 h;
  h << 0.0, d.omega_ge, gf,
       d.omega_ge, 0.0, d.omega_ef,
       std::conj(gf), d.omega_ef, detuning;
  return h;
}

/// Ergotropy of a ground-initialized battery: Tr{H0 rho} - E_g.
inline double ergotropy(const DensityMatrix3& rho, const LevelEnergies& levels) {
  return levels.e_e() * rho.population(kE) + levels.e_f() * rho.population(kF);
}

/// Same, evaluated straight from a pure-state amplitude vector.
inline double ergotropy(const Vector3& psi, const LevelEnergies& levels) {
  return levels.e_e() * std::norm(psi(kE)) + levels.e_f() * std::norm(psi(kF));
}

/// Zero-energy eigenvector of the two-photon (Omega_gf = 0) Hamiltonian:
/// |E0> ∝ Omega_ef|g> - Omega_ge|f>. Starts at |g> for Omega_ge = 0 and ends
/// at |f> (up to sign) once Omega_ef = 0, which is what lets the counter-
/// intuitive pulse order carry |g> to |f>.
inline PureState3 dark_state(double omega_ge, double omega_ef) {
  if (!std::isfinite(omega_ge) || !std::isfinite(omega_ef))
    throw std::invalid_argument("dark_state: non-finite amplitude");
  const double n = std::hypot(omega_ge, omega_ef);
  if (n == 0.0) throw std::invalid_argument("dark_state: undefined when both amplitudes vanish");
  Vector3 v;
  v << omega_ef / n, 0.0, -omega_ge / n;
  return PureState3(v);
}

/// Hilbert-Schmidt norm sqrt(tr H^2) of a Hermitian matrix.
inline double hs_norm(const Matrix3& h) {
  if (!h.allFinite()) throw std::invalid_argument("hs_norm: non-finite entry");
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + h.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("hs_norm: matrix is not Hermitian");
  return std::sqrt(std::max(0.0, (h * h).trace().real()));
}

/// Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const Matrix3& rho, const Matrix3& sigma) {
  auto psd_sqrt = [](const Matrix3& m) {
    Eigen::SelfAdjointEigenSolver<Matrix3> es(m);
    Eigen::Vector3d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return Matrix3(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint());
  };
  const Matrix3 s = psd_sqrt(rho);
  const Matrix3 inner = s * sigma * s;
  Eigen::SelfAdjointEigenSolver<Matrix3> es(Matrix3(0.5 * (inner + inner.adjoint())), Eigen::EigenvaluesOnly);
  const double t = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return t * t;
}

}  // namespace qbattery
