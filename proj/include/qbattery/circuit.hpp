#pragma once

// C-shunt flux qubit reduced to the single phase coordinate phi_m:
//   H = E_K k^2 + E_J (-2 cos phi + alpha cos(2 pi f_b + 2 phi)),
// diagonalized in the 2pi-periodic plane-wave basis k = -K..K, plus the
// harmonic + quartic expansion around the potential minimum.

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>
#include <lapacke.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "qbattery/errors.hpp"
#include "qbattery/qutrit.hpp"
#include "qbattery/units.hpp"

namespace qbattery {

namespace si {
inline constexpr double kPlanck = 6.62607015e-34;
inline constexpr double kHbar = kPlanck / (2.0 * 3.14159265358979323846);
inline constexpr double kElectronCharge = 1.602176634e-19;
inline constexpr double kFluxQuantum = kPlanck / (2.0 * kElectronCharge);
}  // namespace si

struct CircuitParams {
  double e_j = 0.0;    // rad/s
  double c_j = 0.0;    // F
  double c_sh = 0.0;   // F
  double alpha = 0.0;  // small-junction ratio
  double f = 0.5;      // external flux in flux quanta

  double beta() const { return c_sh / c_j; }
  double f_b() const { return f - 0.5; }

  /// M_m = 2 (Phi0/2pi)^2 C_J (1 + 2 alpha + 2 beta), in J s^2.
  double mass() const {
    const double phi_red = si::kFluxQuantum / kTwoPi;
    return 2.0 * phi_red * phi_red * c_j * (1.0 + 2.0 * alpha + 2.0 * beta());
  }
  /// Kinetic prefactor hbar / (2 M_m) in rad/s, so the kinetic term is E_K k^2.
  double e_k() const { return si::kHbar / (2.0 * mass()); }

  /// Inside 0 < alpha < 0.5 the phi = 0 well stays single at the sweet spot.
  bool in_single_well_region() const { return alpha > 0.0 && alpha < 0.5; }

  void validate() const {
    if (!(std::isfinite(e_j) && e_j > 0.0)) throw std::invalid_argument("CircuitParams: E_J must be positive");
    if (!(std::isfinite(c_j) && c_j > 0.0 && std::isfinite(c_sh) && c_sh > 0.0))
      throw std::invalid_argument("CircuitParams: capacitances must be positive");
    if (!(std::isfinite(alpha) && alpha >= 0.0)) throw std::invalid_argument("CircuitParams: alpha must be >= 0");
    if (!std::isfinite(f)) throw std::invalid_argument("CircuitParams: flux must be finite");
  }
};

/// E_J = Phi0 I_c / (2 pi hbar) in rad/s.
inline double josephson_energy_from_current(double i_c) {
  return si::kFluxQuantum * i_c / (kTwoPi * si::kHbar);
}

/// Fitted device: C_J = 9 fF, C_sh = 45 fF, alpha = 0.471, I_c = 88 nA.
inline CircuitParams paper_circuit(double f = 0.5) {
  return {josephson_energy_from_current(88e-9), 9e-15, 45e-15, 0.471, f};
}

inline constexpr int kDefaultBasisSize = 401;
inline constexpr int kMinBasisSize = 201;

inline void check_basis_size(int m) {
  if (m < kMinBasisSize || m % 2 == 0)
    throw std::invalid_argument("circuit: basis size must be odd and >= " + std::to_string(kMinBasisSize) +
                                " (got " + std::to_string(m) + ")");
}

/// Reduced Hamiltonian in rad/s. Row/column j holds momentum k = j - (m-1)/2.
inline Eigen::MatrixXcd build_reduced_hamiltonian(const CircuitParams& p, int m = kDefaultBasisSize) {
  p.validate();
  check_basis_size(m);
  const int half = (m - 1) / 2;
  const double ek = p.e_k();
  const Complex c2 = 0.5 * p.alpha * p.e_j * std::polar(1.0, kTwoPi * p.f_b());
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    const double k = j - half;
    h(j, j) = ek * k * k;
    if (j + 1 < m) h(j + 1, j) = h(j, j + 1) = -p.e_j;
    if (j + 2 < m) {
      h(j + 2, j) = c2;  // e^{2i phi} raises k by 2
      h(j, j + 2) = std::conj(c2);
    }
  }
  return h;
}

/// D = dU/df_b = -2 pi alpha E_J sin(2 pi f_b + 2 phi).
inline Eigen::MatrixXcd flux_drive_operator(const CircuitParams& p, int m = kDefaultBasisSize) {
  p.validate();
  check_basis_size(m);
  const Complex up = -kTwoPi * p.alpha * p.e_j * std::polar(1.0, kTwoPi * p.f_b()) / Complex(0.0, 2.0);
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(m, m);
  for (int j = 0; j + 2 < m; ++j) {
    d(j + 2, j) = up;
    d(j, j + 2) = std::conj(up);
  }
  return d;
}

/// Upper bound on the operator norm of D, used to make matrix elements relative.
inline double flux_drive_scale(const CircuitParams& p) { return kTwoPi * p.alpha * p.e_j; }

/// Conjugate momentum (charge) operator diag(k).
inline Eigen::MatrixXcd charge_operator(int m = kDefaultBasisSize) {
  check_basis_size(m);
  const int half = (m - 1) / 2;
  Eigen::VectorXcd k(m);
  for (int j = 0; j < m; ++j) k(j) = static_cast<double>(j - half);
  return k.asDiagonal();
}

struct SpectrumResult {
  double e_g = 0.0;  // rad/s, absolute eigenvalues
  double e_e = 0.0;
  double e_f = 0.0;
  double matrix_element = 0.0;  // |<g|D|f>|, rad/s
  int basis_size = 0;
  bool converged = true;
  double convergence_delta = 0.0;  // relative change of omega_ge under m -> 2m + 1
  Eigen::MatrixXcd vectors;        // m x 3, columns g, e, f

  double omega_ge() const { return e_e - e_g; }
  double omega_gf() const { return e_f - e_g; }
  double omega_ef() const { return e_f - e_e; }
  double anharmonicity() const { return omega_ef() - omega_ge(); }
  LevelEnergies levels() const { return LevelEnergies(omega_ge(), omega_gf()); }
};

/// Three lowest eigenpairs of a Hermitian matrix.
inline SpectrumResult solve_levels(const Eigen::MatrixXcd& h) {
  if (h.rows() != h.cols() || h.rows() < 3) throw std::invalid_argument("solve_levels: need a square matrix of size >= 3");
  if (!h.allFinite()) throw std::invalid_argument("solve_levels: non-finite entry");
  const double scale = h.cwiseAbs().maxCoeff();
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw std::invalid_argument("solve_levels: not Hermitian");
  // Only the three lowest pairs are needed; LAPACK's MRRR driver with an
  // index range is an order of magnitude faster than a full decomposition.
  const int m = static_cast<int>(h.rows());
  Eigen::MatrixXcd a = h;
  Eigen::VectorXd w(m);
  Eigen::MatrixXcd z(m, 3);
  Eigen::VectorXi support(2 * m);
  int found = 0;
  const int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', m, reinterpret_cast<lapack_complex_double*>(a.data()),
                                  m, 0.0, 0.0, 1, 3, 0.0, &found, w.data(),
                                  reinterpret_cast<lapack_complex_double*>(z.data()), m, support.data());
  if (info != 0 || found != 3) throw NumericalError("solve_levels: zheevr failed (info=" + std::to_string(info) + ")");
  SpectrumResult r;
  r.e_g = w(0);
  r.e_e = w(1);
  r.e_f = w(2);
  r.vectors = z;
  r.basis_size = static_cast<int>(h.rows());
  return r;
}

/// |<a|op|b>| between columns of `vectors`.
inline double transition_element(const SpectrumResult& s, const Eigen::MatrixXcd& op, int a, int b) {
  return std::abs(s.vectors.col(a).dot(op * s.vectors.col(b)));
}

/// Spectrum plus the flux-drive g-f element. With `check_convergence` the
/// computation is repeated at 2m + 1 and the flag requires omega_ge to move
/// by less than 1e-8 relative.
inline SpectrumResult compute_spectrum(const CircuitParams& p, int m = kDefaultBasisSize, bool check_convergence = true) {
  SpectrumResult r = solve_levels(build_reduced_hamiltonian(p, m));
  r.matrix_element = transition_element(r, flux_drive_operator(p, m), kG, kF);
  if (check_convergence) {
    const SpectrumResult big = solve_levels(build_reduced_hamiltonian(p, 2 * m + 1));
    r.convergence_delta = std::abs(big.omega_ge() - r.omega_ge()) / std::abs(r.omega_ge());
    r.converged = r.convergence_delta < 1e-8;
  }
  return r;
}

/// |<g|D|f>| at flux f (rad/s).
inline double drive_matrix_element(CircuitParams p, double f, int m = kDefaultBasisSize) {
  p.f = f;
  return compute_spectrum(p, m, false).matrix_element;
}

struct PerturbativeLevels {
  double phi_min = 0.0;  // rad
  double u2 = 0.0;       // d2U/dphi2 at the minimum, rad/s
  double u4 = 0.0;       // d4U/dphi4, rad/s
  double phi_z = 0.0;    // zero-point spread
  double omega0 = 0.0;   // harmonic frequency, rad/s
  double e_e = 0.0;      // above E_g
  double e_f = 0.0;
  double quality_ratio = 0.0;  // |U4 phi_Z^4 / (4 omega0)|
};

/// U_m / E_J and its derivatives.
inline double reduced_potential(const CircuitParams& p, double phi) {
  return -2.0 * std::cos(phi) + p.alpha * std::cos(kTwoPi * p.f_b() + 2.0 * phi);
}

inline PerturbativeLevels harmonic_quartic_levels(const CircuitParams& p) {
  p.validate();
  const double th = kTwoPi * p.f_b();
  auto u = [&](double phi) { return reduced_potential(p, phi); };
  // Coarse scan for the global minimum, then Brent inside the bracketing cell.
  constexpr int kScan = 2000;
  const double h = kTwoPi / kScan;
  int best = 0;
  double best_u = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kScan; ++i) {
    const double v = u(-kPi + i * h);
    if (v < best_u) {
      best_u = v;
      best = i;
    }
  }
  int wells = 0;
  for (int i = 0; i < kScan; ++i) {
    const double v = u(-kPi + i * h);
    if (v < u(-kPi + ((i + kScan - 1) % kScan) * h) && v <= u(-kPi + ((i + 1) % kScan) * h)) ++wells;
  }
  if (wells != 1)
    throw std::invalid_argument("harmonic_quartic_levels: potential has " + std::to_string(wells) +
                                " wells per period; the single-well expansion does not apply");
  const double centre = -kPi + best * h;
  const auto [phi_min, u_min] = boost::math::tools::brent_find_minima(u, centre - h, centre + h, 52);
  (void)u_min;

  PerturbativeLevels r;
  r.phi_min = std::remainder(phi_min, kTwoPi);
  const double c1 = std::cos(r.phi_min);
  const double c2 = std::cos(th + 2.0 * r.phi_min);
  r.u2 = p.e_j * (2.0 * c1 - 4.0 * p.alpha * c2);
  r.u4 = p.e_j * (-2.0 * c1 + 16.0 * p.alpha * c2);
  if (!(r.u2 > 0.0))
    throw std::invalid_argument("harmonic_quartic_levels: flat minimum (zero curvature)");
  const double ek = p.e_k();
  const double phi_z4 = ek / r.u2;  // hbar^2 / (2 M_m U2) in reduced units
  r.phi_z = std::pow(phi_z4, 0.25);
  r.omega0 = std::sqrt(2.0 * ek * r.u2);
  const double quartic = r.u4 * phi_z4 / 4.0;
  r.e_e = r.omega0;
  r.e_f = 2.0 * r.omega0 + quartic;
  r.quality_ratio = std::abs(quartic / r.omega0);
  return r;
}

}  // namespace qbattery
