#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "qbattery/circuit.hpp"

using namespace qbattery;
using Catch::Approx;

namespace {

// Real-space oracle: -E_K d^2/dphi^2 + E_J u(phi) on a periodic grid with the
// sixth-order central second difference.
Eigen::Vector3d finite_difference_levels(const CircuitParams& p, int n = 600) {
  const double h = kTwoPi / n;
  const double c[4] = {-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0};
  const double ek = p.e_k();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double phi = -kPi + i * h;
    m(i, i) = -ek * c[0] / (h * h) + p.e_j * reduced_potential(p, phi);
    for (int k = 1; k <= 3; ++k) {
      m(i, (i + k) % n) += -ek * c[k] / (h * h);
      m(i, (i - k + n) % n) += -ek * c[k] / (h * h);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().head<3>();
}

}  // namespace

TEST_CASE("circuit parameters") {
  const auto p = paper_circuit();
  CHECK(to_ghz(p.e_j) == Approx(43.71).epsilon(1e-3));
  CHECK(to_ghz(p.e_k()) == Approx(0.3605).epsilon(1e-3));
  CHECK(p.beta() == Approx(5.0));
  CHECK(p.in_single_well_region());
  CircuitParams bad = p;
  bad.c_j = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(check_basis_size(200), std::invalid_argument);
  CHECK_THROWS_AS(check_basis_size(101), std::invalid_argument);
  CHECK_NOTHROW(check_basis_size(201));
}

TEST_CASE("plane-wave spectrum against the real-space oracle") {
  for (double alpha : {0.0, 0.471}) {
    for (double f : {0.5, 0.496}) {
      auto p = paper_circuit(f);
      p.alpha = alpha;
      const auto s = compute_spectrum(p);
      const auto fd = finite_difference_levels(p);
      CHECK(s.omega_ge() == Approx(fd(1) - fd(0)).epsilon(1e-6));
      CHECK(s.omega_gf() == Approx(fd(2) - fd(0)).epsilon(1e-6));
      CHECK(s.converged);
    }
  }
}

TEST_CASE("parity symmetry at the sweet spot") {
  const auto h = build_reduced_hamiltonian(paper_circuit(0.5), 201);
  const int m = 201;
  double worst = 0.0;
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k) worst = std::max(worst, std::abs(h(j, k) - h(m - 1 - j, m - 1 - k)));
  CHECK(worst < 1e-6 * h.cwiseAbs().maxCoeff());
}

TEST_CASE("spectrum and drive element are even in the flux offset") {
  const auto a = compute_spectrum(paper_circuit(0.496), kDefaultBasisSize, false);
  const auto b = compute_spectrum(paper_circuit(0.504), kDefaultBasisSize, false);
  CHECK(a.omega_ge() == Approx(b.omega_ge()).epsilon(1e-10));
  CHECK(a.omega_gf() == Approx(b.omega_gf()).epsilon(1e-10));
  CHECK(a.matrix_element == Approx(b.matrix_element).epsilon(1e-8));
}

TEST_CASE("g-f selection rule") {
  const auto p = paper_circuit();
  const auto s = compute_spectrum(p);
  CHECK(s.matrix_element < 1e-10 * flux_drive_scale(p));
  CHECK(s.anharmonicity() > 0.0);
  CHECK(drive_matrix_element(p, 0.496) > 1e-4 * flux_drive_scale(p));
  // The charge operator has the same selection rule.
  CHECK(transition_element(s, charge_operator(), kG, kF) < 1e-10 * 200.0);
  CHECK(transition_element(s, charge_operator(), kG, kE) > 0.1);
}

TEST_CASE("harmonic plus quartic expansion") {
  SECTION("symmetric minimum at the sweet spot") {
    const auto r = harmonic_quartic_levels(paper_circuit(0.5));
    CHECK(std::abs(r.phi_min) < 1e-7);
    CHECK(r.u4 > 0.0);
  }
  SECTION("deep cosine well") {
    auto p = paper_circuit(0.5);
    p.alpha = 0.0;
    const auto r = harmonic_quartic_levels(p);
    const auto s = compute_spectrum(p);
    CHECK(r.quality_ratio < 0.05);
    CHECK(r.e_e == Approx(s.omega_ge()).epsilon(0.02));
    CHECK(r.omega0 == Approx(std::sqrt(2.0 * p.e_k() * 2.0 * p.e_j)));
  }
  SECTION("agreement whenever the expansion is good") {
    for (double alpha : {0.0, 0.05, 0.1, 0.2, 0.3}) {
      for (double f : {0.5, 0.496}) {
        auto p = paper_circuit(f);
        p.alpha = alpha;
        const auto r = harmonic_quartic_levels(p);
        if (r.quality_ratio >= 0.05) continue;
        CHECK(r.e_e == Approx(compute_spectrum(p, kDefaultBasisSize, false).omega_ge()).epsilon(0.05));
      }
    }
  }
  SECTION("double well is rejected") {
    auto p = paper_circuit(0.5);
    p.alpha = 0.8;
    CHECK_THROWS_AS(harmonic_quartic_levels(p), std::invalid_argument);
  }
}
