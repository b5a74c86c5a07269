#include <cmath>
#include <random>

#include "qbattery/calibration.hpp"
#include "qbattery/tomography.hpp"


// glog (via Ceres) defines CHECK; Catch2 must own it in this file.
#undef CHECK
#include <catch2/catch_amalgamated.hpp>

using namespace qbattery;
using Catch::Approx;

TEST_CASE("rotation set") {
  const auto s = rotation_set();
  CHECK((s.lambda[0] - Matrix3::Identity()).norm() == 0.0);
  const Complex j(0.0, 1.0);
  Matrix3 l4;
  l4 << 0.0, -j, 0.0, -j, 0.0, 0.0, 0.0, 0.0, 1.0;
  CHECK((s.lambda[3] - l4).norm() == 0.0);
  for (const auto& l : s.lambda) CHECK((l.adjoint() * l - Matrix3::Identity()).norm() < 1e-12);
}

TEST_CASE("readout probabilities") {
  const auto s = rotation_set();
  const auto g = readout_probabilities(DensityMatrix3::basis(kG).matrix(), s.lambda[0]);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.0);
  for (const auto& l : s.lambda) {
    const auto p = readout_probabilities(DensityMatrix3::maximally_mixed().matrix(), l);
    for (double x : p) CHECK(x == Approx(1.0 / 3.0));
  }
  const auto f9 = readout_probabilities(DensityMatrix3::basis(kF).matrix(), s.lambda[8]);
  CHECK(*std::max_element(f9.begin(), f9.end()) == Approx(1.0));
}

TEST_CASE("shot simulation is seeded") {
  const auto rho = DensityMatrix3::maximally_mixed();
  const auto a = simulate_tomography(rho, 1000, 42), b = simulate_tomography(rho, 1000, 42);
  const auto c = simulate_tomography(rho, 1000, 43);
  CHECK(a.counts == b.counts);
  CHECK(a.counts != c.counts);
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("maximum-likelihood reconstruction") {
  SECTION("exact probabilities, random states") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
      const auto rho = random_density_matrix(rng);
      const auto mle = mle_reconstruct(simulate_tomography(rho, 0, 0));
      CHECK(fidelity(rho.matrix(), mle.rho) >= 1.0 - 1e-6);
    }
  }
  SECTION("exact probabilities, pure states") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 10; ++i) {
      const auto psi = random_pure_state(rng);
      const DensityMatrix3 rho(psi);
      CHECK(fidelity(rho.matrix(), mle_reconstruct(simulate_tomography(rho, 0, 0)).rho) >= 1.0 - 1e-6);
    }
  }
  SECTION("maximally mixed is a fixed point") {
    const auto mle = mle_reconstruct(simulate_tomography(DensityMatrix3::maximally_mixed(), 0, 0));
    CHECK((mle.rho - Matrix3::Identity() / 3.0).cwiseAbs().maxCoeff() < 1e-6);
  }
  SECTION("10^4 shots on |f>") {
    const auto rho = DensityMatrix3::basis(kF);
    const auto mle = mle_reconstruct(simulate_tomography(rho, 10000, 11));
    CHECK(fidelity(rho.matrix(), mle.rho) >= 0.99);
    CHECK_NOTHROW(mle.state());
  }
}

TEST_CASE("tomography record JSON round trip") {
  const auto rec = simulate_tomography(DensityMatrix3::basis(kE), 500, 3);
  const auto back = tomography_record_from_json(to_json(rec));
  CHECK(back.counts == rec.counts);
  CHECK(back.shots == 500);
  auto j = to_json(rec);
  j["settings"][0]["counts"][0] = 1;  // no longer sums to the shot count
  CHECK_THROWS_AS(tomography_record_from_json(j), std::invalid_argument);
}

namespace {

std::vector<double> time_grid(double t_max, int n) {
  std::vector<double> t;
  for (int i = 0; i < n; ++i) t.push_back(t_max * i / (n - 1));
  return t;
}

}  // namespace

TEST_CASE("decay-rate fits") {
  SECTION("noiseless synthetic data") {
    for (const auto& truth : {sweet_spot_rates(), charging_bias_rates()}) {
      const auto fit = fit_decay_rates(synthetic_decay_series(truth, time_grid(from_us(100.0), 201)));
      CHECK(fit.converged);
      CHECK(fit.rates.gamma_eg == Approx(truth.gamma_eg).epsilon(0.01));
      CHECK(fit.rates.gamma_fe == Approx(truth.gamma_fe).epsilon(0.01));
      CHECK(fit.rates.gamma_fg == Approx(truth.gamma_fg).epsilon(0.01));
      CHECK(fit.coverage >= 3.0);
    }
  }
  SECTION("zero rates give flat data and a zero fit") {
    const auto fit = fit_decay_rates(synthetic_decay_series({}, time_grid(from_us(10.0), 50)));
    CHECK(fit.rates.all_zero());
  }
  SECTION("short record is flagged through its coverage") {
    const auto fit = fit_decay_rates(synthetic_decay_series(charging_bias_rates(), time_grid(from_us(5.0), 50)));
    CHECK(fit.coverage < 3.0);
  }
  SECTION("malformed series") {
    DecaySeries s = synthetic_decay_series(sweet_spot_rates(), time_grid(from_us(10.0), 10));
    s.t[3] = s.t[2];
    CHECK_THROWS_AS(fit_decay_rates(s), std::invalid_argument);
    s = synthetic_decay_series(sweet_spot_rates(), time_grid(from_us(10.0), 10));
    s.p_e.pop_back();
    CHECK_THROWS_AS(fit_decay_rates(s), std::invalid_argument);
  }
}

TEST_CASE("Rabi peak-time fit") {
  const std::vector<double> omega{1e7, 2e7, 3e7, 5e7};
  std::vector<double> t1;
  for (double w : omega) t1.push_back(kPi / (2.0 * w));
  CHECK(rabi_first_peak_fit(omega, t1).coupling == Approx(1.0));

  std::vector<double> doubled, t_half;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    doubled.push_back(2.0 * omega[i]);
    t_half.push_back(t1[i] / 2.0);
  }
  CHECK(rabi_first_peak_fit(doubled, t_half).coupling == Approx(1.0));

  std::mt19937_64 rng(5);
  std::vector<double> many, noisy;
  for (int i = 0; i < 40; ++i) {
    const double w = 1e7 * (1.0 + 0.1 * i);
    many.push_back(w);
    noisy.push_back(kPi / (2.0 * 0.7 * w) * (1.0 + 0.01 * standard_normal(rng)));
  }
  CHECK(rabi_first_peak_fit(many, noisy).coupling == Approx(0.7).epsilon(0.02));
  CHECK_THROWS_AS(rabi_first_peak_fit({1.0, 1.0}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(rabi_first_peak_fit({1.0}, {1.0}), std::invalid_argument);
}
