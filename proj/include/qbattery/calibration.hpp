#pragma once

// Fits against calibration data: decay rates from free-decay population
// curves, and the drive coupling from first Rabi peak times.

#include <ceres/ceres.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "qbattery/errors.hpp"
#include "qbattery/evolution.hpp"

namespace qbattery {

/// Populations after preparing |f> at t = 0.
struct DecaySeries {
  std::vector<double> t;  // s
  std::vector<double> p_g;
  std::vector<double> p_e;
  std::vector<double> p_f;

  void validate() const {
    const auto n = t.size();
    if (n < 4) throw std::invalid_argument("DecaySeries: need at least 4 samples");
    if (p_g.size() != n || p_e.size() != n || p_f.size() != n)
      throw std::invalid_argument("DecaySeries: population columns differ in length from t");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(std::isfinite(t[i]) && t[i] >= 0.0)) throw std::invalid_argument("DecaySeries: times must be >= 0");
      if (i > 0 && !(t[i] > t[i - 1])) throw std::invalid_argument("DecaySeries: times must increase");
      if (!(std::isfinite(p_g[i]) && std::isfinite(p_e[i]) && std::isfinite(p_f[i])))
        throw std::invalid_argument("DecaySeries: non-finite population");
    }
  }
};

/// Samples the closed-form cascade on a time grid.
inline DecaySeries synthetic_decay_series(const DecayRates& rates, const std::vector<double>& times) {
  DecaySeries s;
  for (double t : times) {
    const Populations p = cascade_populations(rates, t);
    s.t.push_back(t);
    s.p_g.push_back(p.g);
    s.p_e.push_back(p.e);
    s.p_f.push_back(p.f);
  }
  return s;
}

struct CalibrationFit {
  DecayRates rates;
  std::array<double, 3> sigma{};  // 1-sigma from the Gauss-Newton covariance, 1/s
  double rms_residual = 0.0;
  bool converged = false;
  bool well_conditioned = true;
  /// t_max times the slower of the two model exponents; at least 3 is asked for.
  double coverage = 0.0;
  std::string message;
};

namespace detail {

// Ceres 2.0 jets have no expm1.
inline double expm1_any(double x) { return std::expm1(x); }
template <class T, int N>
ceres::Jet<T, N> expm1_any(const ceres::Jet<T, N>& x) {
  return ceres::Jet<T, N>(std::expm1(x.a), std::exp(x.a) * x.v);
}

// Works in units of the series length so that parameters are O(1).
struct DecayResidual {
  double t;
  double pe;
  double pf;

  template <class T>
  bool operator()(const T* const g, T* r) const {
    using std::abs;
    using std::exp;
    const T& eg = g[0];
    const T& fe = g[1];
    const T& fg = g[2];
    const T k = fe + fg;
    const T lo = k < eg ? k : eg;
    const T d = abs(k - eg);
    const T dt = d * t;
    const T ratio = (dt < T(1e-12)) ? T(t) * (T(1.0) - T(0.5) * dt) : -expm1_any(-dt) / d;
    r[0] = fe * exp(-lo * t) * ratio - pe;
    r[1] = exp(-k * t) - pf;
    return true;
  }
};

}  // namespace detail

/// Bounded (rates >= 0) nonlinear least squares of P_e and P_f against the
/// cascade model. P_g carries no extra information once P_e and P_f are
/// fitted (the three sum to one) and is left out of the residual.
inline CalibrationFit fit_decay_rates(const DecaySeries& data) {
  data.validate();
  CalibrationFit fit;
  const double t_scale = data.t.back();
  if (!(t_scale > 0.0)) throw std::invalid_argument("fit_decay_rates: series has zero length");

  double flat = 0.0;
  for (std::size_t i = 0; i < data.t.size(); ++i) flat = std::max({flat, std::abs(data.p_f[i] - 1.0), std::abs(data.p_e[i])});
  if (flat < 1e-12) {
    fit.converged = true;
    fit.message = "flat populations: no decay";
    return fit;
  }

  // Start: total f decay from a log-linear fit of P_f, split evenly.
  double sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < data.t.size(); ++i) {
    if (data.p_f[i] > 1e-3 && data.p_f[i] <= 1.0) {
      const double x = data.t[i] / t_scale;
      sxx += x * x;
      sxy += x * std::log(data.p_f[i]);
      ++n;
    }
  }
  double k0 = (n >= 2 && sxx > 0.0) ? std::max(1e-3, -sxy / sxx) : 1.0;
  double g[3] = {0.7 * k0, 0.5 * k0, 0.5 * k0};

  ceres::Problem problem;
  for (std::size_t i = 0; i < data.t.size(); ++i) {
    auto* cost = new ceres::AutoDiffCostFunction<detail::DecayResidual, 2, 3>(
        new detail::DecayResidual{data.t[i] / t_scale, data.p_e[i], data.p_f[i]});
    problem.AddResidualBlock(cost, nullptr, g);
  }
  for (int j = 0; j < 3; ++j) problem.SetParameterLowerBound(g, j, 0.0);

  ceres::Solver::Options options;
  options.linear_solver_type = ceres::DENSE_QR;
  options.max_num_iterations = 500;
  options.function_tolerance = 1e-16;
  options.gradient_tolerance = 1e-16;
  options.parameter_tolerance = 1e-14;
  options.logging_type = ceres::SILENT;
  options.num_threads = 1;
  ceres::Solver::Summary summary;
  ceres::Solve(options, &problem, &summary);

  fit.converged = summary.termination_type == ceres::CONVERGENCE;
  fit.message = summary.BriefReport();
  fit.rates = {g[0] / t_scale, g[1] / t_scale, g[2] / t_scale};
  fit.rms_residual = std::sqrt(2.0 * summary.final_cost / (2.0 * static_cast<double>(data.t.size())));
  fit.coverage = t_scale * std::min(fit.rates.gamma_eg, fit.rates.gamma_fe + fit.rates.gamma_fg);

  ceres::Covariance::Options copt;
  copt.algorithm_type = ceres::DENSE_SVD;
  copt.null_space_rank = -1;
  copt.min_reciprocal_condition_number = 1e-14;
  ceres::Covariance cov(copt);
  std::vector<std::pair<const double*, const double*>> blocks{{g, g}};
  double c[9];
  if (cov.Compute(blocks, &problem) && cov.GetCovarianceBlock(g, g, c)) {
    // Scale by the residual variance; noiseless data gives ~0 sigma.
    const double dof = std::max(1.0, 2.0 * static_cast<double>(data.t.size()) - 3.0);
    const double s2 = 2.0 * summary.final_cost / dof;
    for (int j = 0; j < 3; ++j) fit.sigma[j] = std::sqrt(std::max(0.0, c[4 * j] * s2)) / t_scale;
  } else {
    fit.well_conditioned = false;
    fit.sigma.fill(std::numeric_limits<double>::quiet_NaN());
  }
  return fit;
}

struct RabiFit {
  double coupling = 0.0;  // A * m, dimensionless
  double rms_residual = 0.0;  // s
};

/// First Rabi maximum t1 = pi / (2 Omega0 A m): least squares of t1 on
/// 1/Omega0 through the origin. A and m are only identifiable as a product.
inline RabiFit rabi_first_peak_fit(const std::vector<double>& omega0, const std::vector<double>& t1) {
  if (omega0.size() != t1.size()) throw std::invalid_argument("rabi_first_peak_fit: size mismatch");
  if (omega0.size() < 2) throw std::invalid_argument("rabi_first_peak_fit: need at least 2 points");
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < omega0.size(); ++i) {
    if (!(std::isfinite(omega0[i]) && omega0[i] > 0.0)) throw std::invalid_argument("rabi_first_peak_fit: amplitudes must be positive");
    if (!(std::isfinite(t1[i]) && t1[i] > 0.0)) throw std::invalid_argument("rabi_first_peak_fit: peak times must be positive");
    const double x = 1.0 / omega0[i];
    sxx += x * x;
    sxy += x * t1[i];
  }
  const auto [lo, hi] = std::minmax_element(omega0.begin(), omega0.end());
  if (*hi - *lo <= 1e-12 * *hi) throw std::invalid_argument("rabi_first_peak_fit: need at least 2 distinct amplitudes");
  const double slope = sxy / sxx;  // = pi / (2 A m)
  RabiFit fit;
  fit.coupling = kPi / (2.0 * slope);
  double ss = 0.0;
  for (std::size_t i = 0; i < omega0.size(); ++i) {
    const double r = t1[i] - slope / omega0[i];
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(omega0.size()));
  return fit;
}

}  // namespace qbattery
