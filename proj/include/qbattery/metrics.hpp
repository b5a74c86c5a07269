#pragma once

// Charging figures of merit (tau_c, xi, S) and the thermodynamic cost of a
// drive protocol.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qbattery/errors.hpp"
#include "qbattery/pulses.hpp"
#include "qbattery/qutrit.hpp"

namespace qbattery {

/// Final ergotropy versus protocol duration, sampled at tau_i = i * dtau.
struct ChargingCurve {
  double dtau = 0.0;   // s
  double e_max = 0.0;  // rad/s
  std::vector<double> ergotropy;

  std::size_t size() const noexcept { return ergotropy.size(); }
  double tau(std::size_t i) const noexcept { return static_cast<double>(i) * dtau; }
  double tau_max() const noexcept { return tau(size() - 1); }
  double normalized(std::size_t i) const { return ergotropy.at(i) / e_max; }

  void validate() const {
    if (!(std::isfinite(dtau) && dtau > 0.0)) throw std::invalid_argument("ChargingCurve: dtau must be positive");
    if (!(std::isfinite(e_max) && e_max > 0.0)) throw std::invalid_argument("ChargingCurve: e_max must be positive");
    for (double e : ergotropy) {
      if (!(e >= -1e-9 * e_max && e <= e_max * (1.0 + 1e-6)))
        throw std::invalid_argument("ChargingCurve: ergotropy " + fmt_num(e) + " outside [0, E_max]");
    }
  }
};

/// Index of the first interior local maximum that reaches theta_min * E_max.
/// On a plateau the first index of the plateau is returned. nullopt means
/// the curve never charged.
inline std::optional<std::size_t> detect_tau_c(const ChargingCurve& curve, double theta_min) {
  curve.validate();
  if (curve.size() < 3) throw std::invalid_argument("detect_tau_c: need at least 3 samples");
  if (!(theta_min >= 0.0 && theta_min <= 1.0)) throw std::invalid_argument("detect_tau_c: theta_min outside [0, 1]");
  const auto& e = curve.ergotropy;
  const double floor = theta_min * curve.e_max;
  for (std::size_t i = 1; i + 1 < e.size(); ++i) {
    if (e[i] >= e[i - 1] && e[i] >= e[i + 1] && e[i] >= floor) return i;
  }
  return std::nullopt;
}

struct TailStats {
  double xi = 0.0;    // population standard deviation, rad/s
  double mean = 0.0;  // rad/s
  std::size_t n = 0;
};

inline constexpr std::size_t kMinTailSamples = 10;

/// Spread of the N samples after tau_c, N = floor((tau_max - tau_c)/dtau).
inline TailStats compute_xi(const ChargingCurve& curve, std::size_t tau_c_index) {
  if (tau_c_index >= curve.size()) throw std::invalid_argument("compute_xi: tau_c index past the end of the curve");
  const std::size_t n = curve.size() - 1 - tau_c_index;
  if (n < kMinTailSamples) {
    const double need = curve.tau(tau_c_index) + static_cast<double>(kMinTailSamples) * curve.dtau;
    throw std::invalid_argument("compute_xi: only " + std::to_string(n) + " samples after tau_c; need tau_max >= " +
                                fmt_num(need) + " s");
  }
  TailStats s;
  s.n = n;
  // Shifted by the first tail sample so that a constant tail gives exactly 0.
  const double ref = curve.ergotropy[tau_c_index + 1];
  double sum = 0.0;
  for (std::size_t i = 1; i <= n; ++i) sum += curve.ergotropy[tau_c_index + i] - ref;
  const double shift = sum / static_cast<double>(n);
  s.mean = ref + shift;
  double ss = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double d = curve.ergotropy[tau_c_index + i] - ref - shift;
    ss += d * d;
  }
  s.xi = std::sqrt(ss / static_cast<double>(n));
  return s;
}

/// S = 1 / ((tau_c / T_ref) (xi / E_max)), T_ref = 2 pi / Omega_max. A flat
/// tail gives +inf.
inline double s_metric(double tau_c, double xi, double omega_max, double e_max) {
  if (!(tau_c > 0.0)) throw std::invalid_argument("s_metric: tau_c must be positive");
  if (!(xi >= 0.0)) throw std::invalid_argument("s_metric: xi must be >= 0");
  if (!(omega_max > 0.0 && e_max > 0.0)) throw std::invalid_argument("s_metric: omega_max and e_max must be positive");
  const double denom = (tau_c * omega_max / kTwoPi) * (xi / e_max);
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / denom;
}

struct ChargingMetrics {
  bool charged = false;
  std::size_t tau_c_index = 0;
  double tau_c = std::numeric_limits<double>::quiet_NaN();  // s
  double xi = std::numeric_limits<double>::quiet_NaN();     // rad/s
  double mean = std::numeric_limits<double>::quiet_NaN();   // rad/s
  double s = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

inline ChargingMetrics evaluate_metrics(const ChargingCurve& curve, double theta_min, double omega_max) {
  ChargingMetrics m;
  const auto idx = detect_tau_c(curve, theta_min);
  if (!idx) return m;
  m.charged = true;
  m.tau_c_index = *idx;
  m.tau_c = curve.tau(*idx);
  const auto tail = compute_xi(curve, *idx);
  m.xi = tail.xi;
  m.mean = tail.mean;
  m.n = tail.n;
  m.s = s_metric(m.tau_c, m.xi, omega_max, curve.e_max);
  return m;
}

struct ThermoReport {
  double sigma_tau = 0.0;    // time-averaged Hilbert-Schmidt norm, rad/s
  double sigma_abs = 0.0;    // omega_ge + omega_ef
  double sigma_total = 0.0;  // sigma_abs + sigma_tau
  double mu = 1.0;
};

/// Composite Simpson average of sqrt(2) * sqrt(sum Omega^2) over [0, tau].
inline ThermoReport thermo_cost(const EnvelopeSpec& spec, const LevelEnergies& levels, int points = 2001) {
  spec.validate();
  if (points < 2001) throw std::invalid_argument("thermo_cost: need at least 2001 quadrature points");
  if (points % 2 == 0) ++points;
  const int intervals = points - 1;
  const double h = spec.tau / intervals;
  double acc = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double t = (i == intervals) ? spec.tau : i * h;
    const auto d = sample_envelopes(spec, t);
    const double norm = std::sqrt(2.0) *
                        std::sqrt(d.omega_ge * d.omega_ge + d.omega_ef * d.omega_ef + d.omega_gf * d.omega_gf);
    const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * norm;
  }
  ThermoReport r;
  r.sigma_tau = (acc * h / 3.0) / spec.tau;
  r.sigma_abs = levels.omega_ge() + levels.omega_ef();
  r.sigma_total = r.sigma_abs + r.sigma_tau;
  r.mu = r.sigma_abs / r.sigma_total;
  return r;
}

}  // namespace qbattery
