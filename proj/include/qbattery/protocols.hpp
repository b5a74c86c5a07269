#pragma once

// Experiment orchestration: charging curves over protocol duration, eta and
// phase sweeps scored by S, and the speed-limit protocol with its detuning
// cutoff.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qbattery/errors.hpp"
#include "qbattery/evolution.hpp"
#include "qbattery/metrics.hpp"
#include "qbattery/pulses.hpp"
#include "qbattery/qutrit.hpp"

namespace qbattery {

/// lo, lo + step, ..., hi (hi included when it lies on the grid to 1e-9 steps).
inline std::vector<double> uniform_grid(double lo, double hi, double step) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && std::isfinite(step)))
    throw std::invalid_argument("uniform_grid: non-finite bound");
  if (hi < lo) throw std::invalid_argument("uniform_grid: hi < lo");
  if (hi == lo) return {lo};
  if (!(step > 0.0)) throw std::invalid_argument("uniform_grid: step must be positive");
  const auto n = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(n) + 1);
  for (long long i = 0; i <= n; ++i) g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

/// Runs fn(0..n-1) on up to `threads` workers. Results must be written by
/// index so the outcome does not depend on scheduling. The exception of the
/// lowest failing index is rethrown.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct CurveOptions {
  LevelEnergies levels = charging_bias_levels();
  std::optional<DecayRates> rates;  // Lindblad when set
  double dt = 0.0;                  // 0 = per-tau default
};

struct CurveRun {
  ChargingCurve curve;
  /// Largest population of each level seen at any time in any of the runs.
  Eigen::Vector3d peak_population = Eigen::Vector3d::Zero();
};

/// One protocol of duration tau_i = i * dtau for each grid point, ergotropy
/// taken at the end of each. tau = 0 is the undriven battery.
inline CurveRun charging_curve_run(const EnvelopeSpec& tmpl, double dtau, double tau_max,
                                   const CurveOptions& opt = {}) {
  if (!(std::isfinite(dtau) && dtau > 0.0)) throw std::invalid_argument("charging_curve: dtau must be positive");
  if (!(std::isfinite(tau_max) && tau_max >= 0.0)) throw std::invalid_argument("charging_curve: tau_max must be >= 0");
  if (opt.rates) opt.rates->validate();
  const auto n = static_cast<std::size_t>(std::floor(tau_max / dtau + 1e-9)) + 1;
  CurveRun run;
  run.curve.dtau = dtau;
  run.curve.e_max = opt.levels.max_ergotropy();
  run.curve.ergotropy.assign(n, 0.0);
  run.peak_population(kG) = 1.0;
  EvolveOptions eo;
  eo.record = RecordMode::endpoints;
  eo.dt = opt.dt;
  for (std::size_t i = 1; i < n; ++i) {
    const EnvelopeSpec spec = tmpl.with_tau(static_cast<double>(i) * dtau);
    const Trajectory tr = opt.rates ? evolve_lindblad(spec, DensityMatrix3::basis(kG), *opt.rates, eo)
                                    : evolve_unitary(spec, PureState3::basis(kG), eo);
    run.curve.ergotropy[i] = tr.final_ergotropy(opt.levels);
    run.peak_population = run.peak_population.cwiseMax(tr.peak_population);
  }
  return run;
}

inline ChargingCurve charging_curve(const EnvelopeSpec& tmpl, double dtau, double tau_max,
                                    const CurveOptions& opt = {}) {
  return charging_curve_run(tmpl, dtau, tau_max, opt).curve;
}

struct SweepConfig {
  Constraint constraint = Constraint::square_sum;
  std::vector<double> eta_grid = uniform_grid(0.0, 0.4, 0.02);
  std::vector<double> phi_grid = uniform_grid(-kPi, kPi, kPi / 12.0);
  double eta = 0.0;  // fixed eta of the phase sweep
  double phi = 0.0;  // fixed carrier phase of the eta sweep
  double tau_max = from_ns(1000.0);
  double dtau = from_ns(4.0);
  double omega_max = from_mhz(10.0);
  double theta_min = 0.8;
  std::uint64_t seed = 0;
  CurveOptions curve;

  void validate() const {
    if (!(std::isfinite(omega_max) && omega_max > 0.0)) throw std::invalid_argument("SweepConfig: omega_max must be positive");
    if (!(std::isfinite(dtau) && dtau > 0.0)) throw std::invalid_argument("SweepConfig: dtau must be positive");
    if (!(std::isfinite(tau_max) && tau_max >= 20.0 / omega_max))
      throw std::invalid_argument("SweepConfig: tau_max must be >= 20/omega_max = " + fmt_num(20.0 / omega_max) + " s");
    if (!(theta_min >= 0.0 && theta_min <= 1.0)) throw std::invalid_argument("SweepConfig: theta_min outside [0, 1]");
    if (!std::isfinite(phi)) throw std::invalid_argument("SweepConfig: phi must be finite");
    if (tau_max < dtau * static_cast<double>(kMinTailSamples + 2))
      throw std::invalid_argument("SweepConfig: tau grid too short for the tail statistics");
  }

  EnvelopeSpec template_spec(double eta_value, double phi_value) const {
    EnvelopeSpec s{cd_kind(constraint), omega_max, tau_max, eta_value, phi_value};
    s.validate();
    return s;
  }
};

struct SweepRow {
  double param = 0.0;  // eta or phi
  ChargingMetrics metrics;
  bool failed = false;  // integrator gave up on this point; metrics stay empty
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<std::size_t> best;  // row index of the S maximum
};

namespace detail {

// Highest S among charged rows; ties go to the row preferred by `better_tie`.
template <class Tie>
std::optional<std::size_t> argmax_s(const std::vector<SweepRow>& rows, Tie better_tie) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].metrics.charged) continue;
    if (!best) {
      best = i;
      continue;
    }
    const double s = rows[i].metrics.s;
    const double b = rows[*best].metrics.s;
    if (s > b || (s == b && better_tie(rows[i].param, rows[*best].param))) best = i;
  }
  return best;
}

inline SweepResult run_sweep(const SweepConfig& cfg, const std::vector<double>& grid, bool over_eta,
                             unsigned threads) {
  SweepResult res;
  res.rows.resize(grid.size());
  // Validate every template before spending time on any simulation.
  for (double p : grid) (void)(over_eta ? cfg.template_spec(p, cfg.phi) : cfg.template_spec(cfg.eta, p));
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    const double p = grid[i];
    res.rows[i].param = p;
    const EnvelopeSpec tmpl = over_eta ? cfg.template_spec(p, cfg.phi) : cfg.template_spec(cfg.eta, p);
    try {
      const ChargingCurve curve = charging_curve(tmpl, cfg.dtau, cfg.tau_max, cfg.curve);
      res.rows[i].metrics = evaluate_metrics(curve, cfg.theta_min, cfg.omega_max);
    } catch (const NumericalError& e) {
      // One bad grid point is reported on its row instead of sinking the sweep.
      res.rows[i].failed = true;
      res.rows[i].error = e.what();
    }
  });
  return res;
}

}  // namespace detail

/// S versus eta for the counterdiabatic family of the configured constraint.
/// Ties in S go to the smaller eta.
inline SweepResult sweep_eta(const SweepConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  if (cfg.eta_grid.empty()) throw std::invalid_argument("sweep_eta: empty eta grid");
  auto res = detail::run_sweep(cfg, cfg.eta_grid, true, threads);
  res.best = detail::argmax_s(res.rows, [](double a, double b) { return a < b; });
  return res;
}

/// S versus carrier phase at fixed eta. Ties in S go to the smaller |phi|.
inline SweepResult sweep_phase(const SweepConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  if (cfg.phi_grid.empty()) throw std::invalid_argument("sweep_phase: empty phi grid");
  for (double p : cfg.phi_grid) {
    if (!std::isfinite(p)) throw std::invalid_argument("sweep_phase: non-finite phase");
  }
  auto res = detail::run_sweep(cfg, cfg.phi_grid, false, threads);
  res.best = detail::argmax_s(res.rows, [](double a, double b) { return std::abs(a) < std::abs(b); });
  return res;
}

/// Detuning window of the speed-limit protocol: resonant until tau_protect,
/// detuned by delta_after from then until `total`.
struct ProtectionConfig {
  double tau_protect = 0.0;  // s
  double delta_after = 0.0;  // rad/s
  double total = 0.0;        // s

  void validate() const {
    if (!(std::isfinite(total) && total > 0.0)) throw std::invalid_argument("ProtectionConfig: total must be positive");
    if (!(tau_protect >= 0.0 && tau_protect <= total))
      throw std::invalid_argument("ProtectionConfig: need 0 <= tau_protect <= total");
    if (!std::isfinite(delta_after)) throw std::invalid_argument("ProtectionConfig: delta_after must be finite");
  }
};

inline double qsl_transfer_time(double omega_max) { return kPi / (2.0 * omega_max); }

inline ProtectionConfig default_protection(double omega_max) {
  return {qsl_transfer_time(omega_max), from_mhz(48.0), from_ns(200.0)};
}

/// Lowest P_f reachable once a resonant g-f drive of strength Omega is
/// detuned by Delta while the battery sits in |f>: 1 - 4 Omega^2 / (Delta^2 + 4 Omega^2).
inline double protection_floor(double omega, double delta) {
  return 1.0 - 4.0 * omega * omega / (delta * delta + 4.0 * omega * omega);
}

struct QslRun {
  Trajectory trajectory;
  ChargingCurve curve;  // ergotropy along the trajectory on the sampling grid
  ChargingMetrics metrics;
  double floor = 0.0;
  double min_after = std::numeric_limits<double>::quiet_NaN();  // min E/E_max for t > tau_protect
  double max_after = std::numeric_limits<double>::quiet_NaN();
};

/// Constant direct g-f drive at full amplitude with the detuning cutoff. The
/// drive is time independent, so ergotropy along one trajectory equals the
/// end-of-protocol charging curve.
inline QslRun run_qsl_protocol(double omega_max, const ProtectionConfig& prot,
                               const LevelEnergies& levels = charging_bias_levels(),
                               double sample_interval = from_ns(1.0), double theta_min = 0.8) {
  prot.validate();
  if (!(sample_interval > 0.0)) throw std::invalid_argument("run_qsl_protocol: sample interval must be positive");
  EnvelopeSpec spec{EnvelopeKind::qsl_square, omega_max, prot.total, 0.0, 0.0};
  EvolveOptions eo;
  eo.detuning = DetuningSchedule::step(prot.tau_protect, 0.0, prot.delta_after);
  eo.record = RecordMode::interval;
  eo.record_interval = sample_interval;

  QslRun run;
  run.trajectory = evolve_unitary(spec, PureState3::basis(kG), eo);
  const auto& tr = run.trajectory;
  run.curve.dtau = sample_interval;
  run.curve.e_max = levels.max_ergotropy();
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double k = tr.times[i] / sample_interval;
    if (std::abs(k - std::round(k)) > 1e-6) continue;  // off-grid end point
    run.curve.ergotropy.push_back(tr.ergotropy(i, levels));
  }
  run.floor = prot.delta_after == 0.0 ? 0.0 : protection_floor(omega_max, prot.delta_after);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.times[i] <= prot.tau_protect * (1.0 + 1e-9)) continue;
    const double e = tr.ergotropy(i, levels) / levels.max_ergotropy();
    run.min_after = std::isnan(run.min_after) ? e : std::min(run.min_after, e);
    run.max_after = std::isnan(run.max_after) ? e : std::max(run.max_after, e);
  }
  if (run.curve.size() >= 3) {
    if (const auto idx = detect_tau_c(run.curve, theta_min)) {
      run.metrics.charged = true;
      run.metrics.tau_c_index = *idx;
      run.metrics.tau_c = run.curve.tau(*idx);
      if (run.curve.size() - 1 - *idx >= kMinTailSamples) {
        const auto tail = compute_xi(run.curve, *idx);
        run.metrics.xi = tail.xi;
        run.metrics.mean = tail.mean;
        run.metrics.n = tail.n;
        run.metrics.s = s_metric(run.metrics.tau_c, tail.xi, omega_max, run.curve.e_max);
      }
    }
  }
  return run;
}

/// Mandelstam-Tamm style bound arccos|<psi|phi>| / min(E, dE).
inline double qsl_time(const PureState3& psi, const PureState3& target, double e_avg, double delta_e) {
  const double denom = std::min(e_avg, delta_e);
  if (!(std::isfinite(denom) && denom > 0.0)) throw std::invalid_argument("qsl_time: min(E, dE) must be positive");
  const double overlap = std::min(1.0, std::abs(psi.amplitudes().dot(target.amplitudes())));
  return std::acos(overlap) / denom;
}

struct QslBoundReport {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double max_excess = -std::numeric_limits<double>::infinity();  // max of (d|a|/dt - Omega cos theta) / Omega
  double max_theta_rate = 0.0;  // max |dtheta/dt| / Omega
  double min_saturation = std::numeric_limits<double>::quiet_NaN();  // min (d|a|/dt)/(Omega cos theta) where cos theta > 0.1
  double max_saturation = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> first_passage;  // first sample with P_f >= threshold
  double qsl_bound = 0.0;               // pi / (2 Omega_max) - 2 dt
  bool passage_ok = true;

  bool ok() const { return violations == 0 && passage_ok; }
};

/// Checks d|a|/dt <= Omega_max cos(theta), sin(theta) = |a|, between every
/// pair of samples, and that P_f never reaches `pf_threshold` before the
/// speed limit. Needs every-step (or similarly dense) recording.
inline QslBoundReport verify_qsl_bound(const Trajectory& tr, double pf_threshold = 1.0 - 1e-6) {
  if (!tr.pure) throw std::invalid_argument("verify_qsl_bound: needs a unitary trajectory");
  if (tr.size() < 2) throw std::invalid_argument("verify_qsl_bound: need at least 2 samples");
  const double w = tr.spec.omega_max;
  const double slack = 1e-6;
  QslBoundReport rep;
  rep.qsl_bound = qsl_transfer_time(w) - 2.0 * tr.dt;
  auto amp = [&](std::size_t i) { return std::min(1.0, std::abs(tr.psi[i](kF))); };
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.population(i, kF) >= pf_threshold) {
      rep.first_passage = tr.times[i];
      break;
    }
  }
  if (rep.first_passage) rep.passage_ok = *rep.first_passage >= rep.qsl_bound;
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    const double h = tr.times[i + 1] - tr.times[i];
    const double a0 = amp(i);
    const double a1 = amp(i + 1);
    const double th0 = std::asin(a0);
    const double th1 = std::asin(a1);
    const double rate = (a1 - a0) / h;
    const double cos_hi = std::max(std::cos(th0), std::cos(th1));
    const double excess = (rate - w * cos_hi) / w;
    ++rep.checked;
    rep.max_excess = std::max(rep.max_excess, excess);
    if (excess > slack) ++rep.violations;
    rep.max_theta_rate = std::max(rep.max_theta_rate, std::abs(th1 - th0) / h / w);
    const double cos_mid = std::cos(0.5 * (th0 + th1));
    if (cos_mid > 0.1) {
      const double sat = rate / (w * cos_mid);
      rep.min_saturation = std::isnan(rep.min_saturation) ? sat : std::min(rep.min_saturation, sat);
      rep.max_saturation = std::isnan(rep.max_saturation) ? sat : std::max(rep.max_saturation, sat);
    }
  }
  return rep;
}

}  // namespace qbattery
