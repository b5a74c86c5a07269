#pragma once

// Turns a validated ExperimentConfig into a ResultTable.

#include <chrono>
#include <cmath>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "qbattery/calibration.hpp"
#include "qbattery/circuit.hpp"
#include "qbattery/cli/config.hpp"
#include "qbattery/cli/table.hpp"
#include "qbattery/metrics.hpp"
#include "qbattery/protocols.hpp"
#include "qbattery/tomography.hpp"

namespace qbattery::cli {

namespace detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline json metrics_json(const ChargingMetrics& m, double e_max) {
  return {{"charged", m.charged},
          {"tau_c_ns", json_number(m.charged ? to_ns(m.tau_c) : nan())},
          {"xi_norm", json_number(m.xi / e_max)},
          {"mean_norm", json_number(m.mean / e_max)},
          {"S", json_number(m.s)},
          {"tail_samples", m.n}};
}

inline std::vector<double> metric_cells(const SweepRow& r, double e_max) {
  const auto& m = r.metrics;
  return {r.param, m.charged ? to_ns(m.tau_c) : nan(), m.xi / e_max, m.s, m.charged ? 1.0 : 0.0, r.failed ? 0.0 : 1.0};
}

inline void run_charge_curve(const ChargeCurveParams& p, ResultTable& t) {
  const ChargingCurve c = charging_curve(p.tmpl, p.dtau, p.tau_max, p.curve);
  t.columns = {"tau_ns", "ergotropy_norm", "ergotropy_rad_per_s"};
  for (std::size_t i = 0; i < c.size(); ++i) t.add_row({to_ns(c.tau(i)), c.normalized(i), c.ergotropy[i]});
  t.summary = metrics_json(evaluate_metrics(c, p.theta_min, p.tmpl.omega_max), c.e_max);
}

inline void fill_sweep(const SweepResult& r, double e_max, const char* param, ResultTable& t) {
  t.columns = {param, "tau_c_ns", "xi_norm", "S", "charged", "numerical_ok"};
  json errors = json::array();
  for (const auto& row : r.rows) {
    t.add_row(metric_cells(row, e_max));
    if (row.failed) {
      ++t.numerical_failures;
      errors.push_back(row.error);
    }
  }
  t.summary = {{std::string("best_") + param, r.best ? json_number(r.rows[*r.best].param) : json(nullptr)},
               {"best_S", r.best ? json_number(r.rows[*r.best].metrics.s) : json(nullptr)}};
  if (!errors.empty()) t.summary["errors"] = errors;
}

inline void run_qsl(const QslParams& p, ResultTable& t) {
  const QslRun r = run_qsl_protocol(p.omega_max, p.protection, p.levels, p.sample_interval, p.theta_min);
  const double bound = qsl_time(PureState3::basis(kG), PureState3::basis(kF), p.omega_max, p.omega_max);
  t.columns = {"tau_c_ns", "qsl_time_ns", "floor_norm", "min_after_norm", "max_after_norm", "xi_norm", "S"};
  const double e_max = r.curve.e_max;
  t.add_row({r.metrics.charged ? to_ns(r.metrics.tau_c) : nan(), to_ns(bound), r.floor, r.min_after, r.max_after,
             r.metrics.xi / e_max, r.metrics.s});
  t.summary = {{"protected", r.min_after >= r.floor - 1e-6}};
}

inline void run_spectrum(const SpectrumSweepParams& p, unsigned threads, ResultTable& t) {
  std::vector<SpectrumResult> out(p.fluxes.size());
  std::vector<char> failed(p.fluxes.size(), 0);
  parallel_for(p.fluxes.size(), threads, [&](std::size_t i) {
    CircuitParams c = p.circuit;
    c.f = p.fluxes[i];
    try {
      out[i] = compute_spectrum(c, p.basis_size, p.check_convergence);
    } catch (const NumericalError&) {
      failed[i] = 1;
    }
  });
  t.columns = {"f", "f_ge_ghz", "f_gf_ghz", "anharmonicity_ghz", "matrix_element_rel", "converged", "numerical_ok"};
  bool all = true;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (failed[i]) {
      ++t.numerical_failures;
      all = false;
      t.add_row({p.fluxes[i], nan(), nan(), nan(), nan(), 0.0, 0.0});
      continue;
    }
    const auto& s = out[i];
    all = all && s.converged;
    t.add_row({p.fluxes[i], to_ghz(s.omega_ge()), to_ghz(s.omega_gf()), to_ghz(s.anharmonicity()),
               s.matrix_element / flux_drive_scale(p.circuit), s.converged ? 1.0 : 0.0, 1.0});
  }
  t.summary = {{"all_converged", all}, {"e_k_ghz", to_ghz(p.circuit.e_k())}, {"e_j_ghz", to_ghz(p.circuit.e_j)}};
}

inline DensityMatrix3 tomo_state(const std::string& kind, std::mt19937_64& rng) {
  if (kind == "g") return DensityMatrix3::basis(kG);
  if (kind == "e") return DensityMatrix3::basis(kE);
  if (kind == "f") return DensityMatrix3::basis(kF);
  if (kind == "mixed") return DensityMatrix3(Matrix3(Matrix3::Identity() / 3.0));
  return random_density_matrix(rng);
}

inline void run_tomo(const TomoParams& p, std::uint64_t seed, unsigned threads, ResultTable& t) {
  const auto n = static_cast<std::size_t>(p.count);
  const LevelEnergies levels = charging_bias_levels();
  std::vector<std::vector<double>> rows(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const std::uint64_t s = seed + i;
    std::mt19937_64 rng(s);
    const DensityMatrix3 truth = tomo_state(p.state, rng);
    const auto rec = simulate_tomography(truth, p.shots, s ^ 0x9e3779b97f4a7c15ULL);
    const auto mle = mle_reconstruct(rec);
    rows[i] = {static_cast<double>(i), static_cast<double>(s), fidelity(truth.matrix(), mle.rho),
               ergotropy(truth, levels) / levels.max_ergotropy(), ergotropy(mle.state(), levels) / levels.max_ergotropy(),
               mle.converged ? 1.0 : 0.0};
  });
  t.columns = {"index", "seed", "fidelity", "ergotropy_true_norm", "ergotropy_mle_norm", "converged"};
  double worst = 1.0;
  for (auto& r : rows) {
    worst = std::min(worst, r[2]);
    t.add_row(std::move(r));
  }
  t.summary = {{"min_fidelity", json_number(worst)}};
}

inline void run_decay_fit(const DecayFitParams& p, std::uint64_t seed, ResultTable& t) {
  const double step = p.t_max / static_cast<double>(p.samples - 1);
  DecaySeries data;
  if (p.source == "analytic") {
    std::vector<double> times;
    for (int i = 0; i < p.samples; ++i) times.push_back(static_cast<double>(i) * step);
    data = synthetic_decay_series(p.rates, times);
  } else {
    EvolveOptions eo;
    eo.record = RecordMode::interval;
    eo.record_interval = step;
    const Trajectory tr = evolve_free_decay(DensityMatrix3::basis(kF), p.rates, p.t_max, eo);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      data.t.push_back(tr.times[i]);
      data.p_g.push_back(tr.population(i, kG));
      data.p_e.push_back(tr.population(i, kE));
      data.p_f.push_back(tr.population(i, kF));
    }
  }
  if (p.noise > 0.0) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < data.t.size(); ++i) {
      data.p_e[i] += p.noise * standard_normal(rng);
      data.p_f[i] += p.noise * standard_normal(rng);
      data.p_g[i] = 1.0 - data.p_e[i] - data.p_f[i];
    }
  }
  const CalibrationFit fit = fit_decay_rates(data);
  auto rel = [](double fitted, double truth) { return truth == 0.0 ? std::abs(fitted) : std::abs(fitted - truth) / truth; };
  t.columns = {"gamma_eg_khz",     "gamma_fe_khz",     "gamma_fg_khz",     "fit_gamma_eg_khz",
               "fit_gamma_fe_khz", "fit_gamma_fg_khz", "rel_err_eg",       "rel_err_fe",
               "rel_err_fg",       "sigma_eg_khz",     "sigma_fe_khz",     "sigma_fg_khz",
               "rms_residual"};
  t.add_row({to_khz_rate(p.rates.gamma_eg), to_khz_rate(p.rates.gamma_fe), to_khz_rate(p.rates.gamma_fg),
             to_khz_rate(fit.rates.gamma_eg), to_khz_rate(fit.rates.gamma_fe), to_khz_rate(fit.rates.gamma_fg),
             rel(fit.rates.gamma_eg, p.rates.gamma_eg), rel(fit.rates.gamma_fe, p.rates.gamma_fe),
             rel(fit.rates.gamma_fg, p.rates.gamma_fg), to_khz_rate(fit.sigma[0]), to_khz_rate(fit.sigma[1]),
             to_khz_rate(fit.sigma[2]), fit.rms_residual});
  t.summary = {{"converged", fit.converged},
               {"well_conditioned", fit.well_conditioned},
               {"coverage", json_number(fit.coverage)},
               {"coverage_ok", fit.coverage >= 3.0}};
}

inline void run_thermo(const ThermoParams& p, unsigned threads, ResultTable& t) {
  std::vector<ThermoReport> out(p.specs.size());
  parallel_for(p.specs.size(), threads, [&](std::size_t i) { out[i] = thermo_cost(p.specs[i], p.levels); });
  t.columns = {"kind_id", "eta", "phi_rad", "sigma_tau_rad_per_s", "sigma_over_omega_max", "mu"};
  json kinds = json::object();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& s = p.specs[i];
    const auto id = static_cast<int>(s.kind);
    kinds[std::to_string(id)] = std::string(to_string(s.kind));
    t.add_row({static_cast<double>(id), s.eta, s.phi, out[i].sigma_tau, out[i].sigma_tau / s.omega_max, out[i].mu});
  }
  t.summary = {{"kind_ids", kinds}};
}

}  // namespace detail

/// Runs the experiment. Results depend only on the config (seed included),
/// never on `threads`.
inline ResultTable run(const ExperimentConfig& cfg, unsigned threads = 1) {
  const auto start = std::chrono::steady_clock::now();
  ResultTable t;
  t.experiment = cfg.experiment;
  t.config = cfg.echo;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ChargeCurveParams>) {
          detail::run_charge_curve(p, t);
        } else if constexpr (std::is_same_v<P, SweepEtaParams>) {
          detail::fill_sweep(sweep_eta(p.sweep, threads), p.sweep.curve.levels.max_ergotropy(), "eta", t);
        } else if constexpr (std::is_same_v<P, SweepPhaseParams>) {
          detail::fill_sweep(sweep_phase(p.sweep, threads), p.sweep.curve.levels.max_ergotropy(), "phi_rad", t);
        } else if constexpr (std::is_same_v<P, QslParams>) {
          detail::run_qsl(p, t);
        } else if constexpr (std::is_same_v<P, SpectrumSweepParams>) {
          detail::run_spectrum(p, threads, t);
        } else if constexpr (std::is_same_v<P, TomoParams>) {
          detail::run_tomo(p, cfg.seed, threads, t);
        } else if constexpr (std::is_same_v<P, DecayFitParams>) {
          detail::run_decay_fit(p, cfg.seed, t);
        } else {
          detail::run_thermo(p, threads, t);
        }
      },
      cfg.params);
  t.summary["numerical_failures"] = t.numerical_failures;
  t.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return t;
}

}  // namespace qbattery::cli
