#pragma once

// Closed and open time evolution of the driven qutrit, plus the closed-form
// cascade decay |f> -> |e> -> |g> used to check the Lindblad integrator.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "qbattery/errors.hpp"
#include "qbattery/pulses.hpp"
#include "qbattery/qutrit.hpp"

namespace qbattery {

/// Spontaneous decay rates in 1/s (no 2*pi: "67 kHz" means 67e3 per second).
struct DecayRates {
  double gamma_eg = 0.0;
  double gamma_fe = 0.0;
  double gamma_fg = 0.0;

  void validate() const {
    for (double g : {gamma_eg, gamma_fe, gamma_fg}) {
      if (!(std::isfinite(g) && g >= 0.0))
        throw std::invalid_argument("DecayRates: rates must be finite and >= 0");
    }
  }
  bool all_zero() const { return gamma_eg == 0.0 && gamma_fe == 0.0 && gamma_fg == 0.0; }
  double max_rate() const { return std::max({gamma_eg, gamma_fe, gamma_fg}); }

  static DecayRates from_khz(double eg, double fe, double fg) {
    DecayRates r{from_khz_rate(eg), from_khz_rate(fe), from_khz_rate(fg)};
    r.validate();
    return r;
  }
};

/// Measured rates at 0.5 flux quanta.
inline DecayRates sweet_spot_rates() { return DecayRates::from_khz(67.0, 71.5, 0.2); }
/// Measured rates at 0.496 flux quanta.
inline DecayRates charging_bias_rates() { return DecayRates::from_khz(104.9, 60.0, 20.0); }

/// Piecewise-constant detuning on the |f> level. The value set at a switch
/// time applies from that time on.
class DetuningSchedule {
 public:
  DetuningSchedule() = default;
  explicit DetuningSchedule(double constant) : initial_(constant) { check_value(constant); }

  /// `before` on [0, t_switch), `after` from t_switch on.
  static DetuningSchedule step(double t_switch, double before, double after) {
    DetuningSchedule s(before);
    s.then(t_switch, after);
    return s;
  }

  DetuningSchedule& then(double t, double value) {
    check_value(value);
    if (!(std::isfinite(t) && t >= 0.0)) throw std::invalid_argument("DetuningSchedule: bad switch time");
    if (!switches_.empty() && !(t > switches_.back()))
      throw std::invalid_argument("DetuningSchedule: switch times must be strictly increasing");
    switches_.push_back(t);
    values_.push_back(value);
    return *this;
  }

  double at(double t) const {
    double v = initial_;
    for (std::size_t i = 0; i < switches_.size() && switches_[i] <= t; ++i) v = values_[i];
    return v;
  }

  const std::vector<double>& switch_times() const noexcept { return switches_; }

  double max_abs() const {
    double m = std::abs(initial_);
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  static void check_value(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("DetuningSchedule: non-finite detuning");
  }

  double initial_ = 0.0;
  std::vector<double> switches_;
  std::vector<double> values_;
};

enum class RecordMode {
  every_step,  // every RK4 step
  interval,    // on the grid k * record_interval (plus t = tau)
  endpoints,   // t = 0 and t = tau only
};

struct EvolveOptions {
  double dt = 0.0;  // 0 selects the default step
  DetuningSchedule detuning;
  RecordMode record = RecordMode::every_step;
  double record_interval = 0.0;  // used by RecordMode::interval
};

/// Largest step the integrator accepts for a given drive amplitude.
inline double max_allowed_dt(double omega_max) { return 1.0 / (50.0 * omega_max); }

/// min(1/(100 Omega_max), tau/2000), tightened further if the detuning is
/// larger than the drive.
inline double default_dt(const EnvelopeSpec& spec, const DetuningSchedule& detuning = {}) {
  const double rate = std::max(spec.omega_max, detuning.max_abs());
  return std::min(1.0 / (100.0 * rate), spec.tau / 2000.0);
}

/// Samples of one evolution. Unitary runs store amplitudes, Lindblad runs
/// density matrices; `peak_population` is the running maximum of each level's
/// population over every integration step, not only recorded ones.
struct Trajectory {
  EnvelopeSpec spec;
  double dt = 0.0;
  bool pure = true;
  std::vector<double> times;
  std::vector<Vector3> psi;
  std::vector<Matrix3> rho;
  Eigen::Vector3d peak_population = Eigen::Vector3d::Zero();

  std::size_t size() const noexcept { return times.size(); }

  double population(std::size_t i, int level) const {
    return pure ? std::norm(psi[i](level)) : rho[i](level, level).real();
  }

  Matrix3 density(std::size_t i) const { return pure ? Matrix3(psi[i] * psi[i].adjoint()) : rho[i]; }

  /// Validated state; Lindblad samples are checked at the looser 1e-6 positivity tolerance.
  DensityMatrix3 state(std::size_t i) const { return DensityMatrix3(density(i), pure ? 1e-8 : 1e-6); }

  double ergotropy(std::size_t i, const LevelEnergies& levels) const {
    return levels.e_e() * population(i, kE) + levels.e_f() * population(i, kF);
  }

  double final_ergotropy(const LevelEnergies& levels) const { return ergotropy(size() - 1, levels); }
};

namespace detail {

struct TimeNode {
  double t;
  bool record;
};

// Segment boundaries: endpoints, detuning switches and (in interval mode) the
// recording grid. Steps never straddle a boundary, so the detuning is constant
// within each step and recorded times are hit exactly.
inline std::vector<TimeNode> time_nodes(double tau, const EvolveOptions& opt) {
  std::vector<TimeNode> nodes{{0.0, true}, {tau, true}};
  for (double ts : opt.detuning.switch_times()) {
    if (ts > 0.0 && ts < tau) nodes.push_back({ts, false});
  }
  if (opt.record == RecordMode::interval) {
    if (!(std::isfinite(opt.record_interval) && opt.record_interval > 0.0))
      throw std::invalid_argument("evolve: record_interval must be positive in interval mode");
    const auto n = static_cast<long long>(std::floor(tau / opt.record_interval + 1e-9));
    for (long long k = 1; k <= n; ++k) {
      const double t = static_cast<double>(k) * opt.record_interval;
      if (t < tau) nodes.push_back({t, true});
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](const TimeNode& a, const TimeNode& b) { return a.t < b.t; });
  // Merge nodes closer than a tiny fraction of tau (rounding of k*interval
  // against a switch time given in different units).
  const double tol = 1e-9 * tau;
  std::vector<TimeNode> merged;
  for (const auto& n : nodes) {
    if (!merged.empty() && n.t - merged.back().t <= tol) {
      merged.back().record = merged.back().record || n.record;
      if (n.t == tau) merged.back().t = tau;
      continue;
    }
    merged.push_back(n);
  }
  return merged;
}

inline double resolve_dt(const EnvelopeSpec& spec, const EvolveOptions& opt) {
  spec.validate();
  const double dt = opt.dt > 0.0 ? opt.dt : default_dt(spec, opt.detuning);
  if (!std::isfinite(dt) || opt.dt < 0.0) throw std::invalid_argument("evolve: dt must be positive");
  const double limit = max_allowed_dt(spec.omega_max);
  if (dt > limit) {
    throw std::invalid_argument("evolve: dt=" + fmt_num(dt) + " s is too large for omega_max=" +
                                fmt_num(spec.omega_max) + " rad/s; require dt <= " +
                                fmt_num(limit) + " s");
  }
  return dt;
}

// Generic fixed-step RK4 over the node segmentation. `rhs(H, y)` returns dy/dt
// for the instantaneous Hamiltonian; `observe(t, y, recorded)` is called
// after the initial point and after every step.
template <class State, class Rhs, class Observe>
void rk4_drive(const EnvelopeSpec& spec, const EvolveOptions& opt, double dt, State y, Rhs&& rhs,
               Observe&& observe) {
  const auto nodes = time_nodes(spec.tau, opt);
  auto hamiltonian = [&](double t, double delta) {
    return assemble_interaction_hamiltonian(sample_envelopes(spec, t), delta);
  };
  observe(0.0, y, true);
  for (std::size_t s = 0; s + 1 < nodes.size(); ++s) {
    const double a = nodes[s].t;
    const double b = nodes[s + 1].t;
    const auto n = static_cast<long long>(std::max(1.0, std::ceil((b - a) / dt - 1e-9)));
    const double h = (b - a) / static_cast<double>(n);
    const double delta = opt.detuning.at(0.5 * (a + b));
    Matrix3 h_start = hamiltonian(a, delta);
    for (long long k = 0; k < n; ++k) {
      const double t0 = a + static_cast<double>(k) * h;
      const double t1 = (k + 1 == n) ? b : a + static_cast<double>(k + 1) * h;
      const double th = 0.5 * (t0 + t1);
      const double hk = t1 - t0;
      const Matrix3 h_mid = hamiltonian(th, delta);
      const Matrix3 h_end = hamiltonian(t1, delta);
      const State k1 = rhs(h_start, y);
      const State k2 = rhs(h_mid, State(y + 0.5 * hk * k1));
      const State k3 = rhs(h_mid, State(y + 0.5 * hk * k2));
      const State k4 = rhs(h_end, State(y + hk * k3));
      y += (hk / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      h_start = h_end;
      const bool at_node = (k + 1 == n);
      const bool rec = opt.record == RecordMode::every_step || (at_node && nodes[s + 1].record);
      observe(t1, y, rec);
    }
  }
}

}  // namespace detail

/// Fixed-step RK4 solution of i dpsi/dt = H(t) psi over [0, tau].
inline Trajectory evolve_unitary(const EnvelopeSpec& spec, const PureState3& psi0, const EvolveOptions& opt = {}) {
  const double dt = detail::resolve_dt(spec, opt);
  Trajectory tr;
  tr.spec = spec;
  tr.dt = dt;
  tr.pure = true;
  const Complex minus_i(0.0, -1.0);
  auto rhs = [&](const Matrix3& h, const Vector3& y) -> Vector3 { return minus_i * (h * y); };
  double worst_drift = 0.0;
  auto observe = [&](double t, const Vector3& y, bool rec) {
    const Eigen::Vector3d p = y.cwiseAbs2();
    tr.peak_population = tr.peak_population.cwiseMax(p);
    if (rec) {
      tr.times.push_back(t);
      tr.psi.push_back(y);
      worst_drift = std::max(worst_drift, std::abs(p.sum() - 1.0));
    }
  };
  detail::rk4_drive<Vector3>(spec, opt, dt, psi0.amplitudes(), rhs, observe);
  if (!(worst_drift < 1e-8)) {
    throw NumericalError("evolve_unitary: norm drift " + fmt_num(worst_drift) +
                         " exceeds 1e-8; reduce dt (currently " + fmt_num(dt) + " s)");
  }
  return tr;
}

/// Jump operators sqrt(G_eg)|g><e|, sqrt(G_fe)|e><f|, sqrt(G_fg)|g><f|.
inline std::array<Matrix3, 3> collapse_operators(const DecayRates& rates) {
  rates.validate();
  std::array<Matrix3, 3> ops{Matrix3::Zero(), Matrix3::Zero(), Matrix3::Zero()};
  ops[0](kG, kE) = std::sqrt(rates.gamma_eg);
  ops[1](kE, kF) = std::sqrt(rates.gamma_fe);
  ops[2](kG, kF) = std::sqrt(rates.gamma_fg);
  return ops;
}

/// RK4 solution of the Lindblad master equation with the three decay channels.
inline Trajectory evolve_lindblad(const EnvelopeSpec& spec, const DensityMatrix3& rho0, const DecayRates& rates,
                                  const EvolveOptions& opt = {}) {
  const double dt = detail::resolve_dt(spec, opt);
  const auto ops = collapse_operators(rates);
  Matrix3 anti = Matrix3::Zero();
  for (const auto& l : ops) anti += l.adjoint() * l;
  anti *= 0.5;

  Trajectory tr;
  tr.spec = spec;
  tr.dt = dt;
  tr.pure = false;
  const Complex minus_i(0.0, -1.0);
  auto rhs = [&](const Matrix3& h, const Matrix3& r) -> Matrix3 {
    Matrix3 d = minus_i * (h * r - r * h) - anti * r - r * anti;
    for (const auto& l : ops) d += l * r * l.adjoint();
    return d;
  };
  double worst_trace = 0.0;
  double worst_eig = 0.0;
  auto observe = [&](double t, const Matrix3& r, bool rec) {
    const Eigen::Vector3d p = r.diagonal().real();
    tr.peak_population = tr.peak_population.cwiseMax(p);
    if (rec) {
      tr.times.push_back(t);
      tr.rho.push_back(r);
      worst_trace = std::max(worst_trace, std::abs(r.trace().real() - 1.0));
      worst_eig = std::min(worst_eig, DensityMatrix3::min_eigenvalue(Matrix3(0.5 * (r + r.adjoint()))));
    }
  };
  detail::rk4_drive<Matrix3>(spec, opt, dt, rho0.matrix(), rhs, observe);
  if (!(worst_trace < 1e-8))
    throw NumericalError("evolve_lindblad: trace drift " + fmt_num(worst_trace) + " exceeds 1e-8");
  if (!(worst_eig > -1e-6))
    throw NumericalError("evolve_lindblad: eigenvalue " + fmt_num(worst_eig) + " below -1e-6");
  return tr;
}

/// Undriven Lindblad evolution over [0, t_total]. The idle envelope still
/// needs an amplitude scale for the step-size rule; 1 rad/s leaves the
/// default step at t_total / 2000.
inline Trajectory evolve_free_decay(const DensityMatrix3& rho0, const DecayRates& rates, double t_total,
                                    const EvolveOptions& opt = {}) {
  const EnvelopeSpec idle{EnvelopeKind::idle, 1.0, t_total, 0.0, 0.0};
  return evolve_lindblad(idle, rho0, rates, opt);
}

struct Populations {
  double g = 0.0;
  double e = 0.0;
  double f = 0.0;
};

/// Closed-form populations of the |f> -> |e> -> |g> cascade (plus the direct
/// f -> g channel) from |f> at t = 0. Requires G_eg != G_fg + G_fe.
inline Populations analytic_decay_populations(const DecayRates& rates, double t) {
  rates.validate();
  if (!(std::isfinite(t) && t >= 0.0)) throw std::invalid_argument("analytic_decay_populations: t must be >= 0");
  const double k = rates.gamma_fg + rates.gamma_fe;
  const double gap = k - rates.gamma_eg;
  if (std::abs(gap) <= 1e-12 * std::max(k, rates.gamma_eg) || (k == 0.0 && rates.gamma_eg == 0.0))
    throw std::invalid_argument("analytic_decay_populations: degenerate exponents (gamma_eg == gamma_fg + gamma_fe)");
  const double c1 = 1.0;
  const double c2 = rates.gamma_fe / gap;
  const double c3 = 1.0;
  const double ek = std::exp(-k * t);
  const double eg = std::exp(-rates.gamma_eg * t);
  Populations p;
  p.f = c3 * ek;
  p.e = c2 * eg - c2 * ek;
  p.g = c1 - c2 * eg + (c2 - c3 * c1) * ek;
  return p;
}

/// Same cascade written with expm1 so it stays accurate near, and at, the
/// degenerate point. Used as the fit model.
inline Populations cascade_populations(const DecayRates& rates, double t) {
  const double k = rates.gamma_fg + rates.gamma_fe;
  const double ek = std::exp(-k * t);
  // (e^{-G_eg t} - e^{-k t}) / (k - G_eg) = e^{-lo t} (1 - e^{-d t}) / d with
  // lo the slower rate and d = |k - G_eg|.
  const double lo = std::min(k, rates.gamma_eg);
  const double d = std::abs(k - rates.gamma_eg);
  const double ratio = (d * t == 0.0) ? t : -std::expm1(-d * t) / d;
  Populations p;
  p.f = ek;
  p.e = rates.gamma_fe * std::exp(-lo * t) * ratio;
  p.g = 1.0 - p.e - p.f;
  return p;
}

}  // namespace qbattery
