#pragma once

// Strict experiment configuration. Every field name carries its unit, every
// key is checked, and all validation happens before any simulation starts.
//
//   {"experiment": "<kind>", "seed": 0, "output": "path", "params": {...}}

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "qbattery/circuit.hpp"
#include "qbattery/errors.hpp"
#include "qbattery/evolution.hpp"
#include "qbattery/protocols.hpp"
#include "qbattery/pulses.hpp"

namespace qbattery::cli {

using nlohmann::json;

/// Reads an object key by key, fills an echo of the effective values
/// (defaults included) and rejects keys it was never asked about.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    used_.insert(key);
    T v = fallback;
    if (j_.contains(key) && !j_.at(key).is_null()) v = convert<T>(key);
    echo_[key] = v;
    return v;
  }

  template <class T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    T v = convert<T>(key);
    echo_[key] = v;
    return v;
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  /// Nested object; an absent key yields an empty object.
  ObjectReader child(const std::string& key) {
    used_.insert(key);
    static const json empty = json::object();
    return ObjectReader(j_.contains(key) ? j_.at(key) : empty, where_ + "." + key);
  }

  /// Raw array value; an absent key yields nullopt.
  std::optional<json> array(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    if (!j_.at(key).is_array()) throw ConfigError(where_ + "." + key + ": expected an array");
    return j_.at(key);
  }

  void set_echo(const std::string& key, json value) {
    used_.insert(key);
    echo_[key] = std::move(value);
  }

  /// Throws on unknown keys; returns the echo.
  json finish() const {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!used_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
    return echo_;
  }

 private:
  template <class T>
  T convert(const std::string& key) const {
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(where_ + "." + key + ": expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where_ + "." + key + ": expected true/false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(where_ + "." + key + ": expected an integer");
        if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned())
          throw ConfigError(where_ + "." + key + ": expected a non-negative integer");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where_ + "." + key + ": expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> used_;
  json echo_ = json::object();
};

struct ChargeCurveParams {
  EnvelopeSpec tmpl;
  double dtau = 0.0;
  double tau_max = 0.0;
  double theta_min = 0.8;
  CurveOptions curve;
};

struct SweepEtaParams {
  SweepConfig sweep;
};

struct SweepPhaseParams {
  SweepConfig sweep;
};

struct QslParams {
  double omega_max = 0.0;
  ProtectionConfig protection;
  double sample_interval = 0.0;
  double theta_min = 0.8;
  LevelEnergies levels = charging_bias_levels();
};

struct SpectrumSweepParams {
  CircuitParams circuit;
  std::vector<double> fluxes;
  int basis_size = kDefaultBasisSize;
  bool check_convergence = true;
};

struct TomoParams {
  std::string state;  // g, e, f, mixed, random
  int count = 1;
  std::uint64_t shots = 0;
};

struct DecayFitParams {
  DecayRates rates;
  double t_max = 0.0;
  int samples = 0;
  std::string source;  // analytic or lindblad
  double noise = 0.0;  // std of additive Gaussian noise on populations
};

struct ThermoParams {
  std::vector<EnvelopeSpec> specs;
  LevelEnergies levels = charging_bias_levels();
};

using ExperimentParams = std::variant<ChargeCurveParams, SweepEtaParams, SweepPhaseParams, QslParams,
                                      SpectrumSweepParams, TomoParams, DecayFitParams, ThermoParams>;

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::optional<std::string> output;
  ExperimentParams params;
  json echo;  // effective config
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"charge-curve", "sweep-eta",      "sweep-phase", "qsl",
                                          "spectrum-sweep", "tomo-roundtrip", "decay-fit",   "thermo"};
  return k;
}

namespace detail {

inline LevelEnergies read_levels(ObjectReader& r) {
  const auto name = r.get<std::string>("levels", "charging_bias");
  if (name == "charging_bias") return charging_bias_levels();
  if (name == "sweet_spot") return sweet_spot_levels();
  throw ConfigError("levels: expected 'charging_bias' or 'sweet_spot', got '" + name + "'");
}

inline DecayRates read_rates(ObjectReader& r, const DecayRates& fallback) {
  DecayRates d;
  d.gamma_eg = from_khz_rate(r.get<double>("gamma_eg_khz", to_khz_rate(fallback.gamma_eg)));
  d.gamma_fe = from_khz_rate(r.get<double>("gamma_fe_khz", to_khz_rate(fallback.gamma_fe)));
  d.gamma_fg = from_khz_rate(r.get<double>("gamma_fg_khz", to_khz_rate(fallback.gamma_fg)));
  return d;
}

inline std::optional<DecayRates> read_optional_rates(ObjectReader& r) {
  if (!r.has("decay")) {
    r.set_echo("decay", nullptr);
    return std::nullopt;
  }
  auto child = r.child("decay");
  DecayRates d = read_rates(child, charging_bias_rates());
  r.set_echo("decay", child.finish());
  return d;
}

inline void read_curve_options(ObjectReader& r, CurveOptions& c, double omega_max) {
  c.levels = read_levels(r);
  c.rates = read_optional_rates(r);
  if (c.rates) c.rates->validate();
  c.dt = from_ns(r.get<double>("dt_ns", 0.0));
  if (c.dt < 0.0) throw ConfigError("dt_ns must be >= 0 (0 selects the default step)");
  if (omega_max > 0.0 && c.dt > max_allowed_dt(omega_max))
    throw ConfigError("dt_ns too large: require dt_ns <= " + fmt_num(to_ns(max_allowed_dt(omega_max))));
}

// Inclusive uniform grid from <name>_min, <name>_max, <name>_step.
inline std::vector<double> read_grid(ObjectReader& r, const std::string& name, double lo, double hi, double step) {
  const double a = r.get<double>(name + "_min", lo);
  const double b = r.get<double>(name + "_max", hi);
  const double s = r.get<double>(name + "_step", step);
  try {
    return uniform_grid(a, b, s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(name + " grid: " + e.what());
  }
}

inline void read_sweep_common(ObjectReader& r, SweepConfig& s) {
  s.constraint = constraint_from_string(r.get<std::string>("constraint", "square_sum"));
  s.omega_max = from_mhz(r.get<double>("omega_max_mhz_over_2pi", 10.0));
  s.tau_max = from_ns(r.get<double>("tau_max_ns", 1000.0));
  s.dtau = from_ns(r.get<double>("dtau_ns", 4.0));
  s.theta_min = r.get<double>("theta_min", 0.8);
  read_curve_options(r, s.curve, s.omega_max);
}

inline ExperimentParams parse_params(const std::string& kind, ObjectReader& r) {
  if (kind == "charge-curve") {
    ChargeCurveParams p;
    p.tmpl.kind = envelope_kind_from_string(r.get<std::string>("kind", "stirap_tri"));
    p.tmpl.omega_max = from_mhz(r.get<double>("omega_max_mhz_over_2pi", 10.0));
    p.tmpl.eta = r.get<double>("eta", 0.0);
    p.tmpl.phi = r.get<double>("phi_rad", 0.0);
    p.tau_max = from_ns(r.get<double>("tau_max_ns", 1000.0));
    p.dtau = from_ns(r.get<double>("dtau_ns", 4.0));
    p.theta_min = r.get<double>("theta_min", 0.8);
    read_curve_options(r, p.curve, p.tmpl.omega_max);
    if (!(p.dtau > 0.0)) throw ConfigError("charge-curve: dtau_ns must be positive");
    if (!(p.tau_max >= p.dtau)) throw ConfigError("charge-curve: empty tau grid (tau_max_ns < dtau_ns)");
    p.tmpl.tau = p.tau_max;
    p.tmpl.validate();
    return p;
  }
  if (kind == "sweep-eta") {
    SweepEtaParams p;
    read_sweep_common(r, p.sweep);
    p.sweep.eta_grid = read_grid(r, "eta", 0.0, 0.4, 0.02);
    p.sweep.phi = r.get<double>("phi_rad", 0.0);
    p.sweep.validate();
    for (double eta : p.sweep.eta_grid) (void)p.sweep.template_spec(eta, p.sweep.phi);
    return p;
  }
  if (kind == "sweep-phase") {
    SweepPhaseParams p;
    read_sweep_common(r, p.sweep);
    p.sweep.eta = r.get<double>("eta", p.sweep.constraint == Constraint::square_sum ? 0.12 : 0.14);
    const auto deg = read_grid(r, "phi_deg", -180.0, 180.0, 15.0);
    p.sweep.phi_grid.clear();
    for (double d : deg) p.sweep.phi_grid.push_back(d * kPi / 180.0);
    p.sweep.validate();
    for (double phi : p.sweep.phi_grid) (void)p.sweep.template_spec(p.sweep.eta, phi);
    return p;
  }
  if (kind == "qsl") {
    QslParams p;
    p.omega_max = from_mhz(r.get<double>("omega_max_mhz_over_2pi", 10.0));
    if (!(p.omega_max > 0.0)) throw ConfigError("qsl: omega_max must be positive");
    const double default_protect = to_ns(qsl_transfer_time(p.omega_max));
    p.protection.tau_protect = from_ns(r.get<double>("tau_protect_ns", default_protect));
    p.protection.delta_after = from_mhz(r.get<double>("delta_after_mhz_over_2pi", 48.0));
    p.protection.total = from_ns(r.get<double>("total_ns", 200.0));
    p.sample_interval = from_ns(r.get<double>("sample_ns", 1.0));
    p.theta_min = r.get<double>("theta_min", 0.8);
    p.levels = read_levels(r);
    p.protection.validate();
    if (!(p.sample_interval > 0.0 && p.sample_interval <= p.protection.total))
      throw ConfigError("qsl: sample_ns must be in (0, total_ns]");
    return p;
  }
  if (kind == "spectrum-sweep") {
    SpectrumSweepParams p;
    p.circuit.e_j = josephson_energy_from_current(r.get<double>("critical_current_na", 88.0) * 1e-9);
    p.circuit.c_j = r.get<double>("c_j_ff", 9.0) * 1e-15;
    p.circuit.c_sh = r.get<double>("c_sh_ff", 45.0) * 1e-15;
    p.circuit.alpha = r.get<double>("alpha", 0.471);
    p.fluxes = read_grid(r, "flux", 0.494, 0.506, 0.001);
    p.basis_size = r.get<int>("basis_size", kDefaultBasisSize);
    p.check_convergence = r.get<bool>("check_convergence", true);
    p.circuit.validate();
    check_basis_size(p.basis_size);
    return p;
  }
  if (kind == "tomo-roundtrip") {
    TomoParams p;
    p.state = r.get<std::string>("state", "random");
    p.count = r.get<int>("count", 10);
    p.shots = r.get<std::uint64_t>("shots", 10000);
    if (p.state != "g" && p.state != "e" && p.state != "f" && p.state != "mixed" && p.state != "random")
      throw ConfigError("tomo-roundtrip: state must be g, e, f, mixed or random");
    if (p.count < 1) throw ConfigError("tomo-roundtrip: count must be >= 1");
    return p;
  }
  if (kind == "decay-fit") {
    DecayFitParams p;
    auto child = r.child("rates");
    p.rates = read_rates(child, charging_bias_rates());
    r.set_echo("rates", child.finish());
    p.t_max = from_us(r.get<double>("t_max_us", 100.0));
    p.samples = r.get<int>("samples", 201);
    p.source = r.get<std::string>("source", "analytic");
    p.noise = r.get<double>("noise_std", 0.0);
    p.rates.validate();
    if (!(p.t_max > 0.0)) throw ConfigError("decay-fit: t_max_us must be positive");
    if (p.samples < 4) throw ConfigError("decay-fit: samples must be >= 4");
    if (p.source != "analytic" && p.source != "lindblad") throw ConfigError("decay-fit: source must be analytic or lindblad");
    if (!(p.noise >= 0.0)) throw ConfigError("decay-fit: noise_std must be >= 0");
    return p;
  }
  if (kind == "thermo") {
    ThermoParams p;
    const double omega = from_mhz(r.get<double>("omega_max_mhz_over_2pi", 10.0));
    const double tau = from_ns(r.get<double>("tau_ns", 200.0));
    p.levels = read_levels(r);
    json list = r.array("protocols").value_or(json::array({
        {{"kind", "stirap_tri"}},
        {{"kind", "stirap_cyc"}},
        {{"kind", "cd_square_sum"}, {"eta", 0.12}},
        {{"kind", "cd_linear_sum"}, {"eta", 0.14}},
    }));
    if (list.empty()) throw ConfigError("thermo: protocols must not be empty");
    json echo = json::array();
    for (std::size_t i = 0; i < list.size(); ++i) {
      ObjectReader item(list[i], "params.protocols[" + std::to_string(i) + "]");
      EnvelopeSpec spec;
      spec.kind = envelope_kind_from_string(item.get<std::string>("kind", "stirap_tri"));
      spec.eta = item.get<double>("eta", 0.0);
      spec.phi = item.get<double>("phi_rad", 0.0);
      spec.omega_max = omega;
      spec.tau = tau;
      spec.validate();
      p.specs.push_back(spec);
      echo.push_back(item.finish());
    }
    r.set_echo("protocols", echo);
    return p;
  }
  throw ConfigError("unknown experiment '" + kind + "'");
}

}  // namespace detail

/// Parses and fully validates a config document. Any problem, including
/// out-of-range physics parameters, surfaces as ConfigError.
inline ExperimentConfig parse_experiment(const json& doc) {
  try {
    ObjectReader top(doc, "config");
    ExperimentConfig cfg;
    cfg.experiment = top.require<std::string>("experiment");
    cfg.seed = top.get<std::uint64_t>("seed", 0);
    if (top.has("output")) cfg.output = top.get<std::string>("output", "");
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), cfg.experiment) == kinds.end())
      throw ConfigError("config.experiment: unknown experiment '" + cfg.experiment + "'");
    auto params = top.child("params");
    cfg.params = detail::parse_params(cfg.experiment, params);
    top.set_echo("params", params.finish());
    cfg.echo = top.finish();
    cfg.echo.erase("output");  // where the file went does not change its content
    return cfg;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
}

inline ExperimentConfig parse_experiment_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_experiment(doc);
}

}  // namespace qbattery::cli
