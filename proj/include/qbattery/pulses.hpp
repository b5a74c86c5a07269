#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>

#include "qbattery/qutrit.hpp"
#include "qbattery/errors.hpp"
#include "qbattery/units.hpp"

namespace qbattery {

enum class EnvelopeKind {
  stirap_tri,     // AQB sine/cosine pair, sum of squares = Omega_max^2
  stirap_cyc,     // cycloid pair, sum = Omega_max
  cd_square_sum,  // eta-scaled tri + constant g-f pulse, square-sum budget
  cd_linear_sum,  // eta-scaled cyc + constant g-f pulse, linear-sum budget
  qsl_square,     // direct g-f drive at full amplitude
  idle,           // no drive
};

enum class Constraint { square_sum, linear_sum };

inline std::string_view to_string(EnvelopeKind k) {
  switch (k) {
    case EnvelopeKind::stirap_tri: return "stirap_tri";
    case EnvelopeKind::stirap_cyc: return "stirap_cyc";
    case EnvelopeKind::cd_square_sum: return "cd_square_sum";
    case EnvelopeKind::cd_linear_sum: return "cd_linear_sum";
    case EnvelopeKind::qsl_square: return "qsl_square";
    case EnvelopeKind::idle: return "idle";
  }
  return "unknown";
}

inline EnvelopeKind envelope_kind_from_string(std::string_view s) {
  for (auto k : {EnvelopeKind::stirap_tri, EnvelopeKind::stirap_cyc, EnvelopeKind::cd_square_sum,
                 EnvelopeKind::cd_linear_sum, EnvelopeKind::qsl_square, EnvelopeKind::idle}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown envelope kind '" + std::string(s) + "'");
}

inline std::string_view to_string(Constraint c) {
  return c == Constraint::square_sum ? "square_sum" : "linear_sum";
}

inline Constraint constraint_from_string(std::string_view s) {
  if (s == "square_sum") return Constraint::square_sum;
  if (s == "linear_sum") return Constraint::linear_sum;
  throw std::invalid_argument("unknown constraint '" + std::string(s) + "'");
}

/// The counterdiabatic family that lives under a given norm budget.
inline EnvelopeKind cd_kind(Constraint c) {
  return c == Constraint::square_sum ? EnvelopeKind::cd_square_sum : EnvelopeKind::cd_linear_sum;
}

/// Largest eta for which the family stays inside its budget with nonnegative amplitudes.
inline double max_eta(EnvelopeKind k) {
  switch (k) {
    case EnvelopeKind::cd_square_sum: return std::sqrt(2.0);
    case EnvelopeKind::cd_linear_sum: return 2.0;
    default: return 0.0;
  }
}

/// Phase offset between the microwave carrier phase of the g-f tone and the
/// phase carried by the g-f element of the rotating-frame Hamiltonian. Each
/// sin(wt + phi) drive contributes a -i under the rotating-wave approximation;
/// after gauging the g-e and e-f couplings back to real amplitudes the g-f
/// element is Omega_gf * exp(i(phi + pi/2)).
inline constexpr double kCarrierToHamiltonianPhase = kPi / 2.0;

/// Hamiltonian-frame phase for a carrier phase, wrapped to [-pi, pi].
inline double hamiltonian_phase(double carrier_phase) {
  return std::remainder(carrier_phase + kCarrierToHamiltonianPhase, kTwoPi);
}

/// One charging protocol. `phi` is the carrier phase of the g-f tone; eta is
/// read only by the two counterdiabatic kinds.
struct EnvelopeSpec {
  EnvelopeKind kind = EnvelopeKind::stirap_tri;
  double omega_max = 0.0;  // rad/s
  double tau = 0.0;        // s
  double eta = 0.0;
  double phi = 0.0;  // rad

  void validate() const {
    if (!(std::isfinite(omega_max) && omega_max > 0.0))
      throw std::invalid_argument("EnvelopeSpec: omega_max must be positive and finite");
    if (!(std::isfinite(tau) && tau > 0.0))
      throw std::invalid_argument("EnvelopeSpec: tau must be positive and finite");
    if (!std::isfinite(phi)) throw std::invalid_argument("EnvelopeSpec: phi must be finite");
    if (kind == EnvelopeKind::cd_square_sum || kind == EnvelopeKind::cd_linear_sum) {
      if (!(eta >= 0.0 && eta <= max_eta(kind)))
        throw std::invalid_argument("EnvelopeSpec: eta=" + fmt_num(eta) + " outside [0, " +
                                    fmt_num(max_eta(kind)) + "] for " + std::string(to_string(kind)));
    }
  }

  EnvelopeSpec with_tau(double new_tau) const {
    EnvelopeSpec s = *this;
    s.tau = new_tau;
    return s;
  }
};

namespace detail {
inline void check_time(double t, double tau, const char* who) {
  if (!(t >= 0.0 && t <= tau))
    throw std::invalid_argument(std::string(who) + ": t=" + fmt_num(t) + " outside [0, " +
                                fmt_num(tau) + "]");
}
}  // namespace detail

/// AQB envelopes (Omega_max sin(pi t / 2 tau), Omega_max cos(pi t / 2 tau)).
inline std::pair<double, double> envelope_tri(double t, double tau, double omega_max) {
  detail::check_time(t, tau, "envelope_tri");
  if (t == tau) return {omega_max, 0.0};
  const double x = kPi * t / (2.0 * tau);
  return {omega_max * std::sin(x), omega_max * std::cos(x)};
}

/// Cycloid envelopes; the pair always sums to Omega_max.
inline std::pair<double, double> envelope_cyc(double t, double tau, double omega_max) {
  detail::check_time(t, tau, "envelope_cyc");
  double tn;
  if (t == 0.0) {
    tn = 1.0;
  } else if (t == tau) {
    tn = -1.0;
  } else {
    tn = std::clamp(std::tan(kPi * (1.0 - 2.0 * t / tau) / 4.0), -1.0, 1.0);
  }
  const double ge = 0.5 * omega_max * (1.0 - tn);
  return {ge, omega_max - ge};
}

/// Drive amplitudes of `spec` at time t, with the g-f phase already mapped
/// into the Hamiltonian frame.
inline DriveSample sample_envelopes(const EnvelopeSpec& spec, double t) {
  spec.validate();
  detail::check_time(t, spec.tau, "sample_envelopes");
  DriveSample d;
  d.phi = hamiltonian_phase(spec.phi);
  const double w = spec.omega_max;
  switch (spec.kind) {
    case EnvelopeKind::stirap_tri:
      std::tie(d.omega_ge, d.omega_ef) = envelope_tri(t, spec.tau, w);
      break;
    case EnvelopeKind::stirap_cyc:
      std::tie(d.omega_ge, d.omega_ef) = envelope_cyc(t, spec.tau, w);
      break;
    case EnvelopeKind::cd_square_sum: {
      const double scale = std::sqrt(1.0 - 0.5 * spec.eta * spec.eta);
      const auto [ge, ef] = envelope_tri(t, spec.tau, w);
      d.omega_ge = scale * ge;
      d.omega_ef = scale * ef;
      d.omega_gf = std::sqrt(2.0) * spec.eta / 2.0 * w;
      break;
    }
    case EnvelopeKind::cd_linear_sum: {
      const double scale = 1.0 - 0.5 * spec.eta;
      const auto [ge, ef] = envelope_cyc(t, spec.tau, w);
      d.omega_ge = scale * ge;
      d.omega_ef = scale * ef;
      d.omega_gf = 0.5 * spec.eta * w;
      break;
    }
    case EnvelopeKind::qsl_square:
      d.omega_gf = w;
      break;
    case EnvelopeKind::idle:
      break;
  }
  return d;
}

}  // namespace qbattery
