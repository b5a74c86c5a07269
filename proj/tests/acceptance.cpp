// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every line passes.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qbattery/calibration.hpp"
#include "qbattery/circuit.hpp"
#include "qbattery/metrics.hpp"
#include "qbattery/protocols.hpp"
#include "qbattery/tomography.hpp"

using namespace qbattery;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

const double kOmega = from_mhz(10.0);

// Sweeps are shared between criteria 5, 6 and 10.
struct EtaOptimum {
  double eta = 0.0;
  double xi_best = 0.0;
  double xi_zero = 0.0;
};

EtaOptimum eta_optimum(Constraint c) {
  static std::optional<EtaOptimum> cache[2];
  auto& slot = cache[c == Constraint::square_sum ? 0 : 1];
  if (!slot) {
    SweepConfig cfg;
    cfg.constraint = c;
    const auto r = sweep_eta(cfg, workers());
    if (!r.best || !r.rows.front().metrics.charged) throw std::runtime_error("eta sweep did not charge");
    slot = EtaOptimum{r.rows[*r.best].param, r.rows[*r.best].metrics.xi, r.rows.front().metrics.xi};
  }
  return *slot;
}

Outcome ac01_qsl_charging() {
  ProtectionConfig prot{from_ns(50.0), 0.0, from_ns(50.0)};
  const auto run = run_qsl_protocol(kOmega, prot, charging_bias_levels(), from_ns(1.0));
  std::optional<double> first;
  for (std::size_t i = 0; i < run.curve.size(); ++i) {
    if (run.curve.normalized(i) >= 0.999) {
      first = run.curve.tau(i);
      break;
    }
  }
  if (!first) return {false, "never reached 0.999 E_max"};
  const bool ok = std::abs(*first - from_ns(25.0)) <= run.curve.dtau + 1e-15 && run.metrics.charged &&
                  std::abs(run.metrics.tau_c - from_ns(25.0)) <= run.curve.dtau + 1e-15;
  return {ok, fmt("first >= 0.999 E_max at %.3f ns", to_ns(*first)) + fmt(", tau_c = %.3f ns", to_ns(run.metrics.tau_c))};
}

Outcome ac02_qsl_bound() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 120;
  std::vector<char> ok(n, 0);
  std::vector<double> margin(n, 0.0);
  std::vector<EnvelopeSpec> specs;
  for (int i = 0; i < n; ++i) {
    EnvelopeSpec s;
    switch (i % 4) {
      case 0: s.kind = EnvelopeKind::cd_square_sum; break;
      case 1: s.kind = EnvelopeKind::cd_linear_sum; break;
      case 2: s.kind = EnvelopeKind::stirap_tri; break;
      default: s.kind = EnvelopeKind::stirap_cyc; break;
    }
    s.omega_max = kOmega;
    s.eta = u(rng) * max_eta(s.kind);
    s.phi = (2.0 * u(rng) - 1.0) * kPi;
    s.tau = from_ns(5.0 + 295.0 * u(rng));
    specs.push_back(s);
  }
  parallel_for(specs.size(), workers(), [&](std::size_t i) {
    const auto tr = evolve_unitary(specs[i], PureState3::basis(kG));
    const auto rep = verify_qsl_bound(tr);
    ok[i] = rep.passage_ok;
    margin[i] = rep.first_passage ? *rep.first_passage / rep.qsl_bound : INFINITY;
  });
  int passed = 0;
  double closest = INFINITY;
  for (int i = 0; i < n; ++i) {
    passed += ok[i];
    closest = std::min(closest, margin[i]);
  }
  return {passed == n, std::to_string(passed) + "/" + std::to_string(n) + " specs" +
                           (std::isfinite(closest) ? fmt(", earliest passage %.3f x bound", closest) : ", none reached P_f")};
}

Outcome ac03_constraints() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  const double tau = from_ns(200.0);
  for (int i = 0; i < 10000; ++i) {
    const double t = u(rng) * tau;
    const EnvelopeSpec sq{EnvelopeKind::cd_square_sum, kOmega, tau, u(rng) * max_eta(EnvelopeKind::cd_square_sum), 0.0};
    const EnvelopeSpec lin{EnvelopeKind::cd_linear_sum, kOmega, tau, u(rng) * max_eta(EnvelopeKind::cd_linear_sum), 0.0};
    const auto a = sample_envelopes(sq, t);
    const auto b = sample_envelopes(lin, t);
    const double s2 = a.omega_ge * a.omega_ge + a.omega_ef * a.omega_ef + a.omega_gf * a.omega_gf;
    const double s1 = b.omega_ge + b.omega_ef + b.omega_gf;
    worst = std::max({worst, std::abs(s2 / (kOmega * kOmega) - 1.0), std::abs(s1 / kOmega - 1.0)});
  }
  return {worst < 1e-12, fmt("max relative error %.2e", worst)};
}

Outcome ac04_dark_state() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  const double tau = from_ns(200.0);
  for (int i = 0; i < 1000; ++i) {
    const EnvelopeSpec s{i % 2 ? EnvelopeKind::stirap_cyc : EnvelopeKind::stirap_tri, kOmega, tau, 0.0, 0.0};
    const auto d = sample_envelopes(s, u(rng) * tau);
    const Matrix3 h = assemble_interaction_hamiltonian(d);
    worst = std::max(worst, (h * dark_state(d.omega_ge, d.omega_ef).amplitudes()).norm() / kOmega);
  }
  return {worst < 1e-12, fmt("max |H E0| / Omega_max = %.2e", worst)};
}

Outcome ac05_optimal_eta() {
  const auto sq = eta_optimum(Constraint::square_sum);
  const auto lin = eta_optimum(Constraint::linear_sum);
  const bool ok = std::abs(sq.eta - 0.12) <= 0.04 + 1e-12 && std::abs(lin.eta - 0.14) <= 0.04 + 1e-12 &&
                  sq.xi_best < sq.xi_zero && lin.xi_best < lin.xi_zero;
  return {ok, fmt("square-sum eta* = %.2f", sq.eta) + fmt(" (xi ratio %.3f)", sq.xi_best / sq.xi_zero) +
                  fmt(", linear-sum eta* = %.2f", lin.eta) + fmt(" (xi ratio %.3f)", lin.xi_best / lin.xi_zero)};
}

Outcome ac06_phase() {
  std::string detail;
  bool ok = true;
  for (auto c : {Constraint::square_sum, Constraint::linear_sum}) {
    SweepConfig cfg;
    cfg.constraint = c;
    cfg.eta = eta_optimum(c).eta;
    const double step = kPi / 12.0;
    cfg.phi_grid = uniform_grid(-kPi, kPi, step);
    const auto r = sweep_phase(cfg, workers());
    ok = ok && r.best && std::abs(r.rows[*r.best].param) < step;
    // Periodicity: the same simulations shifted by a full turn.
    SweepConfig shifted = cfg;
    shifted.phi_grid = {0.7, 0.7 + kTwoPi, -2.1, -2.1 + kTwoPi};
    const auto p = sweep_phase(shifted, workers());
    const double d1 = std::abs(p.rows[0].metrics.s - p.rows[1].metrics.s) / p.rows[0].metrics.s;
    const double d2 = std::abs(p.rows[2].metrics.s - p.rows[3].metrics.s) / p.rows[2].metrics.s;
    ok = ok && d1 < 1e-9 && d2 < 1e-9;
    detail += std::string(to_string(c)) + (r.best ? fmt(" phi* = %.3f rad", r.rows[*r.best].param) : " uncharged") +
              fmt(" (period mismatch %.1e); ", std::max(d1, d2));
  }
  return {ok, detail};
}

Outcome ac07_thermo() {
  std::string detail;
  bool ok = true;
  const double tau = from_ns(200.0);
  for (const auto& [name, lv] : {std::pair{"0.5", sweet_spot_levels()}, std::pair{"0.496", charging_bias_levels()}}) {
    for (double eta : {0.0, 0.12, 0.4}) {
      const auto r = thermo_cost({EnvelopeKind::cd_square_sum, kOmega, tau, eta, 0.0}, lv);
      ok = ok && std::abs(100.0 * r.mu - 99.772) <= 0.01;
    }
    const auto tri = thermo_cost({EnvelopeKind::stirap_tri, kOmega, tau, 0.0, 0.0}, lv);
    const auto cyc = thermo_cost({EnvelopeKind::stirap_cyc, kOmega, tau, 0.0, 0.0}, lv);
    const auto cdc = thermo_cost({EnvelopeKind::cd_linear_sum, kOmega, tau, 0.14, 0.0}, lv);
    ok = ok && std::abs(100.0 * tri.mu - 99.772) <= 0.01 && std::abs(100.0 * cyc.mu - 99.815) <= 0.01;
    detail += std::string(name) + ": tri " + fmt("%.4f%%", 100.0 * tri.mu) + fmt(", cyc %.4f%%", 100.0 * cyc.mu) +
              fmt(", CD-cyc %.4f%% (ungated); ", 100.0 * cdc.mu);
  }
  return {ok, detail};
}

Outcome ac08_decay_oracle() {
  double worst = 0.0;
  for (const auto& rates : {sweet_spot_rates(), charging_bias_rates()}) {
    EvolveOptions eo;
    eo.record = RecordMode::interval;
    eo.record_interval = from_us(0.5);
    const auto tr = evolve_free_decay(DensityMatrix3::basis(kF), rates, from_us(50.0), eo);
    // 101 recorded times; skip t = 0 to compare at 100 sampled times.
    for (std::size_t i = 1; i < tr.size(); ++i) {
      const auto p = analytic_decay_populations(rates, tr.times[i]);
      worst = std::max({worst, std::abs(p.g - tr.population(i, kG)), std::abs(p.e - tr.population(i, kE)),
                        std::abs(p.f - tr.population(i, kF))});
    }
  }
  return {worst < 1e-6, fmt("max population error %.2e over 2 x 100 times", worst)};
}

Outcome ac09_decoherence() {
  const double dtau = from_ns(4.0), tau_max = from_ns(300.0);
  std::vector<EnvelopeSpec> specs{{EnvelopeKind::stirap_tri, kOmega, 1.0, 0.0, 0.0},
                                  {EnvelopeKind::cd_square_sum, kOmega, 1.0, eta_optimum(Constraint::square_sum).eta, 0.0},
                                  {EnvelopeKind::stirap_cyc, kOmega, 1.0, 0.0, 0.0},
                                  {EnvelopeKind::cd_linear_sum, kOmega, 1.0, eta_optimum(Constraint::linear_sum).eta, 0.0}};
  std::vector<double> worst(specs.size(), 0.0);
  parallel_for(specs.size(), workers(), [&](std::size_t k) {
    CurveOptions noisy;
    noisy.rates = charging_bias_rates();
    const auto u = charging_curve(specs[k], dtau, tau_max);
    const auto l = charging_curve(specs[k], dtau, tau_max, noisy);
    for (std::size_t i = 0; i < u.size(); ++i) worst[k] = std::max(worst[k], std::abs(u.normalized(i) - l.normalized(i)));
  });
  const double w = *std::max_element(worst.begin(), worst.end());
  return {w < 0.02, fmt("max |dE|/E_max = %.4f", w) + fmt(" (tri %.4f", worst[0]) + fmt(", CD %.4f)", worst[1])};
}

Outcome ac10_suppression() {
  const double dtau = from_ns(4.0), tau_max = from_ns(300.0);
  std::string detail;
  bool ok = true;
  for (auto c : {Constraint::square_sum, Constraint::linear_sum}) {
    const auto base_kind = c == Constraint::square_sum ? EnvelopeKind::stirap_tri : EnvelopeKind::stirap_cyc;
    const auto cd = charging_curve_run({cd_kind(c), kOmega, 1.0, eta_optimum(c).eta, 0.0}, dtau, tau_max);
    const auto st = charging_curve_run({base_kind, kOmega, 1.0, 0.0, 0.0}, dtau, tau_max);
    ok = ok && cd.peak_population(kE) <= st.peak_population(kE);
    detail += std::string(to_string(c)) + fmt(": max P_e CD %.4f", cd.peak_population(kE)) +
              fmt(" vs STIRAP %.4f; ", st.peak_population(kE));
  }
  return {ok, detail};
}

Outcome ac11_parity() {
  const auto p = paper_circuit(0.5);
  const auto s = compute_spectrum(p);
  const double rel_half = s.matrix_element / flux_drive_scale(p);
  const double rel_bias = drive_matrix_element(p, 0.496) / flux_drive_scale(p);
  const bool ok = rel_half < 1e-10 && rel_bias > 0.0 && s.anharmonicity() > 0.0;
  return {ok, fmt("|<g|D|f>| rel: %.1e at 0.5", rel_half) + fmt(", %.2e at 0.496", rel_bias) +
                  fmt("; anharmonicity %.4f GHz", to_ghz(s.anharmonicity())) + fmt("; f_ge %.4f GHz", to_ghz(s.omega_ge())) +
                  fmt(", f_gf %.4f GHz", to_ghz(s.omega_gf()))};
}

Outcome ac12_perturbative() {
  int checked = 0, passed = 0;
  double worst = 0.0;
  for (double alpha : {0.0, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.471}) {
    for (double f : {0.5, 0.498, 0.496}) {
      auto p = paper_circuit(f);
      p.alpha = alpha;
      const auto r = harmonic_quartic_levels(p);
      if (r.quality_ratio >= 0.05) continue;
      const double exact = compute_spectrum(p, kDefaultBasisSize, false).omega_ge();
      const double err = std::abs(r.e_e - exact) / exact;
      ++checked;
      passed += err < 0.05;
      worst = std::max(worst, err);
    }
  }
  return {checked > 0 && passed == checked,
          std::to_string(passed) + "/" + std::to_string(checked) + " cases with ratio < 0.05" + fmt(", worst error %.2f%%", 100.0 * worst)};
}

Outcome ac13_tomography() {
  std::vector<double> exact(100), shots(100);
  parallel_for(100, workers(), [&](std::size_t i) {
    std::mt19937_64 rng(1000 + i);
    const auto rho = random_density_matrix(rng);
    exact[i] = fidelity(rho.matrix(), mle_reconstruct(simulate_tomography(rho, 0, 0)).rho);
    std::mt19937_64 rng2(i);
    const auto sigma = random_density_matrix(rng2);
    shots[i] = fidelity(sigma.matrix(), mle_reconstruct(simulate_tomography(sigma, 10000, i)).rho);
  });
  const double worst_exact = *std::min_element(exact.begin(), exact.end());
  const auto good = std::count_if(shots.begin(), shots.end(), [](double f) { return f >= 0.99; });
  return {worst_exact >= 1.0 - 1e-6 && good >= 95,
          fmt("exact: min F = 1 - %.1e", 1.0 - worst_exact) + "; 10^4 shots: " + std::to_string(good) + "/100 seeds F >= 0.99" +
              fmt(" (min %.5f)", *std::min_element(shots.begin(), shots.end()))};
}

Outcome ac14_decay_fit() {
  std::vector<double> t;
  for (int i = 0; i <= 200; ++i) t.push_back(from_us(0.5 * i));
  double worst = 0.0;
  for (const auto& truth : {sweet_spot_rates(), charging_bias_rates()}) {
    const auto fit = fit_decay_rates(synthetic_decay_series(truth, t));
    worst = std::max({worst, std::abs(fit.rates.gamma_eg / truth.gamma_eg - 1.0),
                      std::abs(fit.rates.gamma_fe / truth.gamma_fe - 1.0), std::abs(fit.rates.gamma_fg / truth.gamma_fg - 1.0)});
  }
  return {worst < 0.01, fmt("max relative error %.2e", worst)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome ac15_determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "qbattery_acceptance";
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> configs{
      {"qsl", R"({"experiment":"qsl","seed":5})"},
      {"tomo", R"({"experiment":"tomo-roundtrip","seed":5,"params":{"count":5,"shots":5000}})"},
      {"decay", R"({"experiment":"decay-fit","seed":5,"params":{"noise_std":0.002}})"}};
  int same = 0;
  for (const auto& [name, text] : configs) {
    const auto cfg = dir / (name + ".json");
    std::ofstream(cfg) << text;
    std::string out[2];
    for (int k = 0; k < 2; ++k) {
      const auto path = dir / (name + "_" + std::to_string(k) + ".csv");
      std::filesystem::remove(path);
      const std::string cmd = std::string(QBATTERY_CLI) + " --config " + cfg.string() + " --out " + path.string() +
                              " --threads " + std::to_string(k == 0 ? 1 : 4);
      if (std::system(cmd.c_str()) != 0) return {false, "CLI failed on " + name};
      out[k] = slurp(path);
    }
    same += (!out[0].empty() && out[0] == out[1]);
  }
  return {same == static_cast<int>(configs.size()),
          std::to_string(same) + "/" + std::to_string(configs.size()) + " configs byte-identical across runs (1 vs 4 threads)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"QSL charging time", ac01_qsl_charging},
      {"QSL bound over random specs", ac02_qsl_bound},
      {"constraint identities", ac03_constraints},
      {"dark-state kernel", ac04_dark_state},
      {"optimal eta", ac05_optimal_eta},
      {"phase optimum", ac06_phase},
      {"thermodynamic efficiency", ac07_thermo},
      {"decoherence oracle", ac08_decay_oracle},
      {"decoherence negligibility", ac09_decoherence},
      {"intermediate-state suppression", ac10_suppression},
      {"parity selection rule", ac11_parity},
      {"perturbative spectrum", ac12_perturbative},
      {"tomography round trip", ac13_tomography},
      {"decay-rate recovery", ac14_decay_fit},
      {"CLI determinism", ac15_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("AC%02zu %s  %s: %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
