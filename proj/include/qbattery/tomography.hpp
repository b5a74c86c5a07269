#pragma once

// Qutrit state tomography: the nine pre-measurement rotations, a seeded
// shot-noise simulator, and maximum-likelihood reconstruction over
// rho = T^dag T / tr(T^dag T) with T lower triangular.

#include <ceres/ceres.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qbattery/errors.hpp"
#include "qbattery/qutrit.hpp"

namespace qbattery {

inline constexpr int kTomoSettings = 9;

struct TomographySetting {
  std::array<Matrix3, kTomoSettings> lambda;
  std::array<const char*, kTomoSettings> labels;
};

/// The tabulated rotation set; rotation i is applied before a g/e/f readout.
inline TomographySetting rotation_set() {
  const Complex j(0.0, 1.0);
  const double r = 1.0 / std::sqrt(2.0);
  const double s2 = std::sqrt(2.0);
  TomographySetting s;
  s.labels = {"I",           "(pi/2)x_ge",           "(pi/2)y_ge",           "(pi)x_ge",          "(pi/2)x_ef",
              "(pi/2)y_ef",  "(pi)x_ge (pi/2)x_ef",  "(pi)x_ge (pi/2)y_ef",  "(pi)x_ge (pi)x_ef"};
  s.lambda[0] = Matrix3::Identity();
  s.lambda[1] << 1.0, -j, 0.0, -j, 1.0, 0.0, 0.0, 0.0, s2;
  s.lambda[1] *= r;
  s.lambda[2] << 1.0, -1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, s2;
  s.lambda[2] *= r;
  s.lambda[3] << 0.0, -j, 0.0, -j, 0.0, 0.0, 0.0, 0.0, 1.0;
  s.lambda[4] << s2, 0.0, 0.0, 0.0, 1.0, -j, 0.0, -j, 1.0;
  s.lambda[4] *= r;
  s.lambda[5] << s2, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 1.0, 1.0;
  s.lambda[5] *= r;
  s.lambda[6] << 0.0, s2, 0.0, 1.0, 0.0, -j, -j, 0.0, 1.0;
  s.lambda[6] *= r;
  s.lambda[7] << 0.0, s2, 0.0, 1.0, 0.0, -1.0, 1.0, 0.0, 1.0;
  s.lambda[7] *= r;
  s.lambda[8] << 0.0, 0.0, j, -j, 0.0, 0.0, 0.0, -j, 0.0;
  return s;
}

using Outcome3 = std::array<double, 3>;
using Counts3 = std::array<std::uint64_t, 3>;

/// Readout statistics for all nine settings. With shots == 0 the record holds
/// exact probabilities and `counts` is unused; otherwise `probabilities` are
/// the observed frequencies.
struct TomographyRecord {
  std::array<Outcome3, kTomoSettings> probabilities{};
  std::array<Counts3, kTomoSettings> counts{};
  std::uint64_t shots = 0;  // per setting
  std::uint64_t seed = 0;

  bool exact() const { return shots == 0; }

  void validate() const {
    for (int i = 0; i < kTomoSettings; ++i) {
      if (exact()) {
        double sum = 0.0;
        for (double p : probabilities[i]) {
          if (!(p >= -1e-12 && p <= 1.0 + 1e-12)) throw std::invalid_argument("TomographyRecord: probability outside [0, 1]");
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("TomographyRecord: probabilities do not sum to 1");
      } else {
        const auto total = counts[i][0] + counts[i][1] + counts[i][2];
        if (total != shots) throw std::invalid_argument("TomographyRecord: counts do not sum to shots");
      }
    }
  }
};

/// Uniform double in [0, 1) from the top 53 bits; unlike
/// std::uniform_real_distribution this is identical on every standard library.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline Outcome3 readout_probabilities(const Matrix3& rho, const Matrix3& lambda) {
  const Matrix3 r = lambda * rho * lambda.adjoint();
  return {std::max(0.0, r(0, 0).real()), std::max(0.0, r(1, 1).real()), std::max(0.0, r(2, 2).real())};
}

inline TomographyRecord simulate_tomography(const DensityMatrix3& rho, std::uint64_t shots, std::uint64_t seed) {
  const auto set = rotation_set();
  TomographyRecord rec;
  rec.shots = shots;
  rec.seed = seed;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < kTomoSettings; ++i) {
    Outcome3 p = readout_probabilities(rho.matrix(), set.lambda[i]);
    const double total = p[0] + p[1] + p[2];
    for (double& x : p) x /= total;
    rec.probabilities[i] = p;
    if (shots > 0) {
      Counts3 c{0, 0, 0};
      for (std::uint64_t n = 0; n < shots; ++n) {
        const double u = unit_uniform(rng);
        ++c[u < p[0] ? 0 : (u < p[0] + p[1] ? 1 : 2)];
      }
      rec.counts[i] = c;
      for (int k = 0; k < 3; ++k) rec.probabilities[i][k] = static_cast<double>(c[k]) / static_cast<double>(shots);
    }
  }
  return rec;
}

/// Standard normal deviate by Box-Muller on unit_uniform (portable, unlike
/// std::normal_distribution).
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = unit_uniform(rng);
  while (u1 <= 0.0) u1 = unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Hilbert-Schmidt random mixed state G G^dag / tr, G complex Ginibre.
inline DensityMatrix3 random_density_matrix(std::mt19937_64& rng) {
  Matrix3 g;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) g(r, c) = Complex(standard_normal(rng), standard_normal(rng));
  Matrix3 rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix3(Matrix3(0.5 * (rho + rho.adjoint())));
}

/// Haar-random pure state.
inline PureState3 random_pure_state(std::mt19937_64& rng) {
  Vector3 v;
  for (int r = 0; r < 3; ++r) v(r) = Complex(standard_normal(rng), standard_normal(rng));
  return PureState3::normalized(v);
}

struct MleResult {
  Matrix3 rho = Matrix3::Identity() / 3.0;
  bool converged = false;
  int iterations = 0;
  double neg_log_likelihood = 0.0;  // per-setting normalized weights
  std::string message;

  DensityMatrix3 state() const { return DensityMatrix3(rho); }
};

namespace detail {

inline Matrix3 lower_triangular(const double* x) {
  Matrix3 t = Matrix3::Zero();
  t(0, 0) = x[0];
  t(1, 1) = x[1];
  t(2, 2) = x[2];
  t(1, 0) = Complex(x[3], x[4]);
  t(2, 0) = Complex(x[5], x[6]);
  t(2, 1) = Complex(x[7], x[8]);
  return t;
}

// Least-squares linear inversion of the outcome frequencies, eigenvalues
// projected onto the simplex, mixed with a trace of the identity so the
// start lies strictly inside the state space. Returns the T parameters.
inline void start_point(const std::array<Matrix3, 27>& proj, const std::array<double, 27>& w, double* x) {
  // Hermitian basis: three diagonal units, then real and imaginary off-diagonal pairs.
  std::array<Matrix3, 9> basis;
  for (auto& b : basis) b.setZero();
  for (int k = 0; k < 3; ++k) basis[k](k, k) = 1.0;
  const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  for (int p = 0; p < 3; ++p) {
    const int i = pairs[p][0], j = pairs[p][1];
    basis[3 + 2 * p](i, j) = basis[3 + 2 * p](j, i) = 1.0;
    basis[4 + 2 * p](i, j) = Complex(0.0, -1.0);
    basis[4 + 2 * p](j, i) = Complex(0.0, 1.0);
  }
  Eigen::Matrix<double, 27, 9> a;
  Eigen::Matrix<double, 27, 1> b;
  for (int m = 0; m < 27; ++m) {
    for (int c = 0; c < 9; ++c) a(m, c) = (proj[m] * basis[c]).trace().real();
    b(m) = w[m];
  }
  const Eigen::Matrix<double, 9, 1> c = a.colPivHouseholderQr().solve(b);
  Matrix3 rho = Matrix3::Zero();
  for (int k = 0; k < 9; ++k) rho += c(k) * basis[k];
  rho = 0.5 * (rho + rho.adjoint());

  Eigen::SelfAdjointEigenSolver<Matrix3> es(rho);
  Eigen::Vector3d ev = es.eigenvalues();
  // Euclidean projection onto the probability simplex.
  Eigen::Vector3d sorted = ev;
  std::sort(sorted.data(), sorted.data() + 3, std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (int k = 0; k < 3; ++k) {
    cum += sorted(k);
    const double t = (cum - 1.0) / (k + 1);
    if (sorted(k) - t > 0.0) theta = t;
  }
  for (int k = 0; k < 3; ++k) ev(k) = std::max(ev(k) - theta, 0.0);
  constexpr double kMix = 1e-9;
  rho = es.eigenvectors() * ev.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  rho = (1.0 - kMix) * rho / rho.trace().real() + (kMix / 3.0) * Matrix3::Identity();

  // rho = U U^dag with U upper triangular, so T = U^dag is lower triangular
  // and T^dag T = rho. U comes from the Cholesky factor of the reversed matrix.
  Matrix3 rev;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rev(i, j) = rho(2 - i, 2 - j);
  const Matrix3 l = rev.llt().matrixL();
  Matrix3 t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t(i, j) = std::conj(l(2 - j, 2 - i));
  // Diagonal of a Cholesky factor is real and positive, as the parameterization expects.
  x[0] = t(0, 0).real();
  x[1] = t(1, 1).real();
  x[2] = t(2, 2).real();
  x[3] = t(1, 0).real();
  x[4] = t(1, 0).imag();
  x[5] = t(2, 0).real();
  x[6] = t(2, 0).imag();
  x[7] = t(2, 1).real();
  x[8] = t(2, 1).imag();
}

// Multinomial negative log-likelihood in the nine T parameters with its
// analytic gradient. For A = T^dag T and G = dL/dA,
// dL/dRe T_jl = 2 Re (G T^dag)_lj and dL/dIm T_jl = -2 Im (G T^dag)_lj.
class TomographyLikelihood final : public ceres::FirstOrderFunction {
 public:
  TomographyLikelihood(std::array<Matrix3, 27> projectors, std::array<double, 27> weights)
      : proj_(std::move(projectors)), w_(weights) {
    for (double v : w_) total_ += v;
  }

  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    const Matrix3 t = lower_triangular(x);
    const Matrix3 a = t.adjoint() * t;
    const double tr = a.trace().real();
    if (!(tr > 0.0)) return false;
    double nll = 0.0;
    Matrix3 g = Matrix3::Zero();
    for (std::size_t m = 0; m < proj_.size(); ++m) {
      if (w_[m] == 0.0) continue;
      const double q = (proj_[m] * a).trace().real();
      if (!(q > 0.0)) return false;
      nll -= w_[m] * std::log(q / tr);
      g -= (w_[m] / q) * proj_[m];
    }
    g += (total_ / tr) * Matrix3::Identity();
    *cost = nll;
    if (gradient != nullptr) {
      const Matrix3 gt = g * t.adjoint();
      auto re = [&](int j, int l) { return 2.0 * gt(l, j).real(); };
      auto im = [&](int j, int l) { return -2.0 * gt(l, j).imag(); };
      gradient[0] = re(0, 0);
      gradient[1] = re(1, 1);
      gradient[2] = re(2, 2);
      gradient[3] = re(1, 0);
      gradient[4] = im(1, 0);
      gradient[5] = re(2, 0);
      gradient[6] = im(2, 0);
      gradient[7] = re(2, 1);
      gradient[8] = im(2, 1);
    }
    return true;
  }

  int NumParameters() const override { return 9; }

 private:
  std::array<Matrix3, 27> proj_;
  std::array<double, 27> w_;
  double total_ = 0.0;
};

}  // namespace detail

/// Maximum-likelihood state from a record. Starts from the projected linear
/// inversion; the optimizer is deterministic (single thread, fixed options).
inline MleResult mle_reconstruct(const TomographyRecord& rec, int max_iterations = 5000) {
  rec.validate();
  const auto set = rotation_set();
  std::array<Matrix3, 27> proj;
  std::array<double, 27> w{};
  const double norm = rec.exact() ? 1.0 : static_cast<double>(rec.shots);
  for (int i = 0; i < kTomoSettings; ++i) {
    for (int k = 0; k < 3; ++k) {
      // Probability of outcome k after lambda_i is tr(lambda_i^dag |k><k| lambda_i rho).
      const Vector3 row = set.lambda[i].row(k).adjoint();
      proj[3 * i + k] = row * row.adjoint();
      w[3 * i + k] = rec.exact() ? std::max(0.0, rec.probabilities[i][k]) : static_cast<double>(rec.counts[i][k]) / norm;
    }
  }

  double x[9];
  detail::start_point(proj, w, x);
  double start[9];
  std::copy(x, x + 9, start);
  ceres::GradientProblem problem(new detail::TomographyLikelihood(proj, w));
  ceres::GradientProblemSolver::Options options;
  options.line_search_direction_type = ceres::BFGS;
  options.max_num_iterations = max_iterations;
  options.function_tolerance = 1e-16;
  options.gradient_tolerance = 1e-14;
  options.parameter_tolerance = 1e-14;
  options.logging_type = ceres::SILENT;
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(options, problem, x, &summary);

  // Near rank-deficient optima the line search can stop early; never return
  // something worse than the starting point.
  double start_cost = 0.0;
  if (problem.Evaluate(start, &start_cost, nullptr) && !(summary.final_cost <= start_cost)) {
    std::copy(start, start + 9, x);
    summary.final_cost = start_cost;
  }

  MleResult out;
  const Matrix3 t = detail::lower_triangular(x);
  const Matrix3 a = t.adjoint() * t;
  out.rho = a / a.trace().real();
  out.rho = 0.5 * (out.rho + out.rho.adjoint());
  out.iterations = static_cast<int>(summary.iterations.size());
  out.neg_log_likelihood = summary.final_cost;
  out.converged = summary.termination_type == ceres::CONVERGENCE;
  out.message = summary.message;
  return out;
}

// JSON form: {"shots": n, "seed": s, "settings": [{"label": ..., "probabilities": [..3], "counts": [..3]}, ...]}

inline nlohmann::json to_json(const TomographyRecord& rec) {
  const auto set = rotation_set();
  nlohmann::json j;
  j["shots"] = rec.shots;
  j["seed"] = rec.seed;
  j["settings"] = nlohmann::json::array();
  for (int i = 0; i < kTomoSettings; ++i) {
    nlohmann::json s;
    s["label"] = set.labels[i];
    s["probabilities"] = rec.probabilities[i];
    if (!rec.exact()) s["counts"] = rec.counts[i];
    j["settings"].push_back(s);
  }
  return j;
}

inline TomographyRecord tomography_record_from_json(const nlohmann::json& j) {
  TomographyRecord rec;
  rec.shots = j.at("shots").get<std::uint64_t>();
  rec.seed = j.at("seed").get<std::uint64_t>();
  const auto& settings = j.at("settings");
  if (!settings.is_array() || settings.size() != kTomoSettings)
    throw std::invalid_argument("tomography record: expected 9 settings");
  for (int i = 0; i < kTomoSettings; ++i) {
    rec.probabilities[i] = settings[i].at("probabilities").get<Outcome3>();
    if (!rec.exact()) rec.counts[i] = settings[i].at("counts").get<Counts3>();
  }
  rec.validate();
  return rec;
}

}  // namespace qbattery
