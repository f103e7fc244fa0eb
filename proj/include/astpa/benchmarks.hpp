#pragma once

#include "astpa/core.hpp"
#include "astpa/target_model.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace astpa::bench {

// ---------------------------------------------------------------------------
// Example 1: parabolic / concave limit state, two design points
// ---------------------------------------------------------------------------

inline LimitStateValue parabolic_g(const Vector& theta) {
  if (theta.size() != 2) throw DimensionError("parabolic_g: expects 2 variables");
  constexpr double r = 6.0, kappa = 0.3, e = 0.1;
  const double u = theta[0] - e;
  LimitStateValue v;
  v.g = r - theta[1] - kappa * u * u;
  v.grad = Vector(2);
  v.grad << -2.0 * kappa * u, -1.0;
  return v;
}

// ---------------------------------------------------------------------------
// Example 2: four-branch series system
// ---------------------------------------------------------------------------

inline std::array<double, 4> four_branch_values(const Vector& theta) {
  const double u = theta[0] - theta[1];
  const double v = theta[0] + theta[1];
  const double r2 = std::numbers::sqrt2;
  return {3.0 + 0.1 * u * u - v / r2, 3.0 + 0.1 * u * u + v / r2, 7.0 / r2 + u, 7.0 / r2 - u};
}

/// Index (0-based) of the first branch attaining the minimum.
inline int four_branch_active(const Vector& theta) {
  const auto b = four_branch_values(theta);
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (b[static_cast<std::size_t>(i)] < b[static_cast<std::size_t>(best)]) best = i;
  return best;
}

/// Branches 1-2 are quadratic in theta1 - theta2 and linear in theta1 + theta2.
inline LimitStateValue four_branch_g(const Vector& theta) {
  if (theta.size() != 2) throw DimensionError("four_branch_g: expects 2 variables");
  const double u = theta[0] - theta[1];
  const double r2 = std::numbers::sqrt2;
  const auto b = four_branch_values(theta);
  const auto k = static_cast<std::size_t>(four_branch_active(theta));
  LimitStateValue out;
  out.g = b[k];
  out.grad = Vector(2);
  switch (k) {
    case 0: out.grad << 0.2 * u - 1.0 / r2, -0.2 * u - 1.0 / r2; break;
    case 1: out.grad << 0.2 * u + 1.0 / r2, -0.2 * u + 1.0 / r2; break;
    case 2: out.grad << 1.0, -1.0; break;
    default: out.grad << -1.0, 1.0; break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Example 3: undamped nonlinear SDOF oscillator under a rectangular impulse
// ---------------------------------------------------------------------------

/// Random variables in the order (k1, k2, M, r, T1, F1).
inline std::vector<GaussianVariableSpec> oscillator_variables(double mean_f1) {
  return {
      GaussianVariableSpec::with_cov(1.0, 0.1),          // k1
      GaussianVariableSpec::with_cov(0.1, 0.1),          // k2
      GaussianVariableSpec::with_cov(1.0, 0.05),         // M
      GaussianVariableSpec::with_cov(0.5, 0.1),          // r
      GaussianVariableSpec::with_cov(1.0, 0.2),          // T1
      GaussianVariableSpec::with_cov(mean_f1, 1.0 / 6.0) // F1
  };
}

/// g = 3r - |2 F1 / (M w0^2) sin(w0 T1 / 2)|, w0 = sqrt((k1 + k2) / M), in
/// standard normal coordinates.
inline LimitStateValue oscillator_impulse_g(const Vector& theta, double mean_f1) {
  if (theta.size() != 6) throw DimensionError("oscillator_impulse_g: expects 6 variables");
  const auto vars = oscillator_variables(mean_f1);
  const Vector x = standardize(vars, theta);
  const Vector scale = standardization_scales(vars);
  const double k1 = x[0], k2 = x[1], m = x[2], r = x[3], t1 = x[4], f1 = x[5];
  const double k = k1 + k2;
  if (!(m > 0.0) || !(k > 0.0))
    throw EvaluationError("oscillator_impulse_g: non-physical mass or stiffness", theta);
  const double w0 = std::sqrt(k / m);
  const double s = std::sin(0.5 * w0 * t1);
  const double c = std::cos(0.5 * w0 * t1);
  // M w0^2 = k1 + k2.
  const double a = 2.0 * f1 * s / k;
  const double sign = a >= 0.0 ? 1.0 : -1.0;

  const double da_dk = -2.0 * f1 * s / (k * k) + f1 * c * t1 * w0 / (2.0 * k * k);
  const double da_dm = -f1 * c * t1 * w0 / (2.0 * k * m);
  const double da_dt = f1 * c * w0 / k;
  const double da_df = 2.0 * s / k;

  LimitStateValue v;
  v.g = 3.0 * r - std::abs(a);
  Vector dx(6);
  dx << -sign * da_dk, -sign * da_dk, -sign * da_dm, 3.0, -sign * da_dt, -sign * da_df;
  v.grad = dx.cwiseProduct(scale);
  return v;
}

// ---------------------------------------------------------------------------
// Example 4: linear SDOF oscillator under discretized white noise
// ---------------------------------------------------------------------------

/// y'' + 2 xi omega y' + omega^2 y = W(t), at rest at t = 0, with W held
/// constant over each step. Responses at t_j = j dt, j = 0..n-1, are exactly
/// linear in theta through the zero-order-hold impulse response.
class SdofSystem {
 public:
  double omega = 7.85;
  double xi = 0.02;
  double s0 = 1.0;
  double dt = 0.05;
  double duration = 5.0;

  SdofSystem() { build(); }
  SdofSystem(double omega_, double xi_, double s0_, double dt_, double duration_)
      : omega(omega_), xi(xi_), s0(s0_), dt(dt_), duration(duration_) {
    build();
  }

  Index steps() const noexcept { return n_; }
  double excitation_scale() const noexcept { return scale_; }
  const Eigen::Matrix2d& transition() const noexcept { return phi_; }
  const Eigen::Vector2d& input_gain() const noexcept { return gamma_; }

  /// h[m] = e1' Phi^m Gamma: displacement at t_{j+m+1} per unit force held on [t_j, t_{j+1}).
  const Vector& impulse_response() const noexcept { return h_; }

  /// Displacements Y(t_0..t_{n-1}) for excitation W(t_j) = scale * theta_j.
  Vector response(const Vector& theta) const {
    if (theta.size() != n_) throw DimensionError("SdofSystem::response: expects " + std::to_string(n_) + " variables");
    Vector y(n_);
    Eigen::Vector2d state = Eigen::Vector2d::Zero();
    y[0] = 0.0;
    for (Index j = 1; j < n_; ++j) {
      state = phi_ * state + gamma_ * (scale_ * theta[j - 1]);
      y[j] = state[0];
    }
    return y;
  }

  /// Row j of the influence matrix: dY(t_j)/dtheta.
  Vector influence_row(Index j) const {
    Vector row = Vector::Zero(n_);
    for (Index k = 0; k < j; ++k) row[k] = scale_ * h_[j - 1 - k];
    return row;
  }

 private:
  void build() {
    const double n_real = duration / dt + 1.0;
    n_ = static_cast<Index>(std::llround(n_real));
    if (n_ < 2 || std::abs(n_real - static_cast<double>(n_)) > 1e-9)
      throw SpecError("SdofSystem: duration must be a multiple of dt");
    scale_ = std::sqrt(2.0 * std::numbers::pi * s0 / dt);
    Eigen::Matrix3d aug = Eigen::Matrix3d::Zero();
    aug(0, 1) = 1.0;
    aug(1, 0) = -omega * omega;
    aug(1, 1) = -2.0 * xi * omega;
    aug(1, 2) = 1.0;
    const Eigen::Matrix3d e = (aug * dt).exp();
    phi_ = e.topLeftCorner<2, 2>();
    gamma_ = e.block<2, 1>(0, 2);
    h_ = Vector(n_);
    Eigen::Vector2d v = gamma_;
    for (Index m = 0; m < n_; ++m) {
      h_[m] = v[0];
      v = phi_ * v;
    }
  }

  Index n_ = 0;
  double scale_ = 0.0;
  Eigen::Matrix2d phi_;
  Eigen::Vector2d gamma_;
  Vector h_;
};

/// g = R - max_j Y(t_j); gradient from the first maximizing instant.
inline LimitStateValue sdof_whitenoise_g(const SdofSystem& sys, const Vector& theta, double threshold) {
  const Vector y = sys.response(theta);
  Index j_star = 0;
  for (Index j = 1; j < y.size(); ++j)
    if (y[j] > y[j_star]) j_star = j;
  LimitStateValue v;
  v.g = threshold - y[j_star];
  v.grad = -sys.influence_row(j_star);
  return v;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names{"parabolic",          "four_branch", "sdof_impulse_06",
                                              "sdof_impulse_045",   "sdof_wn_r18", "sdof_wn_r20"};
  return names;
}

/// Reference failure probabilities.
inline double exact_pf(std::string_view name) {
  if (name == "parabolic") return 3.95e-5;
  if (name == "four_branch") return 2.20e-3;
  if (name == "sdof_impulse_06") return 9.09e-6;
  if (name == "sdof_impulse_045") return 1.55e-8;
  if (name == "sdof_wn_r18") return 2.53e-6;
  if (name == "sdof_wn_r20") return 1.11e-7;
  throw ConfigError("unknown benchmark '" + std::string(name) + "'");
}

inline LimitStateProblem make_parabolic() { return {"parabolic", 2, parabolic_g}; }
inline LimitStateProblem make_four_branch() { return {"four_branch", 2, four_branch_g}; }

inline LimitStateProblem make_oscillator_impulse(double mean_f1, std::string name) {
  return {std::move(name), 6, [mean_f1](const Vector& t) { return oscillator_impulse_g(t, mean_f1); }};
}

inline LimitStateProblem make_sdof_whitenoise(double threshold, std::string name) {
  auto sys = std::make_shared<const SdofSystem>();
  return {std::move(name), sys->steps(),
          [sys, threshold](const Vector& t) { return sdof_whitenoise_g(*sys, t, threshold); }};
}

inline LimitStateProblem make_benchmark(std::string_view name) {
  if (name == "parabolic") return make_parabolic();
  if (name == "four_branch") return make_four_branch();
  if (name == "sdof_impulse_06") return make_oscillator_impulse(0.6, std::string(name));
  if (name == "sdof_impulse_045") return make_oscillator_impulse(0.45, std::string(name));
  if (name == "sdof_wn_r18") return make_sdof_whitenoise(1.8, std::string(name));
  if (name == "sdof_wn_r20") return make_sdof_whitenoise(2.0, std::string(name));
  throw ConfigError("unknown benchmark '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Crude Monte Carlo
// ---------------------------------------------------------------------------

struct McResult {
  double pf_hat = 0.0;
  std::optional<double> cov_hat;  // empty when no failures were observed
  std::uint64_t failures = 0;
  std::uint64_t n = 0;
};

/// Brute-force estimate over n standard normal draws.
inline McResult mc_oracle(LimitStateProblem& problem, std::uint64_t n, Random& rng) {
  if (n < 1) throw ConfigError("mc_oracle: n must be >= 1");
  McResult out;
  out.n = n;
  Vector theta(problem.dim());
  for (std::uint64_t i = 0; i < n; ++i) {
    for (Index j = 0; j < theta.size(); ++j) theta[j] = rng.gaussian();
    try {
      if (problem.evaluate(theta).g <= 0.0) ++out.failures;
    } catch (const EvaluationError&) {
      // outside the physical domain of the model; counted as safe
    }
  }
  out.pf_hat = static_cast<double>(out.failures) / static_cast<double>(n);
  if (out.failures > 0) out.cov_hat = std::sqrt((1.0 - out.pf_hat) / (static_cast<double>(n) * out.pf_hat));
  return out;
}

}  // namespace astpa::bench
