#pragma once

#include "astpa/core.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace astpa {

// ---------------------------------------------------------------------------
// Gaussian input variables
// ---------------------------------------------------------------------------

/// A Gaussian physical variable, given either by coefficient of variation
/// (std = |mean| * cov) or by an explicit standard deviation.
struct GaussianVariableSpec {
  double mean = 0.0;
  std::optional<double> cov_fraction;
  std::optional<double> std_dev;

  static GaussianVariableSpec with_cov(double mean, double cov) { return {mean, cov, std::nullopt}; }
  static GaussianVariableSpec with_std(double mean, double sd) { return {mean, std::nullopt, sd}; }

  double stddev() const {
    if (cov_fraction.has_value() == std_dev.has_value())
      throw SpecError("GaussianVariableSpec: exactly one of cov_fraction / std_dev must be given");
    const double sd = cov_fraction ? std::abs(mean) * *cov_fraction : *std_dev;
    if (!(sd > 0.0) || !std::isfinite(sd))
      throw SpecError("GaussianVariableSpec: standard deviation must be positive, got " + std::to_string(sd));
    return sd;
  }
};

/// Per-component standard deviations, i.e. dx_j/dtheta_j.
inline Vector standardization_scales(std::span<const GaussianVariableSpec> specs) {
  Vector s(static_cast<Index>(specs.size()));
  for (std::size_t j = 0; j < specs.size(); ++j) s[static_cast<Index>(j)] = specs[j].stddev();
  return s;
}

/// Maps a standard normal point to physical space: x_j = mean_j + std_j * theta_j.
inline Vector standardize(std::span<const GaussianVariableSpec> specs, const Vector& theta) {
  if (static_cast<Index>(specs.size()) != theta.size())
    throw DimensionError("standardize: " + std::to_string(specs.size()) + " specs for a " +
                         std::to_string(theta.size()) + "-vector");
  Vector x(theta.size());
  for (Index j = 0; j < theta.size(); ++j) {
    const auto& s = specs[static_cast<std::size_t>(j)];
    x[j] = s.mean + s.stddev() * theta[j];
  }
  return x;
}

// ---------------------------------------------------------------------------
// Limit-state problems
// ---------------------------------------------------------------------------

struct LimitStateValue {
  double g = 0.0;
  Vector grad;
};

/// A limit-state function g in standard normal space together with a
/// per-instance model-call counter. Copies share the (immutable) function but
/// each copy counts its own calls, so one copy per run is thread-safe.
class LimitStateProblem {
 public:
  using Function = std::function<LimitStateValue(const Vector&)>;

  LimitStateProblem(std::string name, Index dim, Function fn)
      : name_(std::move(name)), dim_(dim), fn_(std::move(fn)) {
    if (dim_ < 1) throw SpecError("LimitStateProblem: dim must be >= 1");
    if (!fn_) throw SpecError("LimitStateProblem: empty evaluator");
  }

  /// One model call: value and gradient together.
  LimitStateValue evaluate(const Vector& theta) {
    if (theta.size() != dim_)
      throw DimensionError("LimitStateProblem '" + name_ + "': expected dimension " + std::to_string(dim_) +
                           ", got " + std::to_string(theta.size()));
    ++calls_;
    LimitStateValue v = fn_(theta);
    if (!std::isfinite(v.g) || v.grad.size() != dim_ || !v.grad.allFinite())
      throw EvaluationError("LimitStateProblem '" + name_ + "': non-finite value or gradient", theta);
    return v;
  }

  const std::string& name() const noexcept { return name_; }
  Index dim() const noexcept { return dim_; }
  std::uint64_t calls() const noexcept { return calls_; }
  void reset_calls() noexcept { calls_ = 0; }

 private:
  std::string name_;
  Index dim_;
  Function fn_;
  std::uint64_t calls_ = 0;
};

/// Scale normalizer for g: g(0) when g(0) > 8 or g(0) < 1, else 1.
/// Negative g(0) is treated through |g(0)|, floored at 1e-8. Exactly zero
/// g(0) leaves no scale to normalize by and is rejected.
inline double compute_gc(LimitStateProblem& problem) {
  const double g0 = problem.evaluate(Vector::Zero(problem.dim())).g;
  if (g0 == 0.0)
    throw DegenerateNormalizationError("compute_gc: g(0) = 0 for problem '" + problem.name() +
                                       "'; pass g_c explicitly");
  if (g0 < 0.0) warn("compute_gc: g(0) < 0 (origin already fails); using |g(0)|");
  const double a = std::abs(g0);
  if (a >= 1.0 && a <= 8.0) return 1.0;
  return std::max(a, 1e-8);
}

// ---------------------------------------------------------------------------
// Chain state
// ---------------------------------------------------------------------------

/// A point of a Markov chain with everything evaluated there cached. For
/// ASTPA targets g and grad_g are kept so the log-density can be rescored
/// under a different sigma without another model call.
struct ChainState {
  Vector theta;
  double log_target = 0.0;
  Vector grad;  // gradient of log_target
  double g_val = std::numeric_limits<double>::quiet_NaN();
  Vector grad_g;
};

// ---------------------------------------------------------------------------
// ASTPA target
// ---------------------------------------------------------------------------

struct LogTargetValue {
  double logh = 0.0;
  Vector grad;
  double g_val = 0.0;
};

/// Likelihood-weighted prior
///
///   log h(theta) = -g(theta)^2 / (2 sigma^2 g_c^2) - |theta|^2 / 2
///
/// with all additive constants dropped. sigma anneals from sigma0 = 1 to
/// sigma_final over the burn-in.
class TargetModel {
 public:
  static constexpr double kSigma0 = 1.0;

  TargetModel(LimitStateProblem problem, double sigma_final, double g_c, Index burn_in_len)
      : problem_(std::move(problem)), sigma_final_(sigma_final), sigma_(sigma_final), g_c_(g_c),
        burn_in_len_(burn_in_len) {
    if (!(sigma_final > 0.0 && sigma_final <= 1.0))
      throw SpecError("TargetModel: sigma_final must be in (0, 1]");
    if (!(g_c != 0.0) || !std::isfinite(g_c)) throw SpecError("TargetModel: g_c must be finite and nonzero");
    if (burn_in_len < 1) throw SpecError("TargetModel: burn_in_len must be >= 1");
    if (sigma_final < 0.1 || sigma_final > 0.7)
      warn("TargetModel: sigma_final outside the recommended range [0.1, 0.7]");
  }

  /// Builds the target with g_c computed from the problem (one model call).
  static TargetModel create(LimitStateProblem problem, double sigma_final, Index burn_in_len) {
    const double gc = compute_gc(problem);
    return TargetModel(std::move(problem), sigma_final, gc, burn_in_len);
  }

  double log_likelihood(double g) const {
    const double s = sigma_ * g_c_;
    return -(g * g) / (2.0 * s * s);
  }

  static double log_prior(const Vector& theta) { return -0.5 * theta.squaredNorm(); }

  /// Log normalizer of the standard normal prior that log_prior drops.
  double log_prior_normalizer() const { return -0.5 * static_cast<double>(dim()) * kLog2Pi; }

  /// One model call.
  LogTargetValue log_target_and_grad(const Vector& theta) {
    if (!theta.allFinite()) throw EvaluationError("log_target_and_grad: non-finite theta", theta);
    const LimitStateValue v = problem_.evaluate(theta);
    const double s2 = sigma_ * sigma_ * g_c_ * g_c_;
    LogTargetValue out;
    out.g_val = v.g;
    out.logh = -(v.g * v.g) / (2.0 * s2) - 0.5 * theta.squaredNorm();
    out.grad = -(v.g / s2) * v.grad - theta;
    return out;
  }

  /// One model call; caches g and grad g in the returned state.
  ChainState evaluate(const Vector& theta) {
    if (!theta.allFinite()) throw EvaluationError("TargetModel::evaluate: non-finite theta", theta);
    LimitStateValue v = problem_.evaluate(theta);
    ChainState st;
    st.theta = theta;
    st.g_val = v.g;
    st.grad_g = std::move(v.grad);
    rescore(st);
    return st;
  }

  /// Recomputes log_target and grad of a state from its cached g under the
  /// current sigma. No model call.
  void rescore(ChainState& st) const {
    const double s2 = sigma_ * sigma_ * g_c_ * g_c_;
    st.log_target = -(st.g_val * st.g_val) / (2.0 * s2) - 0.5 * st.theta.squaredNorm();
    st.grad = -(st.g_val / s2) * st.grad_g - st.theta;
  }

  Index dim() const noexcept { return problem_.dim(); }
  double sigma() const noexcept { return sigma_; }
  void set_sigma(double s) {
    if (!(s > 0.0)) throw SpecError("TargetModel: sigma must be positive");
    sigma_ = s;
  }
  double sigma_final() const noexcept { return sigma_final_; }
  double g_c() const noexcept { return g_c_; }
  Index burn_in_len() const noexcept { return burn_in_len_; }
  void set_burn_in_len(Index b) {
    if (b < 1) throw SpecError("TargetModel: burn_in_len must be >= 1");
    burn_in_len_ = b;
  }
  LimitStateProblem& problem() noexcept { return problem_; }
  const LimitStateProblem& problem() const noexcept { return problem_; }
  std::uint64_t calls() const noexcept { return problem_.calls(); }

 private:
  LimitStateProblem problem_;
  double sigma_final_;
  double sigma_;
  double g_c_;
  Index burn_in_len_;
};

/// Geometric interpolation sigma0^(1 - m/B) * sigma_final^(m/B) over the
/// burn-in, constant sigma_final afterwards.
inline double sigma_schedule(Index m, const TargetModel& model) {
  const Index b = model.burn_in_len();
  if (m >= b) return model.sigma_final();
  const double t = static_cast<double>(m) / static_cast<double>(b);
  return std::pow(TargetModel::kSigma0, 1.0 - t) * std::pow(model.sigma_final(), t);
}

}  // namespace astpa
