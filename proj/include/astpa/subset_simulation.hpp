#pragma once

#include "astpa/core.hpp"
#include "astpa/target_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace astpa {

enum class SusProposal { uniform_width2, std_normal };

struct SusConfig {
  Index n_s = 1000;
  double p0 = 0.1;
  SusProposal proposal = SusProposal::uniform_width2;
  int max_levels = 20;
  /// Half-width of the uniform window or standard deviation of the normal
  /// proposal, per component.
  double proposal_scale = 1.0;
};

struct SusResult {
  double pf = 0.0;
  int levels = 0;                  // conditional levels run
  std::vector<double> thresholds;  // one per level, the last one <= 0
  std::vector<double> acceptance;  // fraction of chain moves per conditional level
  double final_fraction = 0.0;
  std::uint64_t model_calls = 0;
  std::uint64_t skipped_calls = 0;  // chain steps whose candidate equalled the current state
};

class SusConvergenceError : public Error {
 public:
  SusConvergenceError(const std::string& msg, std::vector<double> thresholds)
      : Error(msg), thresholds_(std::move(thresholds)) {}
  const std::vector<double>& thresholds() const noexcept { return thresholds_; }

 private:
  std::vector<double> thresholds_;
};

struct SusPoint {
  Vector theta;
  double g = std::numeric_limits<double>::infinity();
};

struct CwmhOutcome {
  SusPoint point;
  bool moved = false;
  bool called = false;
};

/// One component-wise Metropolis-Hastings step conditional on g <= b. Each
/// component is drawn from a symmetric proposal and accepted with probability
/// min(1, phi(xi_j) / phi(theta_j)); the candidate costs one model call unless
/// every component was rejected.
inline CwmhOutcome cwmh_step(const SusPoint& current, double b, SusProposal proposal, double scale,
                             LimitStateProblem& problem, Random& rng) {
  const Index d = current.theta.size();
  Vector xi = current.theta;
  bool changed = false;
  for (Index j = 0; j < d; ++j) {
    const double t = current.theta[j];
    const double cand = proposal == SusProposal::uniform_width2 ? rng.uniform(t - scale, t + scale)
                                                                 : t + scale * rng.gaussian();
    const double log_ratio = 0.5 * (t * t - cand * cand);
    if (std::log(rng.uniform()) < log_ratio) {
      xi[j] = cand;
      changed = changed || cand != t;
    }
  }
  CwmhOutcome out{current, false, false};
  if (!changed) return out;
  out.called = true;
  double g = std::numeric_limits<double>::infinity();
  try {
    g = problem.evaluate(xi).g;
  } catch (const EvaluationError&) {
    return out;
  }
  if (g <= b) {
    out.point = SusPoint{std::move(xi), g};
    out.moved = true;
  }
  return out;
}

inline Index sus_seed_count(const SusConfig& cfg) {
  if (!(cfg.p0 > 0.0 && cfg.p0 < 1.0)) throw ConfigError("subset simulation: p0 must lie in (0, 1)");
  if (cfg.n_s < 2) throw ConfigError("subset simulation: n_s must be >= 2");
  if (cfg.max_levels < 1) throw ConfigError("subset simulation: max_levels must be >= 1");
  if (!(cfg.proposal_scale > 0.0)) throw ConfigError("subset simulation: proposal_scale must be positive");
  const double exact = cfg.p0 * static_cast<double>(cfg.n_s);
  const auto nc = static_cast<Index>(std::llround(exact));
  if (std::abs(exact - static_cast<double>(nc)) > 1e-9)
    warn("subset simulation: n_s * p0 is not an integer; rounded to " + std::to_string(nc));
  if (nc < 1 || nc >= cfg.n_s) throw ConfigError("subset simulation: n_s * p0 must lie in [1, n_s)");
  return nc;
}

/// Subset Simulation with component-wise MH chains.
inline SusResult run_sus(LimitStateProblem& problem, const SusConfig& cfg, Random& rng) {
  const Index nc = sus_seed_count(cfg);
  const Index n_s = cfg.n_s;
  const Index d = problem.dim();
  const std::uint64_t calls_before = problem.calls();

  std::vector<SusPoint> samples(static_cast<std::size_t>(n_s));
  for (auto& s : samples) {
    s.theta = rng.gaussian_vector(d);
    try {
      s.g = problem.evaluate(s.theta).g;
    } catch (const EvaluationError&) {
      s.g = std::numeric_limits<double>::infinity();
    }
  }

  SusResult res;
  std::vector<std::size_t> order(samples.size());
  for (int level = 0;; ++level) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return samples[a].g < samples[b].g; });
    const double b = samples[order[static_cast<std::size_t>(nc - 1)]].g;
    res.thresholds.push_back(b);

    if (b <= 0.0) {
      const auto failures = std::count_if(samples.begin(), samples.end(), [](const SusPoint& s) { return s.g <= 0.0; });
      res.levels = level;
      res.final_fraction = static_cast<double>(failures) / static_cast<double>(n_s);
      res.pf = std::pow(cfg.p0, level) * res.final_fraction;
      break;
    }
    if (level >= cfg.max_levels)
      throw SusConvergenceError("subset simulation: no convergence within " + std::to_string(cfg.max_levels) +
                                    " levels",
                                res.thresholds);

    std::vector<SusPoint> next;
    next.reserve(samples.size());
    const Index base = n_s / nc;
    const Index extra = n_s % nc;
    std::uint64_t moves = 0, steps = 0;
    for (Index c = 0; c < nc; ++c) {
      SusPoint cur = samples[order[static_cast<std::size_t>(c)]];
      const Index length = base + (c < extra ? 1 : 0);
      next.push_back(cur);
      for (Index k = 1; k < length; ++k) {
        CwmhOutcome o = cwmh_step(cur, b, cfg.proposal, cfg.proposal_scale, problem, rng);
        ++steps;
        if (!o.called) ++res.skipped_calls;
        if (o.moved) ++moves;
        cur = std::move(o.point);
        next.push_back(cur);
      }
    }
    res.acceptance.push_back(steps ? static_cast<double>(moves) / static_cast<double>(steps) : 0.0);
    samples = std::move(next);
  }
  res.model_calls = problem.calls() - calls_before;
  return res;
}

}  // namespace astpa
