#pragma once

#include "astpa/core.hpp"
#include "astpa/hmc.hpp"
#include "astpa/target_model.hpp"

#include <cstdint>
#include <utility>

namespace astpa {

/// Default curvature guard: pairs with y's <= tol * |s| |y| are skipped.
inline constexpr double kBfgsCurvatureTol = 1e-10;

/// BFGS update of an inverse-Hessian approximation,
///
///   W' = (I - rho s y^T) W (I - rho y s^T) + rho s s^T,   rho = 1 / (y^T s),
///
/// applied in place. Returns false and leaves W untouched when the pair fails
/// the curvature guard. W' is exactly symmetric whenever W is, and satisfies
/// the secant condition W' y = s.
inline bool bfgs_update(Matrix& w, const Vector& s, const Vector& y, double curvature_tol = kBfgsCurvatureTol) {
  if (s.size() != w.rows() || y.size() != w.rows()) throw DimensionError("bfgs_update: size mismatch");
  const double ys = y.dot(s);
  if (!std::isfinite(ys) || !(ys > curvature_tol * s.norm() * y.norm())) return false;
  const double rho = 1.0 / ys;
  const Vector wy = w * y;
  const double ywy = y.dot(wy);
  const Matrix swy = s * wy.transpose();
  w -= rho * (swy + swy.transpose());  // one symmetric correction keeps W exactly symmetric
  const Matrix ss = s * s.transpose();
  w += (rho * rho * ywy + rho) * ss;
  return true;
}

struct BfgsState {
  Matrix w;         // current inverse-Hessian approximation
  Matrix snapshot;  // copy taken at trajectory start, restored on rejection
  std::uint64_t updates = 0;
  std::uint64_t skips = 0;
  std::uint64_t rollbacks = 0;
  double curvature_tol = kBfgsCurvatureTol;

  static BfgsState identity(Index d) {
    BfgsState b;
    b.w = Matrix::Identity(d, d);
    b.snapshot = b.w;
    return b;
  }

  bool update(const Vector& s, const Vector& y) {
    const bool applied = bfgs_update(w, s, y, curvature_tol);
    (applied ? updates : skips) += 1;
    return applied;
  }

  void take_snapshot() { snapshot = w; }
  void rollback() {
    w = snapshot;
    ++rollbacks;
  }
};

namespace detail {
inline bool exactly_identity(const Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (m(i, j) != (i == j ? 1.0 : 0.0)) return false;
  return true;
}
}  // namespace detail

/// Burn-in dynamics d(theta)/dt = B z, dz/dt = B grad log h with B held fixed
/// over the trajectory. After every inner step the BFGS state (if given) is
/// updated with s = theta' - theta, y = grad U(theta') - grad U(theta), U = -log h.
template <SamplingTarget T>
LeapfrogResult leapfrog_burnin(const ChainState& start, Vector z, double eps, int steps, const Matrix& b, T& target,
                               BfgsState* bfgs = nullptr) {
  if (!(eps > 0.0)) throw TuningError("leapfrog_burnin: step size must be positive");
  if (steps < 1) throw TuningError("leapfrog_burnin: need at least one step");
  const bool plain = detail::exactly_identity(b);
  LeapfrogResult out{start, std::move(z), 0, false};
  for (int i = 0; i < steps; ++i) {
    if (plain)
      out.momentum += (0.5 * eps) * out.state.grad;
    else
      out.momentum += (0.5 * eps) * (b * out.state.grad);
    Vector theta = plain ? Vector(out.state.theta + eps * out.momentum)
                         : Vector(out.state.theta + eps * (b * out.momentum));
    if (!theta.allFinite()) {
      out.diverged = true;
      return out;
    }
    ChainState next;
    try {
      next = target.evaluate(theta);
    } catch (const EvaluationError&) {
      out.steps += 1;
      out.diverged = true;
      return out;
    }
    out.steps += 1;
    if (plain)
      out.momentum += (0.5 * eps) * next.grad;
    else
      out.momentum += (0.5 * eps) * (b * next.grad);
    if (!out.momentum.allFinite() || !std::isfinite(next.log_target)) {
      out.state = std::move(next);
      out.diverged = true;
      return out;
    }
    if (bfgs) bfgs->update(next.theta - out.state.theta, out.state.grad - next.grad);
    out.state = std::move(next);
  }
  return out;
}

struct QnpOptions {
  /// Keep W = I throughout (no BFGS updates); reproduces run_chain exactly.
  bool freeze_preconditioner = false;
  double curvature_tol = kBfgsCurvatureTol;
};

struct QnpResult {
  SampleBatch batch;
  MassMatrix mass;        // stationary-phase mass, W^{-1}
  Matrix w;               // final burn-in inverse-Hessian approximation
  Vector w_eigenvalues;   // ascending
  std::uint64_t bfgs_updates = 0;
  std::uint64_t bfgs_skips = 0;
  std::uint64_t rollbacks = 0;
  bool identity_fallback = false;
};

/// Quasi-Newton preconditioned HMCMC. Burn-in: z ~ N(0, I), preconditioned
/// dynamics with B = W snapshotted per trajectory, W tracked by BFGS and
/// rolled back on rejection, identity-metric Metropolis ratio. Stationary
/// phase: ordinary HMC with M = W^{-1}.
inline QnpResult qnp_run_chain(TargetModel& target, const ChainConfig& cfg, const QnpOptions& opt = {}) {
  detail::validate(cfg);
  target.set_burn_in_len(cfg.burn_in);
  Random rng(cfg.seed);
  const Index d = target.dim();
  const MassMatrix unit = MassMatrix::identity(d);
  TrajectoryPolicy policy{cfg.tau};
  policy.max_steps = cfg.max_steps;

  QnpResult res;
  SampleBatch& batch = res.batch;
  batch.dim = d;
  batch.draws.reserve(static_cast<std::size_t>(cfg.burn_in + std::min<Index>(cfg.n_iter, 100000)));

  BfgsState bfgs = BfgsState::identity(d);
  bfgs.curvature_tol = opt.curvature_tol;

  target.set_sigma(sigma_schedule(0, target));
  ChainState state = target.evaluate(cfg.theta0.value_or(Vector::Zero(d)));

  const std::uint64_t before_tuning = target.calls();
  DualAveragingState da =
      DualAveragingState::start(find_reasonable_epsilon(state, unit, target, rng), cfg.target_accept);
  batch.tuning_calls = target.calls() - before_tuning;

  detail::TauSelector tau_sel(cfg.tau, cfg.burn_in);
  for (Index m = 0; m < cfg.burn_in; ++m) {
    target.set_sigma(sigma_schedule(m, target));
    target.rescore(state);
    if (cfg.adapt_tau && tau_sel.decide_now(m)) policy.tau = tau_sel.best(policy.tau);
    TrajectoryPolicy step_policy = policy;
    if (cfg.adapt_tau && tau_sel.trialing(m)) step_policy.tau = tau_sel.candidate(m);

    const double eps = da.step_size();
    const Vector z0 = unit.sample_momentum(rng);
    const int steps = step_policy.steps(eps, rng);
    bfgs.take_snapshot();
    const double h0 = -state.log_target + unit.kinetic(z0);
    LeapfrogResult traj = leapfrog_burnin(state, z0, eps, steps, bfgs.snapshot, target,
                                          opt.freeze_preconditioner ? nullptr : &bfgs);
    const double h1 = traj.diverged ? std::numeric_limits<double>::infinity()
                                    : -traj.state.log_target + unit.kinetic(traj.momentum);
    const Vector prev = state.theta;
    StepResult r = detail::metropolis(state, h0, std::move(traj), h1, rng);
    if (!r.accepted && !opt.freeze_preconditioner) bfgs.rollback();
    state = std::move(r.state);
    if (cfg.adapt_tau && tau_sel.trialing(m)) tau_sel.record(m, (state.theta - prev).squaredNorm());
    da = dual_averaging_update(da, r.accept_prob);
    batch.divergences += r.diverged ? 1 : 0;
    batch.draws.push_back(detail::make_draw(state, r, Phase::burn_in));
  }

  da.freeze();
  target.set_sigma(target.sigma_final());
  target.rescore(state);
  batch.step_size = da.step_size();
  batch.tau = policy.tau;

  res.w = bfgs.w;
  res.bfgs_updates = bfgs.updates;
  res.bfgs_skips = bfgs.skips;
  res.rollbacks = bfgs.rollbacks;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(res.w, Eigen::EigenvaluesOnly);
  res.w_eigenvalues = eig.eigenvalues();
  if (detail::exactly_identity(res.w)) {
    res.mass = unit;
  } else {
    try {
      res.mass = MassMatrix::from_inverse(res.w);
    } catch (const SpecError& e) {
      warn(std::string("qnp_run_chain: final W unusable (") + e.what() + "); using identity mass");
      res.mass = unit;
      res.identity_fallback = true;
    }
  }

  for (Index i = 0; i < cfg.n_iter; ++i) {
    if (cfg.call_budget > 0 && target.calls() >= cfg.call_budget) break;
    StepResult r = hmc_step(state, res.mass, batch.step_size, policy, target, rng);
    state = std::move(r.state);
    batch.divergences += r.diverged ? 1 : 0;
    batch.draws.push_back(detail::make_draw(state, r, Phase::stationary));
  }
  batch.model_calls = target.calls();
  return res;
}

}  // namespace astpa
