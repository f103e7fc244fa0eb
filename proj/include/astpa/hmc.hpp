#pragma once

#include "astpa/core.hpp"
#include "astpa/target_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

namespace astpa {

/// Anything the integrators can move on: evaluate(theta) costs one model call
/// and returns a state with log_target and grad filled in.
template <class T>
concept SamplingTarget = requires(T& t, const Vector& x) {
  { t.evaluate(x) } -> std::convertible_to<ChainState>;
};

/// Wraps a plain (log density, gradient) callable as a sampling target with
/// its own call counter. Used for reference targets in tests and tools.
class GradientTarget {
 public:
  using Function = std::function<std::pair<double, Vector>(const Vector&)>;

  explicit GradientTarget(Function fn) : fn_(std::move(fn)) {}

  ChainState evaluate(const Vector& theta) {
    ++calls_;
    auto [lp, grad] = fn_(theta);
    if (!std::isfinite(lp) || !grad.allFinite())
      throw EvaluationError("GradientTarget: non-finite log density or gradient", theta);
    ChainState st;
    st.theta = theta;
    st.log_target = lp;
    st.grad = std::move(grad);
    return st;
  }

  std::uint64_t calls() const noexcept { return calls_; }

 private:
  Function fn_;
  std::uint64_t calls_ = 0;
};

// ---------------------------------------------------------------------------
// Mass matrix
// ---------------------------------------------------------------------------

/// Momentum covariance M. Stores M, its lower Cholesky factor and M^{-1};
/// the identity case is kept implicit so its arithmetic is exact.
class MassMatrix {
 public:
  enum class Kind { identity, dense };

  static MassMatrix identity(Index d) {
    MassMatrix m;
    m.kind_ = Kind::identity;
    m.dim_ = d;
    return m;
  }

  static MassMatrix dense(const Matrix& mass) {
    check_square_symmetric(mass, "MassMatrix::dense");
    Eigen::LLT<Matrix> llt(mass);
    if (llt.info() != Eigen::Success) throw SpecError("MassMatrix::dense: matrix is not positive definite");
    MassMatrix m;
    m.kind_ = Kind::dense;
    m.dim_ = mass.rows();
    m.mass_ = mass;
    m.factor_ = llt.matrixL();
    m.inverse_ = llt.solve(Matrix::Identity(m.dim_, m.dim_));
    m.inverse_ = 0.5 * (m.inverse_ + m.inverse_.transpose()).eval();
    return m;
  }

  /// M = inv^{-1}; used when a preconditioner approximates M^{-1} directly.
  static MassMatrix from_inverse(const Matrix& inv) {
    check_square_symmetric(inv, "MassMatrix::from_inverse");
    Eigen::LLT<Matrix> llt(inv);
    if (llt.info() != Eigen::Success)
      throw SpecError("MassMatrix::from_inverse: matrix is not positive definite");
    Matrix mass = llt.solve(Matrix::Identity(inv.rows(), inv.cols()));
    mass = 0.5 * (mass + mass.transpose()).eval();
    Eigen::LLT<Matrix> llt_mass(mass);
    if (llt_mass.info() != Eigen::Success)
      throw SpecError("MassMatrix::from_inverse: inverse is not numerically positive definite");
    MassMatrix m;
    m.kind_ = Kind::dense;
    m.dim_ = inv.rows();
    m.mass_ = std::move(mass);
    m.factor_ = llt_mass.matrixL();
    m.inverse_ = inv;
    return m;
  }

  Kind kind() const noexcept { return kind_; }
  bool is_identity() const noexcept { return kind_ == Kind::identity; }
  Index dim() const noexcept { return dim_; }

  Matrix matrix() const { return is_identity() ? Matrix::Identity(dim_, dim_) : mass_; }
  Matrix factor() const { return is_identity() ? Matrix::Identity(dim_, dim_) : factor_; }
  Matrix inverse() const { return is_identity() ? Matrix::Identity(dim_, dim_) : inverse_; }

  /// z ~ N(0, M).
  Vector sample_momentum(Random& rng) const {
    Vector xi = rng.gaussian_vector(dim_);
    if (is_identity()) return xi;
    return factor_.triangularView<Eigen::Lower>() * xi;
  }

  /// M^{-1} z.
  Vector velocity(const Vector& z) const {
    if (is_identity()) return z;
    return inverse_ * z;
  }

  /// z' M^{-1} z / 2.
  double kinetic(const Vector& z) const {
    if (is_identity()) return 0.5 * z.squaredNorm();
    return 0.5 * z.dot(inverse_ * z);
  }

 private:
  static void check_square_symmetric(const Matrix& a, const char* who) {
    if (a.rows() != a.cols() || a.rows() < 1) throw DimensionError(std::string(who) + ": matrix must be square");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw SpecError(std::string(who) + ": matrix is not symmetric");
  }

  Kind kind_ = Kind::identity;
  Index dim_ = 0;
  Matrix mass_;
  Matrix factor_;
  Matrix inverse_;
};

// ---------------------------------------------------------------------------
// Dual averaging
// ---------------------------------------------------------------------------

/// Step-size adaptation toward a target acceptance probability
/// (Hoffman & Gelman, 2014, Algorithm 5).
struct DualAveragingState {
  double log_eps = 0.0;
  double log_eps_avg = 0.0;
  double h_avg = 0.0;
  double mu = 0.0;
  std::int64_t iteration = 0;
  double target_accept = 0.65;
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  bool frozen = false;

  static DualAveragingState start(double eps0, double target_accept = 0.65) {
    if (!(eps0 > 0.0) || !std::isfinite(eps0)) throw TuningError("dual averaging: eps0 must be positive");
    DualAveragingState s;
    s.log_eps = std::log(eps0);
    s.mu = std::log(10.0 * eps0);
    s.target_accept = target_accept;
    return s;
  }

  /// Step size to use for the next transition.
  double step_size() const { return std::exp(frozen ? log_eps_avg : log_eps); }

  /// Ends adaptation; the averaged iterate is used from then on.
  void freeze() {
    if (iteration == 0) log_eps_avg = log_eps;
    frozen = true;
  }
};

inline DualAveragingState dual_averaging_update(DualAveragingState da, double accept_prob) {
  if (da.frozen) return da;
  accept_prob = std::clamp(accept_prob, 0.0, 1.0);
  da.iteration += 1;
  const double m = static_cast<double>(da.iteration);
  const double w = 1.0 / (m + da.t0);
  da.h_avg = (1.0 - w) * da.h_avg + w * (da.target_accept - accept_prob);
  da.log_eps = da.mu - std::sqrt(m) / da.gamma * da.h_avg;
  const double eta = std::pow(m, -da.kappa);
  da.log_eps_avg = eta * da.log_eps + (1.0 - eta) * da.log_eps_avg;
  return da;
}

// ---------------------------------------------------------------------------
// Trajectory length
// ---------------------------------------------------------------------------

struct TrajectoryPolicy {
  double tau = 0.7;
  double jitter_lo = 0.9;
  double jitter_hi = 1.1;
  int max_steps = 1000000;

  /// L = max(1, round(tau_t / eps)) with tau_t ~ U[jitter_lo*tau, jitter_hi*tau],
  /// capped at max_steps.
  int steps(double eps, Random& rng) const {
    const double t = tau * rng.uniform(jitter_lo, jitter_hi);
    const double l = std::round(t / eps);
    if (!(l >= 1.0)) return 1;
    return static_cast<int>(std::min(l, static_cast<double>(max_steps)));
  }
};

// ---------------------------------------------------------------------------
// Leapfrog and the Metropolis step
// ---------------------------------------------------------------------------

/// Energy error beyond which a trajectory counts as divergent.
inline constexpr double kDivergenceThreshold = 1000.0;

struct LeapfrogResult {
  ChainState state;
  Vector momentum;
  int steps = 0;  // gradient evaluations actually performed
  bool diverged = false;
};

/// L steps of half-kick / drift / half-kick. The gradient at the start is
/// taken from the cached state, so a trajectory costs exactly L model calls
/// (fewer if it diverges early).
template <SamplingTarget T>
LeapfrogResult leapfrog(const ChainState& start, Vector z, double eps, int steps, const MassMatrix& mass,
                        T& target) {
  if (!(eps > 0.0)) throw TuningError("leapfrog: step size must be positive");
  if (steps < 1) throw TuningError("leapfrog: need at least one step");
  LeapfrogResult out{start, std::move(z), 0, false};
  for (int i = 0; i < steps; ++i) {
    out.momentum += (0.5 * eps) * out.state.grad;
    Vector theta = out.state.theta + eps * mass.velocity(out.momentum);
    if (!theta.allFinite()) {
      out.diverged = true;
      return out;
    }
    try {
      out.state = target.evaluate(theta);
    } catch (const EvaluationError&) {
      out.steps += 1;
      out.diverged = true;
      return out;
    }
    out.steps += 1;
    out.momentum += (0.5 * eps) * out.state.grad;
    if (!out.momentum.allFinite() || !std::isfinite(out.state.log_target)) {
      out.diverged = true;
      return out;
    }
  }
  return out;
}

struct StepResult {
  ChainState state;
  bool accepted = false;
  double accept_prob = 0.0;
  int steps = 0;
  bool diverged = false;
  double energy_error = 0.0;
};

/// Metropolis acceptance probability for an energy change dH = H(end) - H(start).
inline double acceptance_probability(double energy_error, bool diverged) {
  if (diverged || !std::isfinite(energy_error) || std::abs(energy_error) > kDivergenceThreshold) return 0.0;
  return energy_error <= 0.0 ? 1.0 : std::exp(-energy_error);
}

namespace detail {

/// Accept/reject shared by all HMC variants. Always consumes one uniform so
/// the random stream does not depend on the outcome.
inline StepResult metropolis(const ChainState& current, double h_start, LeapfrogResult&& traj, double h_end,
                             Random& rng) {
  StepResult r;
  r.steps = traj.steps;
  r.diverged = traj.diverged;
  r.energy_error = traj.diverged ? std::numeric_limits<double>::infinity() : h_end - h_start;
  if (std::abs(r.energy_error) > kDivergenceThreshold) r.diverged = true;
  r.accept_prob = acceptance_probability(r.energy_error, r.diverged);
  const double u = rng.uniform();
  if (u < r.accept_prob) {
    r.accepted = true;
    r.state = std::move(traj.state);
  } else {
    r.state = current;
  }
  return r;
}

}  // namespace detail

/// One HMC transition with a pre-drawn momentum and step count.
template <SamplingTarget T>
StepResult hmc_transition(const ChainState& state, const Vector& z0, int steps, const MassMatrix& mass, double eps,
                          T& target, Random& rng) {
  const double h0 = -state.log_target + mass.kinetic(z0);
  LeapfrogResult traj = leapfrog(state, z0, eps, steps, mass, target);
  // Momentum negation at the end of the trajectory leaves the kinetic energy
  // unchanged and the momentum is refreshed next step, so it is not applied.
  const double h1 = traj.diverged ? std::numeric_limits<double>::infinity()
                                  : -traj.state.log_target + mass.kinetic(traj.momentum);
  return detail::metropolis(state, h0, std::move(traj), h1, rng);
}

/// z0 ~ N(0, M), jittered trajectory length, leapfrog, Metropolis correction.
template <SamplingTarget T>
StepResult hmc_step(const ChainState& state, const MassMatrix& mass, double eps, const TrajectoryPolicy& policy,
                    T& target, Random& rng) {
  Vector z0 = mass.sample_momentum(rng);
  const int steps = policy.steps(eps, rng);
  return hmc_transition(state, z0, steps, mass, eps, target, rng);
}

/// Doubles or halves eps from 1 until the one-step acceptance probability
/// crosses 1/2 (Hoffman & Gelman, 2014, Algorithm 4).
template <SamplingTarget T>
double find_reasonable_epsilon(const ChainState& state, const MassMatrix& mass, T& target, Random& rng,
                               int max_rounds = 50) {
  const Vector z = mass.sample_momentum(rng);
  const double h0 = -state.log_target + mass.kinetic(z);
  auto one_step_prob = [&](double eps) {
    LeapfrogResult r = leapfrog(state, z, eps, 1, mass, target);
    if (r.diverged) return 0.0;
    const double dh = -r.state.log_target + mass.kinetic(r.momentum) - h0;
    if (!std::isfinite(dh)) return 0.0;
    return std::min(1.0, std::exp(-dh));
  };

  double eps = 1.0;
  double p = one_step_prob(eps);
  const double dir = p > 0.5 ? 1.0 : -1.0;
  int rounds = 0;
  // p^dir > 2^-dir, written without the power so p = 0 behaves.
  auto keep_going = [&](double prob) { return dir > 0 ? prob > 0.5 : prob < 0.5; };
  while (keep_going(p)) {
    if (++rounds > max_rounds)
      throw TuningError("find_reasonable_epsilon: no step size found after " + std::to_string(max_rounds) +
                        " doublings/halvings");
    eps *= dir > 0 ? 2.0 : 0.5;
    p = one_step_prob(eps);
  }
  return eps;
}

// ---------------------------------------------------------------------------
// Sample batches
// ---------------------------------------------------------------------------

enum class Phase : std::uint8_t { burn_in, stationary };

struct Draw {
  Vector theta;
  double g = std::numeric_limits<double>::quiet_NaN();
  double logh = 0.0;
  bool accepted = false;
  double accept_prob = 0.0;
  int steps = 0;
  Phase phase = Phase::stationary;
};

struct SampleBatch {
  Index dim = 0;
  std::vector<Draw> draws;
  std::uint64_t model_calls = 0;   // total calls on the problem, including g_c and tuning
  std::uint64_t tuning_calls = 0;  // calls spent by find_reasonable_epsilon
  double step_size = 0.0;          // frozen stationary step size
  double tau = 0.0;                // nominal trajectory length after any adaptation
  int divergences = 0;

  std::size_t stationary_count() const {
    return static_cast<std::size_t>(
        std::count_if(draws.begin(), draws.end(), [](const Draw& d) { return d.phase == Phase::stationary; }));
  }

  /// Stationary-phase theta values as rows.
  Matrix stationary_thetas() const {
    Matrix x(static_cast<Index>(stationary_count()), dim);
    Index r = 0;
    for (const auto& d : draws)
      if (d.phase == Phase::stationary) x.row(r++) = d.theta.transpose();
    return x;
  }

  std::vector<const Draw*> stationary() const {
    std::vector<const Draw*> out;
    for (const auto& d : draws)
      if (d.phase == Phase::stationary) out.push_back(&d);
    return out;
  }

  double acceptance_rate(Phase phase) const {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& d : draws)
      if (d.phase == phase) {
        acc += d.accepted ? 1.0 : 0.0;
        ++n;
      }
    return n ? acc / static_cast<double>(n) : 0.0;
  }

  double mean_accept_prob(Phase phase) const {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& d : draws)
      if (d.phase == phase) {
        acc += d.accept_prob;
        ++n;
      }
    return n ? acc / static_cast<double>(n) : 0.0;
  }

  /// CSV with columns iter, phase, theta_1..theta_d, g, logh, accepted.
  void write_csv(std::ostream& os) const {
    const auto old_precision = os.precision(17);
    os << "iter,phase";
    for (Index j = 0; j < dim; ++j) os << ",theta_" << (j + 1);
    os << ",g,logh,accepted\n";
    for (std::size_t i = 0; i < draws.size(); ++i) {
      const Draw& d = draws[i];
      os << i << ',' << (d.phase == Phase::burn_in ? "burn_in" : "stationary");
      for (Index j = 0; j < dim; ++j) os << ',' << d.theta[j];
      os << ',' << d.g << ',' << d.logh << ',' << (d.accepted ? 1 : 0) << '\n';
    }
    os.precision(old_precision);
  }
};

/// Normalized expected squared jumping distance tau^{-1/2} E|theta_{t+1} - theta_t|^2.
inline double esjd(std::span<const Vector> chain, double tau) {
  if (chain.size() < 2) throw Error("esjd: need at least two samples");
  if (!(tau > 0.0)) throw Error("esjd: tau must be positive");
  double acc = 0.0;
  for (std::size_t i = 1; i < chain.size(); ++i) acc += (chain[i] - chain[i - 1]).squaredNorm();
  return acc / static_cast<double>(chain.size() - 1) / std::sqrt(tau);
}

/// ESJD over the stationary draws of a batch.
inline double esjd(const SampleBatch& batch, double tau) {
  std::vector<Vector> chain;
  for (const auto& d : batch.draws)
    if (d.phase == Phase::stationary) chain.push_back(d.theta);
  return esjd(chain, tau);
}

// ---------------------------------------------------------------------------
// Chain driver
// ---------------------------------------------------------------------------

struct ChainConfig {
  Index burn_in = 200;
  Index n_iter = 1000;     // maximum stationary iterations
  double tau = 0.7;
  std::uint64_t seed = 0;
  bool adapt_tau = false;
  std::uint64_t call_budget = 0;  // stop the stationary phase once this many calls were made; 0 = off
  double target_accept = 0.65;
  int max_steps = 100;            // leapfrog steps per trajectory; guards against a collapsed step size
  std::optional<Vector> theta0;   // defaults to the origin
};

namespace detail {

inline void validate(const ChainConfig& cfg) {
  if (cfg.burn_in < 1) throw ConfigError("chain config: burn_in must be >= 1");
  if (cfg.n_iter < 1) throw ConfigError("chain config: n_iter must be >= 1");
  if (!(cfg.tau > 0.0)) throw ConfigError("chain config: tau must be positive");
  if (cfg.max_steps < 1) throw ConfigError("chain config: max_steps must be >= 1");
  if (!(cfg.target_accept > 0.0 && cfg.target_accept < 1.0))
    throw ConfigError("chain config: target_accept must be in (0, 1)");
}

inline Draw make_draw(const ChainState& st, const StepResult& r, Phase phase) {
  Draw d;
  d.theta = st.theta;
  d.g = st.g_val;
  d.logh = st.log_target;
  d.accepted = r.accepted;
  d.accept_prob = r.accept_prob;
  d.steps = r.steps;
  d.phase = phase;
  return d;
}

/// Coarse trajectory-length choice among {tau/2, tau, 2 tau}: candidates are
/// cycled over the second quarter of the burn-in, the best normalized ESJD
/// wins at its midpoint.
class TauSelector {
 public:
  TauSelector(double tau, Index burn_in) : candidates_{0.5 * tau, tau, 2.0 * tau}, start_(burn_in / 4), stop_(burn_in / 2) {}

  bool trialing(Index m) const { return stop_ > start_ && m >= start_ && m < stop_; }
  bool decide_now(Index m) const { return stop_ > start_ && m == stop_; }
  double candidate(Index m) const { return candidates_[static_cast<std::size_t>((m - start_) % 3)]; }

  void record(Index m, double sq_jump) {
    const auto k = static_cast<std::size_t>((m - start_) % 3);
    sum_[k] += sq_jump;
    count_[k] += 1;
  }

  double best(double fallback) const {
    double best_val = -1.0;
    double best_tau = fallback;
    for (std::size_t k = 0; k < 3; ++k) {
      if (count_[k] == 0) continue;
      const double v = sum_[k] / count_[k] / std::sqrt(candidates_[k]);
      if (v > best_val) {
        best_val = v;
        best_tau = candidates_[k];
      }
    }
    return best_tau;
  }

 private:
  std::array<double, 3> candidates_;
  std::array<double, 3> sum_{0.0, 0.0, 0.0};
  std::array<double, 3> count_{0.0, 0.0, 0.0};
  Index start_;
  Index stop_;
};

}  // namespace detail

/// Standard HMCMC on the ASTPA target. Burn-in anneals sigma (re-read at
/// every trajectory start) and adapts eps by dual averaging; the stationary
/// phase runs with both frozen until n_iter draws or the call budget.
inline SampleBatch run_chain(TargetModel& target, const ChainConfig& cfg) {
  detail::validate(cfg);
  target.set_burn_in_len(cfg.burn_in);
  Random rng(cfg.seed);
  const Index d = target.dim();
  const MassMatrix mass = MassMatrix::identity(d);
  TrajectoryPolicy policy{cfg.tau};
  policy.max_steps = cfg.max_steps;

  SampleBatch batch;
  batch.dim = d;
  batch.draws.reserve(static_cast<std::size_t>(cfg.burn_in + std::min<Index>(cfg.n_iter, 100000)));

  target.set_sigma(sigma_schedule(0, target));
  ChainState state = target.evaluate(cfg.theta0.value_or(Vector::Zero(d)));

  const std::uint64_t before_tuning = target.calls();
  DualAveragingState da =
      DualAveragingState::start(find_reasonable_epsilon(state, mass, target, rng), cfg.target_accept);
  batch.tuning_calls = target.calls() - before_tuning;

  detail::TauSelector tau_sel(cfg.tau, cfg.burn_in);
  for (Index m = 0; m < cfg.burn_in; ++m) {
    target.set_sigma(sigma_schedule(m, target));
    target.rescore(state);
    if (cfg.adapt_tau && tau_sel.decide_now(m)) policy.tau = tau_sel.best(policy.tau);
    TrajectoryPolicy step_policy = policy;
    if (cfg.adapt_tau && tau_sel.trialing(m)) step_policy.tau = tau_sel.candidate(m);

    const Vector prev = state.theta;
    StepResult r = hmc_step(state, mass, da.step_size(), step_policy, target, rng);
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

  for (Index i = 0; i < cfg.n_iter; ++i) {
    if (cfg.call_budget > 0 && target.calls() >= cfg.call_budget) break;
    StepResult r = hmc_step(state, mass, batch.step_size, policy, target, rng);
    state = std::move(r.state);
    batch.divergences += r.diverged ? 1 : 0;
    batch.draws.push_back(detail::make_draw(state, r, Phase::stationary));
  }
  batch.model_calls = target.calls();
  return batch;
}

}  // namespace astpa
