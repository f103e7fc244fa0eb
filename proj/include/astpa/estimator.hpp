#pragma once

#include "astpa/core.hpp"
#include "astpa/gmm.hpp"
#include "astpa/hmc.hpp"
#include "astpa/target_model.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace astpa {

/// Lower clamp for log Q; exp(-745) is the smallest positive double.
inline constexpr double kLogDensityFloor = -745.0;

/// Inverse importance sampling estimate of log Z, Z = \int h. With samples
/// theta_i ~ h / Z and a normalized density Q,
///
///   1 / Z_hat = (1/N) sum_i Q(theta_i) / h(theta_i).
///
/// `clamped` receives how many log Q values were raised to the floor.
inline double estimate_log_z(std::span<const double> log_target, std::span<const double> log_q,
                             std::size_t* clamped = nullptr) {
  if (log_target.size() != log_q.size()) throw DimensionError("estimate_z: size mismatch");
  if (log_target.empty()) throw EstimatorError("estimate_z: no samples");
  std::vector<double> ratio(log_q.size());
  std::size_t n_clamped = 0;
  for (std::size_t i = 0; i < log_q.size(); ++i) {
    double lq = log_q[i];
    if (!(lq >= kLogDensityFloor)) {
      lq = kLogDensityFloor;
      ++n_clamped;
    }
    if (!std::isfinite(log_target[i])) throw EstimatorError("estimate_z: non-finite log target");
    ratio[i] = lq - log_target[i];
  }
  if (clamped) *clamped = n_clamped;
  if (n_clamped == log_q.size()) throw EstimatorError("estimate_z: Q underflows at every sample");
  if (n_clamped > 0) warn("estimate_z: " + std::to_string(n_clamped) + " log Q values clamped at the floor");
  return std::log(static_cast<double>(ratio.size())) - log_sum_exp(ratio);
}

inline double estimate_z(std::span<const double> log_target, std::span<const double> log_q) {
  return std::exp(estimate_log_z(log_target, log_q));
}

struct PfEstimate {
  double pf = 0.0;
  double z_hat = 0.0;      // prior-expected likelihood, so pf = z_hat * mean(I_F / l)
  double log_z_hat = 0.0;
  std::size_t n_used = 0;
  double failure_fraction = 0.0;
  bool low_confidence = false;  // no sample in the failure domain
  std::size_t clamped = 0;
  int components = 0;
};

/// Failure probability from per-sample logs:
///
///   P_F = Z_hat * (1/N) sum_i I_F(theta_i) / l(theta_i),
///
/// where Z_hat is the inverse-IS normalizer of h = l * prior. log_target and
/// log_likelihood may both omit constants as long as they omit the same
/// ones; log_prior_normalizer is the constant dropped from the prior.
inline PfEstimate estimate_pf_from_logs(std::span<const double> log_target, std::span<const double> log_likelihood,
                                        std::span<const std::uint8_t> failed, std::span<const double> log_q,
                                        double log_prior_normalizer) {
  const std::size_t n = log_target.size();
  if (log_likelihood.size() != n || failed.size() != n || log_q.size() != n)
    throw DimensionError("estimate_pf: size mismatch");
  PfEstimate est;
  est.n_used = n;
  est.log_z_hat = estimate_log_z(log_target, log_q, &est.clamped) + log_prior_normalizer;
  est.z_hat = std::exp(est.log_z_hat);

  std::vector<double> inv_lik;
  for (std::size_t i = 0; i < n; ++i)
    if (failed[i]) inv_lik.push_back(-log_likelihood[i]);
  est.failure_fraction = static_cast<double>(inv_lik.size()) / static_cast<double>(n);
  if (inv_lik.empty()) {
    est.low_confidence = true;
    est.pf = 0.0;
    return est;
  }
  est.pf = std::exp(est.log_z_hat + log_sum_exp(inv_lik) - std::log(static_cast<double>(n)));
  return est;
}

/// Raw Z_hat for the stationary draws of a batch (same constants as logh).
inline double estimate_z(const SampleBatch& batch, const GmmModel& q) {
  const Matrix x = batch.stationary_thetas();
  const Vector lq = q.log_density_rows(x);
  std::vector<double> lt;
  for (const Draw* d : batch.stationary()) lt.push_back(d->logh);
  return estimate_z(lt, std::span<const double>(lq.data(), static_cast<std::size_t>(lq.size())));
}

/// P_F from the stationary draws; uses only cached g and logh.
inline PfEstimate estimate_pf(const SampleBatch& batch, const TargetModel& model, const GmmModel& q) {
  const auto draws = batch.stationary();
  if (draws.empty()) throw EstimatorError("estimate_pf: no stationary samples");
  const Matrix x = batch.stationary_thetas();
  const Vector lq = q.log_density_rows(x);
  std::vector<double> lt, ll;
  std::vector<std::uint8_t> failed;
  for (const Draw* d : draws) {
    lt.push_back(d->logh);
    ll.push_back(model.log_likelihood(d->g));
    failed.push_back(d->g <= 0.0 ? 1 : 0);
  }
  PfEstimate est = estimate_pf_from_logs(lt, ll, failed,
                                         std::span<const double>(lq.data(), static_cast<std::size_t>(lq.size())),
                                         model.log_prior_normalizer());
  est.components = static_cast<int>(q.components());
  return est;
}

/// Soft-stratified variant of the same identity. With responsibilities
/// r_k = pi_k q_k / Q as a partition of unity, Z = sum_k Z_k, Z_k = \int r_k h,
/// and each Z_k comes from inverse IS over the r_k-weighted draws:
///
///   c_k / Z_k ~ sum_i r_ik q_k(theta_i) / h(theta_i) / sum_i r_ik,   c_k = E_{q_k}[r_k],
///
///   P_F = sum_k Z_k * sum_i r_ik I_F(theta_i) / l(theta_i) / sum_i r_ik.
///
/// How many draws a chain leaves in each mode cancels out of every term.
/// `component_logs` is N x K with log(pi_k q_k(theta_i)); `log_overlap` holds
/// log c_k.
inline PfEstimate estimate_pf_stratified_from_logs(std::span<const double> log_target,
                                                   std::span<const double> log_likelihood,
                                                   std::span<const std::uint8_t> failed, const Matrix& component_logs,
                                                   std::span<const double> log_component_weights,
                                                   std::span<const double> log_overlap, double log_prior_normalizer) {
  const std::size_t n = log_target.size();
  const auto k_count = static_cast<std::size_t>(component_logs.cols());
  if (log_likelihood.size() != n || failed.size() != n || static_cast<std::size_t>(component_logs.rows()) != n ||
      log_component_weights.size() != k_count || log_overlap.size() != k_count)
    throw DimensionError("estimate_pf_stratified: size mismatch");
  if (n == 0) throw EstimatorError("estimate_pf_stratified: no samples");

  Matrix log_resp = component_logs;
  detail::row_log_sum_exp(log_resp);  // log_resp now holds r_ik
  log_resp = log_resp.array().log().matrix();

  PfEstimate est;
  est.n_used = n;
  est.components = static_cast<int>(k_count);
  std::vector<double> log_z_parts, log_pf_parts;
  std::vector<double> a, b, c;
  std::size_t n_failed = 0;
  for (std::size_t i = 0; i < n; ++i) n_failed += failed[i] ? 1 : 0;
  for (std::size_t k = 0; k < k_count; ++k) {
    a.clear();
    b.clear();
    c.clear();
    const auto kk = static_cast<Index>(k);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Index>(i);
      const double lr = log_resp(ii, kk);
      if (!std::isfinite(log_target[i])) throw EstimatorError("estimate_pf_stratified: non-finite log target");
      a.push_back(lr);
      b.push_back(lr + component_logs(ii, kk) - log_component_weights[k] - log_target[i]);
      if (failed[i]) c.push_back(lr - log_likelihood[i]);
    }
    const double log_mass = log_sum_exp(a);
    const double log_ratio = log_sum_exp(b);
    if (!std::isfinite(log_mass) || !std::isfinite(log_ratio) || !std::isfinite(log_overlap[k])) continue;
    const double log_zk = log_overlap[k] + log_mass - log_ratio;
    log_z_parts.push_back(log_zk);
    if (!c.empty()) {
      const double lf = log_sum_exp(c);
      if (std::isfinite(lf)) log_pf_parts.push_back(log_zk + lf - log_mass);
    }
  }
  if (log_z_parts.empty()) throw EstimatorError("estimate_pf_stratified: no usable component");
  est.log_z_hat = log_sum_exp(log_z_parts) + log_prior_normalizer;
  est.z_hat = std::exp(est.log_z_hat);
  est.failure_fraction = static_cast<double>(n_failed) / static_cast<double>(n);
  if (log_pf_parts.empty()) {
    est.low_confidence = true;
    est.pf = 0.0;
    return est;
  }
  est.pf = std::exp(log_sum_exp(log_pf_parts) + log_prior_normalizer);
  return est;
}

/// log E_{q_k}[pi_k q_k / Q] for every component, by Monte Carlo on the
/// mixture itself (no model calls).
inline std::vector<double> log_component_overlaps(const GmmModel& q, int draws, std::uint64_t seed) {
  std::vector<double> out;
  Random rng(seed);
  Matrix s(draws, q.dim());
  for (Index k = 0; k < q.components(); ++k) {
    for (int i = 0; i < draws; ++i) s.row(i) = q.sample_component(k, rng).transpose();
    Matrix comp = q.weighted_component_log_densities(s);
    detail::row_log_sum_exp(comp);
    out.push_back(std::log(comp.col(k).mean()));
  }
  return out;
}

enum class PfMethod { pooled, stratified };

struct StratifiedOptions {
  int overlap_draws = 4000;
  std::uint64_t seed = 0x0fe11a9;
};

/// Stratified P_F from the stationary draws; uses only cached g and logh.
inline PfEstimate estimate_pf_stratified(const SampleBatch& batch, const TargetModel& model, const GmmModel& q,
                                         const StratifiedOptions& opt = {}) {
  const auto draws = batch.stationary();
  if (draws.empty()) throw EstimatorError("estimate_pf_stratified: no stationary samples");
  const Matrix comp = q.weighted_component_log_densities(batch.stationary_thetas());
  std::vector<double> lt, ll, lw;
  std::vector<std::uint8_t> failed;
  for (const Draw* d : draws) {
    lt.push_back(d->logh);
    ll.push_back(model.log_likelihood(d->g));
    failed.push_back(d->g <= 0.0 ? 1 : 0);
  }
  for (double w : q.weights()) lw.push_back(std::log(w));
  const std::vector<double> overlap = log_component_overlaps(q, opt.overlap_draws, opt.seed);
  return estimate_pf_stratified_from_logs(lt, ll, failed, comp, lw, overlap, model.log_prior_normalizer());
}

struct PostProcessOptions {
  GmmOptions gmm;
  PfMethod method = PfMethod::stratified;
  StratifiedOptions stratified;
};

struct AstpaEstimate {
  PfEstimate estimate;  // the one selected by PostProcessOptions::method
  PfEstimate pooled;
  PfEstimate stratified;
  GmmFit fit;
};

/// GMM fit on the stationary draws followed by both inverse-IS estimates. No
/// model calls.
inline AstpaEstimate post_process(const SampleBatch& batch, const TargetModel& model,
                                  const PostProcessOptions& opt = {}) {
  AstpaEstimate out;
  out.fit = fit_gmm(batch.stationary_thetas(), opt.gmm);
  out.pooled = estimate_pf(batch, model, out.fit.model);
  out.stratified = estimate_pf_stratified(batch, model, out.fit.model, opt.stratified);
  out.stratified.clamped = out.pooled.clamped;
  out.estimate = opt.method == PfMethod::pooled ? out.pooled : out.stratified;
  return out;
}

}  // namespace astpa
