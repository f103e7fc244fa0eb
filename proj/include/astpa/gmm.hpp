#pragma once

#include "astpa/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace astpa {

namespace detail {
/// Row-wise log-sum-exp; on return m holds exp(m - lse) (row-normalized).
inline Vector row_log_sum_exp(Matrix& m) {
  Vector hi = m.rowwise().maxCoeff();
  for (Index i = 0; i < hi.size(); ++i)
    if (!std::isfinite(hi[i])) hi[i] = 0.0;
  m.colwise() -= hi;
  // clamp at e^-700 so no responsibility is subnormal; subnormals slow every later product
  m.array() = m.array().max(-700.0).exp();
  const Vector s = m.rowwise().sum();
  const Vector inv = s.cwiseInverse();
  for (Index k = 0; k < m.cols(); ++k) m.col(k).array() *= inv.array();
  return hi.array() + s.array().log();
}
}  // namespace detail

/// Covariance family of the mixture components. low_rank components equal the
/// identity outside an r-dimensional subspace.
enum class CovarianceType { full, diagonal, low_rank };

struct CovarianceStructure {
  CovarianceType type = CovarianceType::full;
  int rank = 1;  // low_rank only

  bool diagonal() const noexcept { return type == CovarianceType::diagonal; }

  /// Free parameters of one d-dimensional covariance.
  double parameter_count(double d) const {
    switch (type) {
      case CovarianceType::diagonal:
        return d;
      case CovarianceType::low_rank: {
        const double r = std::min(static_cast<double>(rank), d);
        return r * d - r * (r - 1.0) / 2.0 + r;
      }
      case CovarianceType::full:
        break;
    }
    return d * (d + 1.0) / 2.0;
  }
};

/// Gaussian mixture density Q. Covariances are either dense d x d or, for
/// diagonal models, stored as d x 1 variance columns.
class GmmModel {
 public:
  GmmModel() = default;

  GmmModel(std::vector<double> weights, std::vector<Vector> means, std::vector<Matrix> covariances, bool diagonal)
      : GmmModel(std::move(weights), std::move(means), std::move(covariances),
                 CovarianceStructure{diagonal ? CovarianceType::diagonal : CovarianceType::full}) {}

  GmmModel(std::vector<double> weights, std::vector<Vector> means, std::vector<Matrix> covariances,
           CovarianceStructure structure)
      : weights_(std::move(weights)),
        means_(std::move(means)),
        covs_(std::move(covariances)),
        diagonal_(structure.diagonal()),
        structure_(structure) {
    prepare();
  }

  Index components() const noexcept { return static_cast<Index>(weights_.size()); }
  Index dim() const noexcept { return means_.empty() ? 0 : means_.front().size(); }
  bool diagonal() const noexcept { return diagonal_; }
  const CovarianceStructure& structure() const noexcept { return structure_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<Vector>& means() const noexcept { return means_; }
  const std::vector<Matrix>& covariances() const noexcept { return covs_; }

  /// Full covariance of component k (expands diagonal storage).
  Matrix covariance(Index k) const {
    const Matrix& c = covs_[static_cast<std::size_t>(k)];
    return diagonal_ ? Matrix(c.col(0).asDiagonal()) : c;
  }

  /// Number of free parameters (for BIC).
  double parameter_count() const {
    const double k = static_cast<double>(components());
    const double d = static_cast<double>(dim());
    return (k - 1.0) + k * d + k * structure_.parameter_count(d);
  }

  /// N x K matrix of log(pi_k) + log N(x_i | mu_k, Sigma_k) for the rows of x.
  Matrix weighted_component_log_densities(const Matrix& x) const {
    Matrix out, centered, whitened;
    weighted_component_log_densities(x, out, centered, whitened);
    return out;
  }

  /// Same, writing into caller-owned buffers (resized as needed).
  void weighted_component_log_densities(const Matrix& x, Matrix& out, Matrix& centered, Matrix& whitened) const {
    out.resize(x.rows(), components());
    for (Index k = 0; k < components(); ++k) {
      const auto ku = static_cast<std::size_t>(k);
      centered = x.rowwise() - means_[ku].transpose();
      if (diagonal_) {
        centered.array().rowwise() *= inv_factor_[ku].col(0).transpose().array();
        out.col(k) = centered.rowwise().squaredNorm();
      } else {
        if (dim() <= 8)
          whitened.noalias() = centered.lazyProduct(inv_factor_[ku]);
        else
          whitened.noalias() = centered * inv_factor_[ku];
        out.col(k) = whitened.rowwise().squaredNorm();
      }
      out.col(k) = ((std::log(weights_[ku]) + log_norm_[ku]) - 0.5 * out.col(k).array()).matrix();
    }
  }

  /// log Q at every row of x.
  Vector log_density_rows(const Matrix& x) const {
    Matrix comp = weighted_component_log_densities(x);
    return detail::row_log_sum_exp(comp);
  }

  double log_density(const Vector& x) const { return log_density_rows(x.transpose())[0]; }

  /// tr(Sigma_k^{-1}).
  double precision_trace(Index k) const { return inv_factor_[static_cast<std::size_t>(k)].squaredNorm(); }

  /// One draw from component k.
  Vector sample_component(Index k, Random& rng) const {
    const auto ku = static_cast<std::size_t>(k);
    const Vector z = rng.gaussian_vector(dim());
    if (diagonal_) return means_[ku] + (covs_[ku].col(0).array().sqrt() * z.array()).matrix();
    return means_[ku] + chol_[ku] * z;
  }

 private:
  void prepare() {
    const auto k = weights_.size();
    if (k == 0 || means_.size() != k || covs_.size() != k) throw EstimatorError("GmmModel: inconsistent components");
    double wsum = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0) || !std::isfinite(w)) throw EstimatorError("GmmModel: weights must be positive");
      wsum += w;
    }
    for (double& w : weights_) w /= wsum;
    const Index d = means_.front().size();
    chol_.assign(k, Matrix());
    inv_factor_.assign(k, Matrix());
    log_norm_.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      if (means_[c].size() != d) throw EstimatorError("GmmModel: mean dimension mismatch");
      double log_det = 0.0;
      if (diagonal_) {
        if (covs_[c].rows() != d || covs_[c].cols() != 1) throw EstimatorError("GmmModel: bad diagonal covariance");
        if ((covs_[c].array() <= 0.0).any() || !covs_[c].allFinite())
          throw EstimatorError("GmmModel: variances must be positive");
        log_det = covs_[c].array().log().sum();
        inv_factor_[c] = covs_[c].array().rsqrt().matrix();
      } else {
        Eigen::LLT<Matrix> llt(covs_[c]);
        if (llt.info() != Eigen::Success) throw EstimatorError("GmmModel: covariance is not positive definite");
        chol_[c] = llt.matrixL();
        // (x - mu)^T Sigma^{-1} (x - mu) = |(x - mu)^T L^{-T}|^2
        inv_factor_[c] = chol_[c].triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d)).transpose();
        log_det = 2.0 * chol_[c].diagonal().array().log().sum();
      }
      log_norm_[c] = -0.5 * (static_cast<double>(d) * kLog2Pi + log_det);
    }
  }

  std::vector<double> weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covs_;
  bool diagonal_ = false;
  CovarianceStructure structure_;
  std::vector<Matrix> chol_;
  std::vector<Matrix> inv_factor_;  // L^{-T} (dense) or 1/sqrt(var) column (diagonal)
  std::vector<double> log_norm_;
};

struct GmmOptions {
  int k_max = 0;            // 0: min(10, N / (20 d_eff))
  int max_iter = 200;
  double tol = 1e-8;        // on the per-sample penalized log-likelihood
  int restarts = 3;
  double ridge = 1e-6;      // relative to the mean sample variance
  std::optional<CovarianceType> covariance;  // default: diagonal iff d > 20, else full
  int rank = 1;                               // subspace dimension for low_rank
  int bic_patience = 2;     // stop increasing K after this many non-improving K; 0 = full sweep
  std::uint64_t seed = 0x5eed;
};

struct EmRun {
  GmmModel model;
  std::vector<double> trace;     // per-iteration penalized log-likelihood / N
  double log_likelihood = -std::numeric_limits<double>::infinity();  // unpenalized total
  bool converged = false;
};

struct GmmFit {
  GmmModel model;
  int k = 0;
  double bic = std::numeric_limits<double>::infinity();
  std::vector<double> bic_by_k;  // +inf for K that could not be fitted
  std::vector<double> trace;     // EM trace of the selected model
  bool converged = false;
  double ridge_used = 0.0;
};

namespace detail {

inline std::vector<Index> kmeans_pp_centers(const Matrix& x, int k, Random& rng) {
  const Index n = x.rows();
  std::vector<Index> centers;
  centers.push_back(static_cast<Index>(rng.uniform() * static_cast<double>(n)) % n);
  Vector d2 = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2[pick];
        if (u <= 0.0) break;
      }
    } else {
      pick = static_cast<Index>(rng.uniform() * static_cast<double>(n)) % n;
    }
    centers.push_back(pick);
    d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }
  return centers;
}

struct EmWorkspace {
  Matrix resp;
  Matrix centered;
  Matrix whitened;
};

/// Constrained MLE of I + V (Lambda - I) V^T from a scatter matrix S: keeps
/// the r eigen-directions of S with the largest lambda - 1 - log(lambda).
inline Matrix low_rank_covariance(const Matrix& s, int rank) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) return Matrix();
  const Index d = s.rows();
  const Vector ev = es.eigenvalues().cwiseMax(1e-12);
  std::vector<Index> order(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
  const auto gain = [&](Index i) { return ev[i] - 1.0 - std::log(ev[i]); };
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return gain(a) > gain(b); });
  Matrix cov = Matrix::Identity(d, d);
  for (Index j = 0; j < std::min<Index>(rank, d); ++j) {
    const Index i = order[static_cast<std::size_t>(j)];
    const Vector v = es.eigenvectors().col(i);
    cov.noalias() += (ev[i] - 1.0) * v * v.transpose();
  }
  return cov;
}

/// MAP M-step with penalty -lambda/2 * tr(Sigma_k^{-1}) per component, i.e.
/// Sigma_k = (scatter_k + lambda I) / N_k within the covariance family.
/// Returns nullopt if a component carries less than one point of
/// responsibility.
inline std::optional<GmmModel> m_step(const Matrix& x, const Matrix& resp, double lambda,
                                      const CovarianceStructure& structure, Matrix& centered) {
  const bool diagonal = structure.diagonal();
  const Index n = x.rows();
  const Index k = resp.cols();
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (Index c = 0; c < k; ++c) {
    const double nk = resp.col(c).sum();
    if (!(nk >= 1.0)) return std::nullopt;
    Vector mu = (x.transpose() * resp.col(c)) / nk;
    centered = x.rowwise() - mu.transpose();
    if (diagonal) {
      Vector var = (centered.array().square().colwise() * resp.col(c).array()).colwise().sum().transpose().matrix();
      var = (var.array() + lambda) / nk;
      covs.emplace_back(var);
    } else {
      const Matrix weighted = centered.array().colwise() * resp.col(c).array();
      Matrix cov = x.cols() <= 8 ? Matrix(centered.transpose().lazyProduct(weighted)) : Matrix(centered.transpose() * weighted);
      cov = 0.5 * (cov + cov.transpose()).eval();
      cov.diagonal().array() += lambda;
      cov /= nk;
      if (structure.type == CovarianceType::low_rank) {
        cov = low_rank_covariance(cov, structure.rank);
        if (cov.size() == 0) return std::nullopt;
      }
      covs.emplace_back(std::move(cov));
    }
    weights.push_back(nk / static_cast<double>(n));
    means.push_back(std::move(mu));
  }
  try {
    return GmmModel(std::move(weights), std::move(means), std::move(covs), structure);
  } catch (const EstimatorError&) {
    return std::nullopt;
  }
}

inline std::optional<GmmModel> m_step(const Matrix& x, const Matrix& resp, double lambda,
                                      const CovarianceStructure& structure) {
  Matrix centered;
  return m_step(x, resp, lambda, structure, centered);
}

inline double penalty(const GmmModel& m, double lambda) {
  double tr = 0.0;
  for (Index c = 0; c < m.components(); ++c) tr += m.precision_trace(c);
  return -0.5 * lambda * tr;
}

/// E-step: responsibilities (in ws.resp) and the total log-likelihood.
inline double e_step(const GmmModel& m, const Matrix& x, EmWorkspace& ws) {
  m.weighted_component_log_densities(x, ws.resp, ws.centered, ws.whitened);
  return row_log_sum_exp(ws.resp).sum();
}

inline double e_step(const GmmModel& m, const Matrix& x, Matrix& resp) {
  EmWorkspace ws;
  const double ll = e_step(m, x, ws);
  resp = std::move(ws.resp);
  return ll;
}

inline std::optional<EmRun> em_once(const Matrix& x, int k, double lambda, const CovarianceStructure& structure,
                                    const GmmOptions& opt, Random& rng) {
  const Index n = x.rows();
  const std::vector<Index> centers = kmeans_pp_centers(x, k, rng);
  EmWorkspace ws;
  ws.resp = Matrix::Zero(n, k);
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < k; ++c) {
      const double dd = (x.row(i) - x.row(centers[static_cast<std::size_t>(c)])).squaredNorm();
      if (dd < best_d) {
        best_d = dd;
        best = c;
      }
    }
    ws.resp(i, best) = 1.0;
  }
  std::optional<GmmModel> model = m_step(x, ws.resp, lambda, structure, ws.centered);
  if (!model) return std::nullopt;

  EmRun run;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < opt.max_iter; ++it) {
    const double ll = e_step(*model, x, ws);
    if (!std::isfinite(ll)) return std::nullopt;
    const double obj = (ll + penalty(*model, lambda)) * inv_n;
    run.trace.push_back(obj);
    run.log_likelihood = ll;
    if (run.trace.size() >= 2 && obj - run.trace[run.trace.size() - 2] < opt.tol) {
      run.converged = true;
      break;
    }
    if (it + 1 == opt.max_iter) break;
    std::optional<GmmModel> next = m_step(x, ws.resp, lambda, structure, ws.centered);
    if (!next) return std::nullopt;
    model = std::move(next);
  }
  run.model = std::move(*model);
  return run;
}

}  // namespace detail

inline int default_k_max(Index n, Index d, const CovarianceStructure& structure) {
  const Index d_eff = structure.type == CovarianceType::full ? d
                      : structure.type == CovarianceType::low_rank ? std::min<Index>(structure.rank + 1, d)
                                                                   : 1;
  const Index k = n / (20 * d_eff);
  return static_cast<int>(std::clamp<Index>(k, 1, 10));
}

/// EM fit for a fixed component count: best of `restarts` k-means++ starts by
/// final penalized log-likelihood. nullopt when every start degenerates.
inline std::optional<EmRun> fit_gmm_fixed_k(const Matrix& x, int k, double lambda,
                                            const CovarianceStructure& structure, const GmmOptions& opt,
                                            Random& rng) {
  std::optional<EmRun> best;
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    std::optional<EmRun> run = detail::em_once(x, k, lambda, structure, opt, rng);
    if (run && (!best || run->trace.back() > best->trace.back())) best = std::move(run);
  }
  return best;
}

/// Fits mixtures with K = 1..k_max and keeps the one with the lowest BIC.
/// The covariance ridge (ridge * mean sample variance) enters as a MAP
/// penalty, so the reported EM trace is monotone.
inline GmmFit fit_gmm(const Matrix& x, const GmmOptions& opt = {}) {
  const Index n = x.rows();
  const Index d = x.cols();
  if (d < 1) throw EstimatorError("fit_gmm: empty dimension");
  if (n < 10 * d)
    throw EstimatorError("fit_gmm: need at least 10*d = " + std::to_string(10 * d) + " samples, got " +
                         std::to_string(n));
  if (!x.allFinite()) throw EstimatorError("fit_gmm: non-finite samples");
  const Vector mean = x.colwise().mean();
  const double mean_var = (x.rowwise() - mean.transpose()).squaredNorm() / static_cast<double>(n * d);
  if (!(mean_var > 0.0)) throw EstimatorError("fit_gmm: samples have zero spread");

  if (opt.rank < 1) throw EstimatorError("fit_gmm: rank must be positive");
  const CovarianceStructure structure{opt.covariance.value_or(d > 20 ? CovarianceType::diagonal : CovarianceType::full),
                                      opt.rank};
  const int k_max = opt.k_max > 0 ? opt.k_max : default_k_max(n, d, structure);
  Random rng(opt.seed);

  double ridge = opt.ridge * mean_var;
  for (int attempt = 0; attempt < 4; ++attempt, ridge *= 100.0) {
    GmmFit fit;
    fit.ridge_used = ridge;
    int since_best = 0;
    for (int k = 1; k <= k_max; ++k) {
      const double lambda = ridge * static_cast<double>(n) / static_cast<double>(k);
      std::optional<EmRun> run = fit_gmm_fixed_k(x, k, lambda, structure, opt, rng);
      if (!run) {
        fit.bic_by_k.push_back(std::numeric_limits<double>::infinity());
        continue;
      }
      const double bic = -2.0 * run->log_likelihood + run->model.parameter_count() * std::log(static_cast<double>(n));
      fit.bic_by_k.push_back(bic);
      if (bic < fit.bic) {
        fit.bic = bic;
        fit.k = k;
        fit.model = std::move(run->model);
        fit.trace = std::move(run->trace);
        fit.converged = run->converged;
        since_best = 0;
      } else if (opt.bic_patience > 0 && ++since_best >= opt.bic_patience) {
        break;
      }
    }
    if (fit.k > 0) return fit;
    warn("fit_gmm: EM failed for every K; retrying with a larger covariance ridge");
  }
  throw EstimatorError("fit_gmm: EM produced no finite fit");
}

inline const std::vector<double>& em_log_likelihood_trace(const GmmFit& fit) { return fit.trace; }

}  // namespace astpa
