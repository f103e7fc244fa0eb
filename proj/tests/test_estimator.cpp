#include "astpa/benchmarks.hpp"
#include "astpa/estimator.hpp"
#include "astpa/hmc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace astpa;

namespace {

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

LimitStateProblem linear_problem(double beta) {
  return {"linear", 1, [beta](const Vector& t) {
            LimitStateValue v;
            v.g = beta - t[0];
            v.grad = Vector::Constant(1, -1.0);
            return v;
          }};
}

}  // namespace

TEST(EstimateZ, OneDimensionalGaussian) {
  // h(theta) = 3 exp(-(theta - 1)^2 / 2), Z = 3 sqrt(2 pi); Q = N(1, 0.6).
  Random rng(1);
  const int n = 100000;
  std::vector<double> lt(n);
  Vector x(n);
  for (int i = 0; i < n; ++i) {
    x[i] = 1.0 + rng.gaussian();
    lt[static_cast<std::size_t>(i)] = std::log(3.0) - 0.5 * (x[i] - 1.0) * (x[i] - 1.0);
  }
  const GmmModel q({1.0}, {Vector::Ones(1)}, {Matrix::Constant(1, 1, 0.6)}, false);
  const Vector lq = q.log_density_rows(x);
  const double z = estimate_z(lt, as_span(lq));
  const double exact = 3.0 * std::sqrt(2.0 * std::numbers::pi);
  EXPECT_LT(std::abs(z / exact - 1.0), 0.02);
}

TEST(EstimateZ, TwoDimensionalCorrelatedGaussian) {
  Matrix cov(2, 2);
  cov << 1.0, 0.6, 0.6, 0.8;
  const Matrix chol = cov.llt().matrixL();
  const Matrix prec = cov.inverse();
  Vector mu(2);
  mu << -0.5, 2.0;
  Random rng(2);
  const int n = 100000;
  Matrix x(n, 2);
  std::vector<double> lt(n);
  for (int i = 0; i < n; ++i) {
    const Vector t = mu + chol * rng.gaussian_vector(2);
    x.row(i) = t.transpose();
    lt[static_cast<std::size_t>(i)] = -0.5 * (t - mu).dot(prec * (t - mu));
  }
  const GmmModel q({1.0}, {mu}, {Matrix(0.7 * cov)}, false);
  const Vector lq = q.log_density_rows(x);
  const double exact = 2.0 * std::numbers::pi * std::sqrt(cov.determinant());
  EXPECT_LT(std::abs(estimate_z(lt, as_span(lq)) / exact - 1.0), 0.02);
}

TEST(EstimateZ, ExactDensityGivesExactNormalizer) {
  Random rng(3);
  const double log_z = 1.7;
  const GmmModel q({1.0}, {Vector::Zero(1)}, {Matrix::Identity(1, 1)}, false);
  Vector x(50);
  for (Index i = 0; i < x.size(); ++i) x[i] = rng.gaussian();
  const Vector lq = q.log_density_rows(x);
  std::vector<double> lt;
  for (Index i = 0; i < x.size(); ++i) lt.push_back(lq[i] + log_z);
  EXPECT_NEAR(estimate_log_z(lt, as_span(lq)), log_z, 1e-12);
}

TEST(EstimateZ, ClampsUnderflowingQ) {
  const std::vector<double> lt{0.0, 0.0};
  const std::vector<double> lq{-2000.0, 0.0};
  std::size_t clamped = 0;
  set_warnings_enabled(false);
  estimate_log_z(lt, lq, &clamped);
  set_warnings_enabled(true);
  EXPECT_EQ(clamped, 1u);
  const std::vector<double> all_bad{-2000.0, -3000.0};
  EXPECT_THROW(estimate_log_z(lt, all_bad), EstimatorError);
  EXPECT_THROW(estimate_log_z(std::vector<double>{}, std::vector<double>{}), EstimatorError);
  EXPECT_THROW(estimate_log_z(lt, std::vector<double>{0.0}), DimensionError);
}

TEST(EstimatePf, ConstantOffsetCancels) {
  Random rng(4);
  std::vector<double> lt, ll, lq;
  std::vector<std::uint8_t> failed;
  for (int i = 0; i < 200; ++i) {
    const double g = rng.gaussian();
    ll.push_back(-g * g / 0.98);
    lt.push_back(ll.back() - 0.5 * rng.uniform());
    lq.push_back(-rng.uniform());
    failed.push_back(g <= 0.0);
  }
  const PfEstimate a = estimate_pf_from_logs(lt, ll, failed, lq, 0.0);
  for (double& v : lt) v += 12.5;
  for (double& v : ll) v += 12.5;
  const PfEstimate b = estimate_pf_from_logs(lt, ll, failed, lq, 0.0);
  EXPECT_NEAR(b.pf / a.pf, 1.0, 1e-12);
}

TEST(EstimatePf, NoFailureSamplesIsLowConfidence) {
  const std::vector<double> lt{-1.0, -2.0}, ll{-0.5, -0.7}, lq{-1.0, -1.5};
  const std::vector<std::uint8_t> failed{0, 0};
  const PfEstimate e = estimate_pf_from_logs(lt, ll, failed, lq, 0.0);
  EXPECT_TRUE(e.low_confidence);
  EXPECT_EQ(e.pf, 0.0);
  EXPECT_GT(e.z_hat, 0.0);
}

TEST(EstimatePf, StratifiedEqualsPooledForOneComponent) {
  Random rng(5);
  const GmmModel q({1.0}, {Vector::Zero(2)}, {Matrix(1.3 * Matrix::Identity(2, 2))}, false);
  Matrix x(300, 2);
  std::vector<double> lt, ll;
  std::vector<std::uint8_t> failed;
  for (Index i = 0; i < x.rows(); ++i) {
    x.row(i) = rng.gaussian_vector(2).transpose();
    const double g = 1.0 - x(i, 0);
    ll.push_back(-g * g / 0.5);
    lt.push_back(ll.back() - 0.5 * x.row(i).squaredNorm());
    failed.push_back(g <= 0.0);
  }
  const Vector lq = q.log_density_rows(x);
  const PfEstimate pooled = estimate_pf_from_logs(lt, ll, failed, as_span(lq), -kLog2Pi);
  const Matrix comp = q.weighted_component_log_densities(x);
  const std::vector<double> lw{0.0}, overlap{0.0};
  const PfEstimate strat = estimate_pf_stratified_from_logs(lt, ll, failed, comp, lw, overlap, -kLog2Pi);
  EXPECT_NEAR(strat.pf / pooled.pf, 1.0, 1e-12);
  EXPECT_NEAR(strat.log_z_hat, pooled.log_z_hat, 1e-12);
}

TEST(EstimatePf, StratifiedIgnoresModeImbalance) {
  // h = N(-5, 1) + N(5, 1) (Z = 2 sqrt(2 pi)), but the draws sit 80/20 in the
  // two modes and Q copies that imbalance.
  Random rng(6);
  const int n = 20000;
  Vector x(n);
  std::vector<double> lt, ll;
  std::vector<std::uint8_t> failed;
  for (int i = 0; i < n; ++i) {
    x[i] = (i < 0.8 * n ? -5.0 : 5.0) + rng.gaussian();
    const double a = -0.5 * (x[i] + 5.0) * (x[i] + 5.0), b = -0.5 * (x[i] - 5.0) * (x[i] - 5.0);
    lt.push_back(std::max(a, b) + std::log1p(std::exp(std::min(a, b) - std::max(a, b))));
    ll.push_back(0.0);
    failed.push_back(x[i] > 0.0);
  }
  const GmmModel q({0.8, 0.2}, {Vector::Constant(1, -5.0), Vector::Constant(1, 5.0)},
                   {Matrix::Identity(1, 1), Matrix::Identity(1, 1)}, false);
  const Matrix comp = q.weighted_component_log_densities(x);
  const std::vector<double> lw{std::log(0.8), std::log(0.2)};
  const std::vector<double> overlap = log_component_overlaps(q, 20000, 1);
  const PfEstimate s = estimate_pf_stratified_from_logs(lt, ll, failed, comp, lw, overlap, 0.0);
  const double z = 2.0 * std::sqrt(2.0 * std::numbers::pi);
  EXPECT_LT(std::abs(s.z_hat / z - 1.0), 0.02);
  EXPECT_LT(std::abs(s.pf / (0.5 * z) - 1.0), 0.02);
  const Vector lq = q.log_density_rows(x);
  const PfEstimate p = estimate_pf_from_logs(lt, ll, failed, as_span(lq), 0.0);
  EXPECT_GT(std::abs(p.z_hat / z - 1.0), 0.2);  // the pooled form inherits the imbalance
}

TEST(LogComponentOverlaps, SeparatedComponentsAreNearOne) {
  const GmmModel q({0.5, 0.5}, {Vector::Constant(1, -20.0), Vector::Constant(1, 20.0)},
                   {Matrix::Identity(1, 1), Matrix::Identity(1, 1)}, false);
  for (double v : log_component_overlaps(q, 1000, 2)) EXPECT_NEAR(v, 0.0, 1e-12);
  const GmmModel same({0.5, 0.5}, {Vector::Zero(1), Vector::Zero(1)},
                      {Matrix::Identity(1, 1), Matrix::Identity(1, 1)}, false);
  for (double v : log_component_overlaps(same, 1000, 2)) EXPECT_NEAR(v, std::log(0.5), 1e-12);
}

TEST(PostProcess, LinearLimitStatePipeline) {
  TargetModel target = TargetModel::create(linear_problem(3.0), 0.5, 500);
  ChainConfig cfg;
  cfg.burn_in = 500;
  cfg.n_iter = 40000;
  cfg.seed = 17;
  const SampleBatch batch = run_chain(target, cfg);
  const std::uint64_t calls = target.calls();
  const AstpaEstimate e = post_process(batch, target);
  EXPECT_EQ(target.calls(), calls);
  const double exact = standard_normal_cdf(-3.0);
  EXPECT_LT(std::abs(e.estimate.pf / exact - 1.0), 0.10) << e.estimate.pf;
  EXPECT_LT(std::abs(e.pooled.pf / exact - 1.0), 0.10) << e.pooled.pf;
}

TEST(PostProcess, ConsumesNoModelCallsOnEveryBenchmarkShape) {
  for (const char* name : {"parabolic", "sdof_impulse_06"}) {
    TargetModel target = TargetModel::create(bench::make_benchmark(name), 0.7, 100);
    ChainConfig cfg;
    cfg.burn_in = 100;
    cfg.n_iter = 1500;
    cfg.seed = 3;
    const SampleBatch batch = run_chain(target, cfg);
    const std::uint64_t calls = target.calls();
    PostProcessOptions opt;
    opt.method = PfMethod::pooled;
    const AstpaEstimate e = post_process(batch, target, opt);
    EXPECT_EQ(target.calls(), calls) << name;
    EXPECT_EQ(e.estimate.pf, e.pooled.pf);
  }
}
