#include "astpa/benchmarks.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace astpa;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector sine_excitation(Index n) {
  Vector t(n);
  for (Index j = 0; j < n; ++j) t[j] = std::sin(0.7 * static_cast<double>(j));
  return t;
}

/// Classical RK4 with `sub` substeps per interval; the force is held over each interval.
Vector reference_response(const bench::SdofSystem& sys, const Vector& theta, int sub) {
  const Index n = sys.steps();
  const double h = sys.dt / sub;
  const double w2 = sys.omega * sys.omega;
  const double c = 2.0 * sys.xi * sys.omega;
  Vector y(n);
  double u = 0.0, v = 0.0;
  y[0] = 0.0;
  for (Index j = 1; j < n; ++j) {
    const double f = sys.excitation_scale() * theta[j - 1];
    const auto acc = [&](double uu, double vv) { return f - w2 * uu - c * vv; };
    for (int s = 0; s < sub; ++s) {
      const double k1u = v, k1v = acc(u, v);
      const double k2u = v + 0.5 * h * k1v, k2v = acc(u + 0.5 * h * k1u, v + 0.5 * h * k1v);
      const double k3u = v + 0.5 * h * k2v, k3v = acc(u + 0.5 * h * k2u, v + 0.5 * h * k2v);
      const double k4u = v + h * k3v, k4v = acc(u + h * k3u, v + h * k3v);
      u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
      v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    y[j] = u;
  }
  return y;
}

}  // namespace

TEST(Parabolic, KnownValues) {
  EXPECT_DOUBLE_EQ(bench::parabolic_g(vec({0.0, 0.0})).g, 6.0 - 0.3 * 0.01);
  EXPECT_NEAR(bench::parabolic_g(vec({0.1, 6.0})).g, 0.0, 1e-15);
  EXPECT_NEAR(bench::parabolic_g(vec({4.1, 1.2})).g, 6.0 - 1.2 - 0.3 * 16.0, 1e-14);
  EXPECT_THROW(bench::parabolic_g(vec({0.0})), DimensionError);
}

TEST(FourBranch, KnownValues) {
  EXPECT_NEAR(bench::four_branch_g(vec({1.0, -0.5})).g, 2.8714466094067266, 1e-14);
  EXPECT_NEAR(bench::four_branch_g(vec({2.0, 2.0})).g, 0.17157287525381015, 1e-14);
  EXPECT_EQ(bench::four_branch_active(vec({2.0, 2.0})), 0);
  EXPECT_EQ(bench::four_branch_active(vec({-2.0, -2.0})), 1);
  EXPECT_EQ(bench::four_branch_active(vec({-3.0, 3.0})), 2);
  EXPECT_EQ(bench::four_branch_active(vec({3.0, -3.0})), 3);
}

TEST(FourBranch, TieResolvesToFirstBranch) {
  // At the origin branches 1 and 2 both equal 3.
  EXPECT_EQ(bench::four_branch_active(Vector::Zero(2)), 0);
  EXPECT_DOUBLE_EQ(bench::four_branch_g(Vector::Zero(2)).g, 3.0);
}

TEST(ImpulseOscillator, KnownValues) {
  EXPECT_NEAR(bench::oscillator_impulse_g(Vector::Zero(6), 0.6).g, 0.9537844912219312, 1e-13);
  EXPECT_NEAR(bench::oscillator_impulse_g(Vector::Zero(6), 0.45).g, 1.0903383684164485, 1e-13);
  EXPECT_NEAR(bench::oscillator_impulse_g(vec({0.3, -0.2, 0.5, 1.0, -0.7, 0.4}), 0.6).g, 1.1553108938895518, 1e-13);
}

TEST(ImpulseOscillator, NonPhysicalMassIsEvaluationError) {
  Vector t = Vector::Zero(6);
  t[2] = -25.0;  // M = 1 + 0.05 * (-25) < 0
  EXPECT_THROW(bench::oscillator_impulse_g(t, 0.6), EvaluationError);
}

TEST(WhiteNoiseSdof, Discretization) {
  const bench::SdofSystem sys;
  EXPECT_EQ(sys.steps(), 101);
  EXPECT_NEAR(sys.excitation_scale(), std::sqrt(2.0 * std::numbers::pi / 0.05), 1e-12);
  EXPECT_EQ(bench::make_benchmark("sdof_wn_r18").dim(), 101);
}

TEST(WhiteNoiseSdof, KnownResponse) {
  const bench::SdofSystem sys;
  const Vector y = sys.response(sine_excitation(101));
  Index j_max = 0;
  for (Index j = 1; j < y.size(); ++j)
    if (y[j] > y[j_max]) j_max = j;
  EXPECT_EQ(j_max, 52);
  EXPECT_NEAR(y[j_max], 0.1756068889447014, 1e-12);
  EXPECT_NEAR(y[10], -0.10754287025864553, 1e-12);
  EXPECT_EQ(y[0], 0.0);
}

TEST(WhiteNoiseSdof, MatchesFineStepIntegrator) {
  const bench::SdofSystem sys;
  Random rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    const Vector theta = rng.gaussian_vector(sys.steps());
    const Vector y = sys.response(theta);
    const Vector ref = reference_response(sys, theta, 100);
    EXPECT_LT((y - ref).norm() / ref.norm(), 1e-6) << trial;
  }
}

TEST(WhiteNoiseSdof, ResponseIsLinear) {
  const bench::SdofSystem sys;
  Random rng(5);
  const Vector a = rng.gaussian_vector(101), b = rng.gaussian_vector(101);
  const Vector lhs = sys.response(2.5 * a - 0.7 * b);
  const Vector rhs = 2.5 * sys.response(a) - 0.7 * sys.response(b);
  EXPECT_LT((lhs - rhs).norm(), 1e-12 * (1.0 + rhs.norm()));
  for (Index j : {Index{1}, Index{37}, Index{100}}) EXPECT_NEAR(sys.influence_row(j).dot(a), sys.response(a)[j], 1e-12);
}

TEST(WhiteNoiseSdof, LimitStateUsesPeakResponse) {
  const bench::SdofSystem sys;
  const Vector t = sine_excitation(101);
  const LimitStateValue v = bench::sdof_whitenoise_g(sys, t, 1.8);
  EXPECT_NEAR(v.g, 1.8 - 0.1756068889447014, 1e-12);
  EXPECT_LT((v.grad + sys.influence_row(52)).norm(), 1e-15);
}

TEST(Benchmarks, GradientsMatchFiniteDifferences) {
  Random rng(12);
  for (const std::string& name : bench::benchmark_names()) {
    LimitStateProblem p = bench::make_benchmark(name);
    int checked = 0;
    for (int i = 0; i < 50; ++i) {
      const Vector t = rng.gaussian_vector(p.dim());
      if (name == "four_branch") {
        auto vals = bench::four_branch_values(t);
        std::sort(vals.begin(), vals.end());
        if (vals[1] - vals[0] < 1e-3) continue;
      }
      if (name.starts_with("sdof_wn")) {  // skip near-ties of the peak instant
        Vector y = bench::SdofSystem().response(t);
        std::sort(y.begin(), y.end());
        if (y[y.size() - 1] - y[y.size() - 2] < 1e-4) continue;
      }
      const LimitStateValue v = p.evaluate(t);
      const Vector fd = testutil::central_difference([&](const Vector& x) { return p.evaluate(x).g; }, t);
      EXPECT_LT(testutil::relative_error(v.grad, fd), 1e-5) << name << " point " << i;
      ++checked;
    }
    EXPECT_GT(checked, 25) << name;
  }
}

TEST(Benchmarks, RegistryAndReferences) {
  EXPECT_EQ(bench::benchmark_names().size(), 6u);
  for (const std::string& name : bench::benchmark_names()) {
    EXPECT_GT(bench::exact_pf(name), 0.0);
    EXPECT_EQ(bench::make_benchmark(name).name(), name);
  }
  EXPECT_DOUBLE_EQ(bench::exact_pf("parabolic"), 3.95e-5);
  EXPECT_THROW(bench::exact_pf("nope"), ConfigError);
  EXPECT_THROW(bench::make_benchmark("nope"), ConfigError);
}

TEST(McOracle, HalfSpace) {
  LimitStateProblem p{"half", 3, [](const Vector& t) { return LimitStateValue{-t[0], Vector::Zero(3)}; }};
  Random rng(1);
  const bench::McResult r = bench::mc_oracle(p, 100000, rng);
  EXPECT_NEAR(r.pf_hat, 0.5, 0.005);
  ASSERT_TRUE(r.cov_hat.has_value());
  EXPECT_NEAR(*r.cov_hat, std::sqrt(0.5 / (100000 * 0.5)), 1e-4);
  EXPECT_EQ(p.calls(), 100000u);
}

TEST(McOracle, SmallSampleAndNoFailures) {
  LimitStateProblem p = bench::make_parabolic();
  Random rng(2);
  const bench::McResult r = bench::mc_oracle(p, 10, rng);
  EXPECT_EQ(r.failures, 0u);
  EXPECT_EQ(r.pf_hat, 0.0);
  EXPECT_FALSE(r.cov_hat.has_value());
  EXPECT_THROW(bench::mc_oracle(p, 0, rng), ConfigError);
}

TEST(McOracle, FourBranchAtModerateSize) {
  LimitStateProblem p = bench::make_four_branch();
  Random rng(3);
  const bench::McResult r = bench::mc_oracle(p, 1000000, rng);
  EXPECT_LT(std::abs(r.pf_hat / bench::exact_pf("four_branch") - 1.0), 0.08);
}
