#include "astpa/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace astpa;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

ExperimentConfig small_config() {
  return parse(R"(
[experiment]
benchmark = parabolic
methods = sus_uniform, hmcmc, qnp_hmcmc
repetitions = 3
base_seed = 11

[hmcmc]
burn_in = 100
call_budget = 1500

[sus_uniform]
n_s = 500
)");
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string line; std::getline(f, line);) ++n;
  return n;
}

}  // namespace

TEST(Aggregate, TwoValues) {
  const std::vector<double> pf{1e-5, 3e-5}, calls{100.0, 300.0};
  const Aggregate a = aggregate(pf, calls);
  EXPECT_DOUBLE_EQ(a.mean, 2e-5);
  ASSERT_TRUE(a.cov.has_value());
  EXPECT_NEAR(*a.cov, 0.7071067811865476, 1e-12);
  EXPECT_DOUBLE_EQ(a.mean_calls, 200.0);
  EXPECT_FALSE(a.single);
}

TEST(Aggregate, AllZeroHasUndefinedCov) {
  const std::vector<double> pf{0.0, 0.0, 0.0}, calls{1.0, 1.0, 1.0};
  const Aggregate a = aggregate(pf, calls);
  EXPECT_EQ(a.mean, 0.0);
  EXPECT_FALSE(a.cov.has_value());
}

TEST(Aggregate, SingleRun) {
  const std::vector<double> pf{4e-3}, calls{10.0};
  const Aggregate a = aggregate(pf, calls);
  EXPECT_TRUE(a.single);
  ASSERT_TRUE(a.cov.has_value());
  EXPECT_EQ(*a.cov, 0.0);
}

TEST(Aggregate, RejectsBadInput) {
  EXPECT_THROW(aggregate(std::vector<double>{}, std::vector<double>{}), ConfigError);
  EXPECT_THROW(aggregate(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), DimensionError);
}

TEST(Methods, ParseListTrimsAndDeduplicates) {
  const auto m = parse_method_list(" hmcmc, qnp_hmcmc ,hmcmc,,sus_normal");
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0], Method::hmcmc);
  EXPECT_EQ(m[1], Method::qnp_hmcmc);
  EXPECT_EQ(m[2], Method::sus_normal);
  EXPECT_THROW(parse_method_list("hmcmc,nuts"), ConfigError);
  for (Method x : all_methods()) EXPECT_EQ(parse_method(method_name(x)), x);
}

TEST(Config, SectionsInheritFromBaseMethod) {
  const ExperimentConfig c = parse(R"(
[experiment]
benchmark = sdof_wn_r18
methods = hmcmc,qnp_hmcmc,sus_normal
repetitions = 7
threads = 2

[hmcmc]
sigma = 0.2
tau = 0.9
burn_in = 1000
call_budget = 11000

[qnp_hmcmc]
covariance = low_rank
rank = 2
k_max = 1
estimator = pooled

[sus_uniform]
n_s = 2000
)");
  EXPECT_EQ(c.benchmark, "sdof_wn_r18");
  EXPECT_EQ(c.repetitions, 7);
  EXPECT_EQ(c.threads, 2);
  EXPECT_DOUBLE_EQ(c.qnp_hmcmc.sigma, 0.2);
  EXPECT_EQ(c.qnp_hmcmc.call_budget, 11000u);
  EXPECT_EQ(c.qnp_hmcmc.covariance, CovarianceType::low_rank);
  EXPECT_EQ(c.qnp_hmcmc.rank, 2);
  EXPECT_EQ(c.qnp_hmcmc.estimator, PfMethod::pooled);
  EXPECT_FALSE(c.hmcmc.covariance.has_value());
  EXPECT_EQ(c.hmcmc.estimator, PfMethod::stratified);
  EXPECT_EQ(c.sus_normal.n_s, 2000);
}

TEST(Config, DefaultsAndErrors) {
  const ExperimentConfig c = parse("[experiment]\nbenchmark = four_branch\n");
  EXPECT_EQ(c.methods.size(), 4u);
  EXPECT_EQ(c.repetitions, 100);
  EXPECT_DOUBLE_EQ(c.hmcmc.sigma, 0.7);
  EXPECT_THROW(parse("[experiment]\nmethods = hmcmc\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nbenchmark = nope\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nbenchmark = parabolic\nrepetitions = 0\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nbenchmark = parabolic\n[hmcmc]\nsigma = 1.5\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nbenchmark = parabolic\n[hmcmc]\nburn_in = 500\ncall_budget = 2000\n"),
               ConfigError);
  EXPECT_THROW(parse("[experiment]\nbenchmark = parabolic\n[hmcmc]\ncovariance = banded\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nbenchmark = parabolic\n[hmcmc]\ntau = abc\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nbenchmark = parabolic\n[sus_uniform]\np0 = 0.0\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST(SummaryCsv, RoundTripsExactly) {
  AggregateReport rep;
  rep.benchmark = "four_branch";
  rep.exact_pf = 2.2e-3;
  rep.methods.push_back({Method::hmcmc, 99, 1, 2.0712345678901234e-3, 0.1612345678901234, 5700.25});
  rep.methods.push_back({Method::sus_uniform, 100, 0, 0.0, std::nullopt, 2664.0});
  std::stringstream ss;
  write_summary_csv(ss, rep);
  EXPECT_EQ(parse_summary_csv(ss), rep);
}

TEST(SummaryCsv, EmptyMethodListIsHeaderOnly) {
  AggregateReport rep;
  rep.benchmark = "parabolic";
  rep.exact_pf = 3.95e-5;
  std::stringstream ss;
  write_summary_csv(ss, rep);
  EXPECT_EQ(ss.str(), std::string(kSummaryCsvHeader) + "\n");
  std::ostringstream table;
  write_summary_table(table, rep);
  EXPECT_NE(table.str().find("Number of model calls"), std::string::npos);
}

TEST(SummaryTable, UndefinedCovIsLabelled) {
  AggregateReport rep;
  rep.benchmark = "parabolic";
  rep.exact_pf = 3.95e-5;
  rep.methods.push_back({Method::hmcmc, 3, 0, 0.0, std::nullopt, 4400.0});
  std::ostringstream os;
  write_summary_table(os, rep);
  EXPECT_NE(os.str().find("undefined"), std::string::npos);
}

TEST(Experiment, DeterministicAcrossThreadCounts) {
  ExperimentConfig c = small_config();
  const ExperimentResult a = run_experiment(c);
  c.threads = 3;
  const ExperimentResult b = run_experiment(c);
  ASSERT_EQ(a.runs.size(), 9u);
  ASSERT_EQ(a.runs.size(), b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_TRUE(a.runs[i].ok) << a.runs[i].error;
    EXPECT_EQ(a.runs[i].pf, b.runs[i].pf) << i;
    EXPECT_EQ(a.runs[i].model_calls, b.runs[i].model_calls) << i;
    EXPECT_EQ(a.runs[i].seed, run_seed(11, a.runs[i].rep));
  }
  EXPECT_EQ(a.report, b.report);
  EXPECT_FALSE(a.report.any_failed());
  for (const RunRecord& r : a.runs)  // the budget is checked between trajectories of at most max_steps calls
    if (r.method != Method::sus_uniform) {
      EXPECT_GE(r.model_calls, 1500u);
      EXPECT_LE(r.model_calls, 1500u + 100u);
    }
}

TEST(Experiment, FailedRunsAreCountedNotAggregated) {
  ExperimentConfig c = parse(R"(
[experiment]
benchmark = parabolic
methods = sus_uniform
repetitions = 2

[sus_uniform]
n_s = 200
max_levels = 1
)");
  const ExperimentResult r = run_experiment(c);
  ASSERT_EQ(r.report.methods.size(), 1u);
  EXPECT_EQ(r.report.methods[0].n_failed, 2u);
  EXPECT_EQ(r.report.methods[0].n_ok, 0u);
  EXPECT_TRUE(r.report.any_failed());
  EXPECT_FALSE(r.runs[0].error.empty());
}

TEST(Experiment, SingleRepetition) {
  ExperimentConfig c = small_config();
  c.repetitions = 1;
  c.methods = {Method::sus_uniform};
  const ExperimentResult r = run_experiment(c);
  ASSERT_EQ(r.report.methods.size(), 1u);
  ASSERT_TRUE(r.report.methods[0].cov.has_value());
  EXPECT_EQ(*r.report.methods[0].cov, 0.0);
}

TEST(Outputs, WritesAllFiles) {
  ExperimentConfig c = small_config();
  c.methods = {Method::sus_uniform, Method::hmcmc};
  c.repetitions = 2;
  ExperimentResult r = run_experiment(c);
  r.runs[0].ok = false;
  r.runs[0].error = "bad, value\nsecond line";
  const auto dir = std::filesystem::temp_directory_path() / "astpa_test_outputs";
  std::filesystem::remove_all(dir);
  write_outputs(dir, r);
  for (const char* f : {"summary.txt", "summary.csv", "runs.csv", "plotdata.csv", "runs.jsonl"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_EQ(count_lines(dir / "runs.csv"), 5u);
  EXPECT_EQ(count_lines(dir / "plotdata.csv"), 4u);
  EXPECT_EQ(count_lines(dir / "runs.jsonl"), 4u);
  std::ifstream runs(dir / "runs.csv");
  std::string header, first;
  std::getline(runs, header);
  std::getline(runs, first);
  EXPECT_NE(first.find("bad; value second line"), std::string::npos);
  std::ifstream summary(dir / "summary.csv");
  const AggregateReport back = parse_summary_csv(summary);
  EXPECT_EQ(back, r.report);
  std::filesystem::remove_all(dir);
}
