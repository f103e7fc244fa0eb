#include "astpa/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

namespace {

int cmd_run(const std::string& config_path, std::optional<int> reps, const std::string& methods,
            std::optional<int> threads, const std::string& out_dir, bool quiet) {
  astpa::ExperimentConfig cfg = astpa::load_config(config_path);
  if (reps) cfg.repetitions = *reps;
  if (!methods.empty()) cfg.methods = astpa::parse_method_list(methods);
  if (threads) cfg.threads = *threads;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (quiet) astpa::set_warnings_enabled(false);

  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t total = cfg.methods.size() * static_cast<std::size_t>(cfg.repetitions);
  std::size_t done = 0;
  const astpa::ExperimentResult res = astpa::run_experiment(cfg, [&](const astpa::RunRecord& r) {
    ++done;
    if (!r.ok) std::cerr << astpa::method_name(r.method) << " rep " << r.rep << " failed: " << r.error << '\n';
    if (!quiet && (done % 10 == 0 || done == total)) std::cerr << "  " << done << '/' << total << " runs\r" << std::flush;
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!quiet) std::cerr << '\n';

  astpa::write_outputs(cfg.output_dir, res);
  astpa::write_summary_table(std::cout, res.report);
  std::cout << "wall time: " << std::fixed << std::setprecision(1) << secs << " s    output: " << cfg.output_dir
            << '\n';
  return res.report.any_failed() ? 1 : 0;
}

int cmd_oracle(const std::string& name, std::uint64_t n, std::uint64_t seed) {
  astpa::LimitStateProblem problem = astpa::bench::make_benchmark(name);
  astpa::Random rng(seed);
  const astpa::bench::McResult r = astpa::bench::mc_oracle(problem, n, rng);
  const double exact = astpa::bench::exact_pf(name);
  std::cout << "benchmark " << name << "  N " << n << "  failures " << r.failures << '\n'
            << "pf_hat " << std::scientific << std::setprecision(4) << r.pf_hat << "  cov "
            << (r.cov_hat ? std::to_string(*r.cov_hat) : std::string("undefined (no failures)")) << "  exact "
            << exact << "  ratio " << std::fixed << std::setprecision(4) << r.pf_hat / exact << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ASTPA rare-event estimation experiments"};
  app.require_subcommand(1);

  std::string config_path, methods, out_dir;
  std::optional<int> reps, threads;
  bool quiet = false;
  CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("--config", config_path, "INI experiment file")->required()->check(CLI::ExistingFile);
  run->add_option("--reps", reps, "repetitions per method")->check(CLI::PositiveNumber);
  run->add_option("--methods", methods, "comma-separated subset of hmcmc,qnp_hmcmc,sus_uniform,sus_normal");
  run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--quiet", quiet, "no progress or warnings");

  std::string bench_name;
  std::uint64_t n = 0, seed = 1;
  CLI::App* oracle = app.add_subcommand("oracle", "crude Monte Carlo reference for a benchmark");
  oracle->add_option("--benchmark", bench_name, "benchmark name")
      ->required()
      ->check(CLI::IsMember(astpa::bench::benchmark_names()));
  oracle->add_option("--n", n, "number of samples")->required()->check(CLI::PositiveNumber);
  oracle->add_option("--seed", seed, "random seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, reps, methods, threads, out_dir, quiet);
    return cmd_oracle(bench_name, n, seed);
  } catch (const astpa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
