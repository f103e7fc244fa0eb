#pragma once

#include "astpa/benchmarks.hpp"
#include "astpa/core.hpp"
#include "astpa/estimator.hpp"
#include "astpa/hmc.hpp"
#include "astpa/qnp.hpp"
#include "astpa/subset_simulation.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace astpa {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Method { hmcmc, qnp_hmcmc, sus_uniform, sus_normal };

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::sus_uniform, Method::sus_normal, Method::hmcmc, Method::qnp_hmcmc};
  return m;
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::hmcmc: return "hmcmc";
    case Method::qnp_hmcmc: return "qnp_hmcmc";
    case Method::sus_uniform: return "sus_uniform";
    case Method::sus_normal: return "sus_normal";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : all_methods())
    if (method_name(m) == s) return m;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

/// Comma-separated method list; empty entries are ignored.
inline std::vector<Method> parse_method_list(const std::string& s) {
  std::vector<std::string> parts;
  boost::split(parts, s, boost::is_any_of(","));
  std::vector<Method> out;
  for (std::string p : parts) {
    boost::trim(p);
    if (p.empty()) continue;
    const Method m = parse_method(p);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

struct AstpaParams {
  double sigma = 0.7;
  double tau = 1.0;
  Index burn_in = 200;
  Index n_iter = 1000000;          // stationary iteration cap
  std::uint64_t call_budget = 0;   // total model calls per run; 0 = run n_iter iterations
  bool adapt_tau = false;
  int max_steps = 100;
  PfMethod estimator = PfMethod::stratified;
  int k_max = 0;                   // 0: automatic
  std::optional<CovarianceType> covariance;  // unset: diagonal for d > 20, else full
  int rank = 1;                    // low_rank subspace dimension
};

struct SusParams {
  Index n_s = 1000;
  double p0 = 0.1;
  double scale = 1.0;
  int max_levels = 20;
};

struct ExperimentConfig {
  std::string benchmark;
  std::vector<Method> methods;
  int repetitions = 100;
  std::uint64_t base_seed = 1;
  int threads = 1;
  std::string output_dir = "out";
  AstpaParams hmcmc;
  AstpaParams qnp_hmcmc;
  SusParams sus_uniform;
  SusParams sus_normal;
};

inline const AstpaParams& astpa_params(const ExperimentConfig& c, Method m) {
  return m == Method::qnp_hmcmc ? c.qnp_hmcmc : c.hmcmc;
}

inline const SusParams& sus_params(const ExperimentConfig& c, Method m) {
  return m == Method::sus_normal ? c.sus_normal : c.sus_uniform;
}

inline PfMethod parse_pf_method(std::string_view s) {
  if (s == "stratified") return PfMethod::stratified;
  if (s == "pooled") return PfMethod::pooled;
  throw ConfigError("unknown estimator '" + std::string(s) + "' (expected stratified or pooled)");
}

inline CovarianceType parse_covariance_type(std::string_view s) {
  if (s == "full") return CovarianceType::full;
  if (s == "diagonal") return CovarianceType::diagonal;
  if (s == "low_rank") return CovarianceType::low_rank;
  throw ConfigError("unknown covariance '" + std::string(s) + "' (expected full, diagonal or low_rank)");
}

inline std::string pf_method_name(PfMethod m) { return m == PfMethod::pooled ? "pooled" : "stratified"; }

inline void validate(const ExperimentConfig& c) {
  bench::exact_pf(c.benchmark);  // throws for unknown names
  if (c.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  for (Method m : c.methods) {
    if (m == Method::hmcmc || m == Method::qnp_hmcmc) {
      const AstpaParams& p = astpa_params(c, m);
      const std::string who = method_name(m) + ": ";
      if (!(p.sigma > 0.0 && p.sigma <= 1.0)) throw ConfigError(who + "sigma must be in (0, 1]");
      if (!(p.tau > 0.0)) throw ConfigError(who + "tau must be positive");
      if (p.burn_in < 1 || p.n_iter < 1 || p.max_steps < 1 || p.rank < 1) throw ConfigError(who + "counts must be >= 1");
      if (p.k_max < 0) throw ConfigError(who + "k_max must be >= 0");
      if (p.call_budget > 0 && static_cast<double>(p.burn_in) > 0.2 * static_cast<double>(p.call_budget))
        throw ConfigError(who + "burn_in exceeds 20% of call_budget");
    } else {
      const SusParams& p = sus_params(c, m);
      SusConfig sc{p.n_s, p.p0, SusProposal::uniform_width2, p.max_levels, p.scale};
      sus_seed_count(sc);
    }
  }
}

namespace detail {

template <class T>
void read_opt(const boost::property_tree::ptree& pt, const std::string& key, T& out) {
  if (pt.get_optional<std::string>(key)) out = pt.get<T>(key);  // throws on malformed values
}

inline void read_astpa(const boost::property_tree::ptree& pt, const std::string& sec, AstpaParams& p) {
  read_opt(pt, sec + ".sigma", p.sigma);
  read_opt(pt, sec + ".tau", p.tau);
  read_opt(pt, sec + ".burn_in", p.burn_in);
  read_opt(pt, sec + ".n_iter", p.n_iter);
  read_opt(pt, sec + ".call_budget", p.call_budget);
  read_opt(pt, sec + ".adapt_tau", p.adapt_tau);
  read_opt(pt, sec + ".max_steps", p.max_steps);
  read_opt(pt, sec + ".k_max", p.k_max);
  read_opt(pt, sec + ".rank", p.rank);
  if (auto e = pt.get_optional<std::string>(sec + ".estimator")) p.estimator = parse_pf_method(*e);
  if (auto e = pt.get_optional<std::string>(sec + ".covariance")) p.covariance = parse_covariance_type(*e);
}

inline void read_sus(const boost::property_tree::ptree& pt, const std::string& sec, SusParams& p) {
  read_opt(pt, sec + ".n_s", p.n_s);
  read_opt(pt, sec + ".p0", p.p0);
  read_opt(pt, sec + ".scale", p.scale);
  read_opt(pt, sec + ".max_levels", p.max_levels);
}

}  // namespace detail

/// Parses the INI experiment format (see README): an [experiment] section
/// plus optional [hmcmc], [qnp_hmcmc], [sus_uniform], [sus_normal] sections.
inline ExperimentConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  try {
    c.benchmark = tree.get<std::string>("experiment.benchmark");
    c.methods = parse_method_list(tree.get<std::string>("experiment.methods", "sus_uniform,sus_normal,hmcmc,qnp_hmcmc"));
    detail::read_opt(tree, "experiment.repetitions", c.repetitions);
    detail::read_opt(tree, "experiment.base_seed", c.base_seed);
    detail::read_opt(tree, "experiment.threads", c.threads);
    detail::read_opt(tree, "experiment.output_dir", c.output_dir);
    detail::read_astpa(tree, "hmcmc", c.hmcmc);
    c.qnp_hmcmc = c.hmcmc;
    detail::read_astpa(tree, "qnp_hmcmc", c.qnp_hmcmc);
    detail::read_sus(tree, "sus_uniform", c.sus_uniform);
    c.sus_normal = c.sus_uniform;
    detail::read_sus(tree, "sus_normal", c.sus_normal);
  } catch (const pt::ptree_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  return parse_config(is);
}

// ---------------------------------------------------------------------------
// Single runs
// ---------------------------------------------------------------------------

struct RunRecord {
  Method method = Method::hmcmc;
  int rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double pf = 0.0;
  std::uint64_t model_calls = 0;
  // ASTPA diagnostics
  double pf_pooled = 0.0;
  double pf_stratified = 0.0;
  std::uint64_t burn_in_calls = 0;
  std::size_t stationary_samples = 0;
  double failure_fraction = 0.0;
  int gmm_components = 0;
  double step_size = 0.0;
  double acceptance = 0.0;
  int divergences = 0;
  std::vector<double> w_eigenvalues;  // QNp only
  // SuS diagnostics
  int levels = 0;
  std::vector<double> thresholds;
};

inline std::uint64_t run_seed(std::uint64_t base_seed, int rep) { return base_seed ^ static_cast<std::uint64_t>(rep); }

namespace detail {

inline void run_astpa(const ExperimentConfig& c, Method m, RunRecord& rec) {
  const AstpaParams& p = astpa_params(c, m);
  TargetModel target = TargetModel::create(bench::make_benchmark(c.benchmark), p.sigma, p.burn_in);
  ChainConfig cfg;
  cfg.burn_in = p.burn_in;
  cfg.n_iter = p.n_iter;
  cfg.tau = p.tau;
  cfg.seed = rec.seed;
  cfg.adapt_tau = p.adapt_tau;
  cfg.call_budget = p.call_budget;
  cfg.max_steps = p.max_steps;

  SampleBatch batch;
  if (m == Method::qnp_hmcmc) {
    QnpResult q = qnp_run_chain(target, cfg);
    rec.w_eigenvalues.assign(q.w_eigenvalues.data(), q.w_eigenvalues.data() + q.w_eigenvalues.size());
    batch = std::move(q.batch);
  } else {
    batch = run_chain(target, cfg);
  }
  rec.model_calls = batch.model_calls;
  for (const Draw& d : batch.draws)
    if (d.phase == Phase::burn_in) rec.burn_in_calls += static_cast<std::uint64_t>(d.steps);
  rec.stationary_samples = batch.stationary_count();
  rec.step_size = batch.step_size;
  rec.acceptance = batch.acceptance_rate(Phase::stationary);
  rec.divergences = batch.divergences;

  PostProcessOptions opt;
  opt.method = p.estimator;
  opt.gmm.k_max = p.k_max;
  opt.gmm.covariance = p.covariance;
  opt.gmm.rank = p.rank;
  const AstpaEstimate e = post_process(batch, target, opt);
  rec.pf = e.estimate.pf;
  rec.pf_pooled = e.pooled.pf;
  rec.pf_stratified = e.stratified.pf;
  rec.failure_fraction = e.estimate.failure_fraction;
  rec.gmm_components = e.fit.k;
}

inline void run_sus_method(const ExperimentConfig& c, Method m, RunRecord& rec) {
  const SusParams& p = sus_params(c, m);
  LimitStateProblem problem = bench::make_benchmark(c.benchmark);
  SusConfig cfg{p.n_s, p.p0, m == Method::sus_normal ? SusProposal::std_normal : SusProposal::uniform_width2,
                p.max_levels, p.scale};
  Random rng(rec.seed);
  const SusResult r = run_sus(problem, cfg, rng);
  rec.pf = r.pf;
  rec.model_calls = r.model_calls;
  rec.levels = r.levels;
  rec.thresholds = r.thresholds;
  rec.failure_fraction = r.final_fraction;
}

}  // namespace detail

/// One repetition of one method. Errors are captured in the record.
inline RunRecord run_single(const ExperimentConfig& c, Method m, int rep) {
  RunRecord rec;
  rec.method = m;
  rec.rep = rep;
  rec.seed = run_seed(c.base_seed, rep);
  try {
    if (m == Method::hmcmc || m == Method::qnp_hmcmc)
      detail::run_astpa(c, m, rec);
    else
      detail::run_sus_method(c, m, rec);
    rec.ok = std::isfinite(rec.pf);
    if (!rec.ok) rec.error = "non-finite estimate";
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct Aggregate {
  double mean = 0.0;
  std::optional<double> cov;  // empty when the mean is zero
  double mean_calls = 0.0;
  std::size_t n = 0;
  bool single = false;        // n == 1: cov reported as 0
};

inline Aggregate aggregate(std::span<const double> pf, std::span<const double> calls) {
  if (pf.empty()) throw ConfigError("aggregate: no estimates");
  if (pf.size() != calls.size()) throw DimensionError("aggregate: size mismatch");
  Aggregate a;
  a.n = pf.size();
  const double n = static_cast<double>(a.n);
  for (std::size_t i = 0; i < a.n; ++i) {
    a.mean += pf[i];
    a.mean_calls += calls[i];
  }
  a.mean /= n;
  a.mean_calls /= n;
  if (a.n == 1) {
    a.single = true;
    if (a.mean != 0.0) a.cov = 0.0;
    return a;
  }
  double ss = 0.0;
  for (double p : pf) ss += (p - a.mean) * (p - a.mean);
  if (a.mean != 0.0) a.cov = std::sqrt(ss / (n - 1.0)) / a.mean;
  return a;
}

struct MethodReport {
  Method method = Method::hmcmc;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  double mean_pf = 0.0;
  std::optional<double> cov;
  double mean_calls = 0.0;

  bool operator==(const MethodReport&) const = default;
};

struct AggregateReport {
  std::string benchmark;
  double exact_pf = 0.0;
  std::vector<MethodReport> methods;

  bool operator==(const AggregateReport&) const = default;
  bool any_failed() const {
    return std::any_of(methods.begin(), methods.end(), [](const MethodReport& m) { return m.n_failed > 0; });
  }
  const MethodReport* find(Method m) const {
    for (const auto& r : methods)
      if (r.method == m) return &r;
    return nullptr;
  }
};

/// Per-method aggregates over successful runs, in the order of `methods`.
inline AggregateReport build_report(const std::string& benchmark, const std::vector<Method>& methods,
                                    const std::vector<RunRecord>& runs) {
  AggregateReport rep;
  rep.benchmark = benchmark;
  rep.exact_pf = bench::exact_pf(benchmark);
  for (Method m : methods) {
    MethodReport mr;
    mr.method = m;
    std::vector<double> pf, calls;
    for (const RunRecord& r : runs) {
      if (r.method != m) continue;
      if (!r.ok) {
        ++mr.n_failed;
        continue;
      }
      pf.push_back(r.pf);
      calls.push_back(static_cast<double>(r.model_calls));
    }
    mr.n_ok = pf.size();
    if (!pf.empty()) {
      const Aggregate a = aggregate(pf, calls);
      mr.mean_pf = a.mean;
      mr.cov = a.cov;
      mr.mean_calls = a.mean_calls;
    }
    rep.methods.push_back(mr);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

struct ExperimentResult {
  AggregateReport report;
  std::vector<RunRecord> runs;  // method-major, then repetition
};

/// Runs every (method, repetition) pair on a pool of `threads` workers. Each
/// run owns its seed, model and call counter, so results do not depend on
/// scheduling. `on_done` (optional) is called under a lock after each run.
template <class Callback>
ExperimentResult run_experiment(const ExperimentConfig& c, Callback&& on_done) {
  validate(c);
  const std::size_t reps = static_cast<std::size_t>(c.repetitions);
  const std::size_t total = c.methods.size() * reps;
  std::vector<RunRecord> runs(total);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      runs[i] = run_single(c, c.methods[i / reps], static_cast<int>(i % reps));
      std::lock_guard<std::mutex> lock(mu);
      on_done(runs[i]);
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::max(1, c.threads));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, std::max<std::size_t>(total, 1)); ++t) pool.emplace_back(worker);
  }
  ExperimentResult out;
  out.report = build_report(c.benchmark, c.methods, runs);
  out.runs = std::move(runs);
  return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  return run_experiment(c, [](const RunRecord&) {});
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_exact(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string fmt_sci(double v, int digits = 3) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(digits - 1) << v;
  return os.str();
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("summary csv: bad number '" + s + "'");
  return v;
}

}  // namespace detail

/// Table with one column per method: model calls, C.O.V, mean estimate.
inline void write_summary_table(std::ostream& os, const AggregateReport& rep) {
  const int label_w = 26, col_w = 14;
  os << "benchmark: " << rep.benchmark << "    exact P_F ~ " << detail::fmt_sci(rep.exact_pf) << '\n';
  os << std::left << std::setw(label_w) << "";
  for (const auto& m : rep.methods) os << std::right << std::setw(col_w) << method_name(m.method);
  os << '\n';
  auto row = [&](const std::string& label, auto&& cell) {
    os << std::left << std::setw(label_w) << label;
    for (const auto& m : rep.methods) os << std::right << std::setw(col_w) << cell(m);
    os << '\n';
  };
  row("Number of model calls", [](const MethodReport& m) {
    return m.n_ok ? std::to_string(static_cast<long long>(std::llround(m.mean_calls))) : std::string("-");
  });
  row("C.O.V", [](const MethodReport& m) {
    if (!m.n_ok || !m.cov) return std::string("undefined");
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << *m.cov;
    return s.str();
  });
  row("E[P_F]", [](const MethodReport& m) { return m.n_ok ? detail::fmt_sci(m.mean_pf) : std::string("-"); });
  row("E[P_F] / exact", [&](const MethodReport& m) {
    if (!m.n_ok) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << m.mean_pf / rep.exact_pf;
    return s.str();
  });
  row("successful runs", [](const MethodReport& m) { return std::to_string(m.n_ok); });
  row("failed runs", [](const MethodReport& m) { return std::to_string(m.n_failed); });
}

inline constexpr const char* kSummaryCsvHeader = "benchmark,method,model_calls,cov,mean_pf,exact,n_ok,n_failed";

/// Machine-readable summary; values are written with round-trip precision.
/// An undefined C.O.V is written as "undefined".
inline void write_summary_csv(std::ostream& os, const AggregateReport& rep) {
  os << kSummaryCsvHeader << '\n';
  for (const auto& m : rep.methods) {
    os << rep.benchmark << ',' << method_name(m.method) << ',' << detail::fmt_exact(m.mean_calls) << ','
       << (m.cov ? detail::fmt_exact(*m.cov) : std::string("undefined")) << ',' << detail::fmt_exact(m.mean_pf)
       << ',' << detail::fmt_exact(rep.exact_pf) << ',' << m.n_ok << ',' << m.n_failed << '\n';
  }
}

inline AggregateReport parse_summary_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kSummaryCsvHeader) throw ConfigError("summary csv: bad header");
  AggregateReport rep;
  rep.exact_pf = 0.0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    boost::split(f, line, boost::is_any_of(","));
    if (f.size() != 8) throw ConfigError("summary csv: expected 8 fields");
    rep.benchmark = f[0];
    MethodReport m;
    m.method = parse_method(f[1]);
    m.mean_calls = detail::parse_double(f[2]);
    if (f[3] != "undefined") m.cov = detail::parse_double(f[3]);
    m.mean_pf = detail::parse_double(f[4]);
    rep.exact_pf = detail::parse_double(f[5]);
    m.n_ok = static_cast<std::size_t>(std::stoull(f[6]));
    m.n_failed = static_cast<std::size_t>(std::stoull(f[7]));
    rep.methods.push_back(m);
  }
  return rep;
}

inline void write_runs_csv(std::ostream& os, const std::vector<RunRecord>& runs) {
  os << "method,rep,seed,ok,pf,model_calls,pf_pooled,pf_stratified,burn_in_calls,stationary_samples,"
        "failure_fraction,gmm_components,step_size,acceptance,divergences,sus_levels,error\n";
  for (const RunRecord& r : runs) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << method_name(r.method) << ',' << r.rep << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ','
       << detail::fmt_exact(r.pf) << ',' << r.model_calls << ',' << detail::fmt_exact(r.pf_pooled) << ','
       << detail::fmt_exact(r.pf_stratified) << ',' << r.burn_in_calls << ',' << r.stationary_samples << ','
       << detail::fmt_exact(r.failure_fraction) << ',' << r.gmm_components << ',' << detail::fmt_exact(r.step_size)
       << ',' << detail::fmt_exact(r.acceptance) << ',' << r.divergences << ',' << r.levels << ',' << err << '\n';
  }
}

/// Per-run scatter data (successful runs only).
inline void write_plotdata_csv(std::ostream& os, const std::vector<RunRecord>& runs, double exact) {
  os << "method,rep,model_calls,pf,exact\n";
  for (const RunRecord& r : runs)
    if (r.ok)
      os << method_name(r.method) << ',' << r.rep << ',' << r.model_calls << ',' << detail::fmt_exact(r.pf) << ','
         << detail::fmt_exact(exact) << '\n';
}

/// One JSON object per run with the list-valued diagnostics.
inline void write_runs_jsonl(std::ostream& os, const std::vector<RunRecord>& runs) {
  for (const RunRecord& r : runs) {
    nlohmann::json j;
    j["method"] = method_name(r.method);
    j["rep"] = r.rep;
    j["seed"] = r.seed;
    j["ok"] = r.ok;
    j["pf"] = r.pf;
    j["model_calls"] = r.model_calls;
    if (!r.error.empty()) j["error"] = r.error;
    if (r.method == Method::hmcmc || r.method == Method::qnp_hmcmc) {
      j["pf_pooled"] = r.pf_pooled;
      j["pf_stratified"] = r.pf_stratified;
      j["gmm_components"] = r.gmm_components;
      if (!r.w_eigenvalues.empty()) j["w_eigenvalues"] = r.w_eigenvalues;
    } else {
      j["thresholds"] = r.thresholds;
    }
    os << j.dump() << '\n';
  }
}

/// Writes summary.txt, summary.csv, runs.csv, plotdata.csv and runs.jsonl.
inline void write_outputs(const std::filesystem::path& dir, const ExperimentResult& res) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("summary.txt");
    write_summary_table(f, res.report);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, res.report);
  }
  {
    auto f = open("runs.csv");
    write_runs_csv(f, res.runs);
  }
  {
    auto f = open("plotdata.csv");
    write_plotdata_csv(f, res.runs, res.report.exact_pf);
  }
  {
    auto f = open("runs.jsonl");
    write_runs_jsonl(f, res.runs);
  }
}

}  // namespace astpa
