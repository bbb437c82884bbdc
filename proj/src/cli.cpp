#include "ebmnm/cli.hpp"

#include "ebmnm/io.hpp"
#include "ebmnm/mixture.hpp"
#include "ebmnm/posterior.hpp"
#include "ebmnm/sim.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <iostream>
#include <map>
#include <optional>

#ifndef EBMNM_VERSION
#define EBMNM_VERSION "0.0.0"
#endif

namespace ebmnm::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NumericalFailure:
    case ErrorKind::SingularMatrix:
      return kNumericalFailure;
    case ErrorKind::Io:
      return kIoFailure;
    default:
      return kUsageError;
  }
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// Reads `key = value` lines (# starts a comment) into "--key value" pairs.
std::vector<std::string> config_args(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::vector<std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::MalformedInput,
                  path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) != 0) key = "--" + key;
    out.push_back(key);
    out.push_back(trim(line.substr(eq + 1)));
  }
  return out;
}

// Places config-file arguments right after the subcommand so that explicit
// flags, which come later, win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> config;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config || rest.size() < 2) return rest;
  std::vector<std::string> out{rest[0], rest[1]};
  for (auto& a : config_args(*config)) out.push_back(std::move(a));
  out.insert(out.end(), rest.begin() + 2, rest.end());
  return out;
}

Penalty parse_penalty(const std::string& kind, const std::string& lambda, Eigen::Index R) {
  if (kind == "none") return Penalty::none();
  double lam = 0.0;
  if (lambda == "R") {
    lam = static_cast<double>(R);
  } else {
    try {
      std::size_t used = 0;
      lam = std::stod(lambda, &used);
      if (used != lambda.size()) throw std::invalid_argument(lambda);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidConfig, "--lambda must be a number or the token R, got '" + lambda + "'");
    }
  }
  return kind == "iw" ? Penalty::inverse_wishart(lam) : Penalty::nuclear_norm(lam);
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "ted") return Algorithm::TED;
  if (s == "ed") return Algorithm::ED;
  return Algorithm::FA;
}

ScenarioKind parse_scenario(const std::string& s) {
  return s == "hybrid" ? ScenarioKind::Hybrid : ScenarioKind::RankOne;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

struct Manifest {
  json doc;

  Manifest(const std::string& command, const std::vector<std::string>& argv) {
    doc["command"] = command;
    doc["version"] = EBMNM_VERSION;
    doc["argv"] = argv;
    doc["started"] = utc_timestamp();
    doc["inputs"] = json::object();
    doc["outputs"] = json::array();
    doc["parameters"] = json::object();
  }

  void output(const fs::path& p) { doc["outputs"].push_back(p.string()); }

  void write(const fs::path& dir) {
    const fs::path p = dir / "manifest.json";
    output(p);
    doc["finished"] = utc_timestamp();
    io::write_text(p, doc.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------------------

struct SimulateOpts {
  std::string scenario = "hybrid";
  int n = 1000;
  int nTest = 0;
  int R = 5;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_simulate(const SimulateOpts& o, const std::vector<std::string>& argv, std::ostream& out) {
  Scenario sc{parse_scenario(o.scenario), o.n, o.nTest, o.R, o.seed};
  SimulatedData sim = generate(sc);
  const fs::path dir(o.out);
  ensure_dir(dir);
  Manifest man("simulate", argv);
  man.doc["seed"] = o.seed;
  man.doc["parameters"] = {{"scenario", o.scenario}, {"n", o.n}, {"n_test", o.nTest}, {"R", o.R}};

  io::write_matrix_csv(dir / "x.csv", sim.train.x());
  io::write_noise_csv(dir / "noise.csv", sim.train.noise());
  io::write_matrix_csv(dir / "theta.csv", sim.truth.theta);
  io::write_prior(dir / "true_prior.json", sim.truth.prior);
  for (const char* f : {"x.csv", "noise.csv", "theta.csv", "true_prior.json"}) man.output(dir / f);
  if (sim.test) {
    io::write_matrix_csv(dir / "x_test.csv", sim.test->x());
    io::write_matrix_csv(dir / "theta_test.csv", sim.truth.thetaTest);
    man.output(dir / "x_test.csv");
    man.output(dir / "theta_test.csv");
  }
  man.write(dir);
  out << "simulated " << o.scenario << " n=" << o.n << " R=" << o.R << " into " << dir.string() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct FitOpts {
  std::string x, noise, init, out;
  std::string algorithm = "ted";
  std::string penalty = "none";
  std::string lambda = "R";
  std::string constraint;
  int K = 10;
  int maxIterations = 2000;
  double tolerance = 0.01;
  int warmStart = 20;
  std::uint64_t seed = 1;
  int threads = 0;
};

int cmd_fit(const FitOpts& o, const std::vector<std::string>& argv, std::ostream& out) {
  const Dataset d = io::read_dataset(o.x, o.noise);
  FitConfig cfg;
  cfg.algorithm = parse_algorithm(o.algorithm);
  cfg.penalty = parse_penalty(o.penalty, o.lambda, d.dim());
  cfg.maxIterations = o.maxIterations;
  cfg.tolerance = o.tolerance;
  cfg.warmStartEDIterations = o.warmStart;
  cfg.seed = o.seed;
  cfg.threads = o.threads;

  std::optional<MixturePrior> init;
  if (!o.init.empty()) {
    init = io::read_prior(o.init);
  } else {
    const std::string kind = o.constraint.empty() ? (cfg.algorithm == Algorithm::FA ? "rank1" : "free")
                                                  : o.constraint;
    const auto c = kind == "rank1" ? ComponentConstraint::rank1() : ComponentConstraint::free();
    init = random_init(static_cast<int>(d.dim()), o.K, o.seed,
                       std::vector<ComponentConstraint>(static_cast<std::size_t>(o.K), c));
  }
  cfg.K = static_cast<int>(init->K());

  const FitResult res = fit(d, *init, cfg);

  const fs::path dir(o.out);
  ensure_dir(dir);
  Manifest man("fit", argv);
  man.doc["seed"] = o.seed;
  man.doc["inputs"] = {{"x", o.x}, {"noise", o.noise}, {"init", o.init}};
  man.doc["parameters"] = {{"algorithm", o.algorithm},
                           {"penalty", o.penalty},
                           {"lambda", cfg.penalty.lambda},
                           {"K", cfg.K},
                           {"constraint", o.constraint},
                           {"max_iterations", o.maxIterations},
                           {"tolerance", o.tolerance},
                           {"warm_start", o.warmStart},
                           {"threads", o.threads}};
  io::write_prior(dir / "prior.json", res.prior);
  io::write_trace_csv(dir / "trace.csv", res.trace);
  man.output(dir / "prior.json");
  man.output(dir / "trace.csv");
  const double final_obj = res.trace.perIteration.back().objective;
  man.doc["result"] = {{"objective", final_obj},
                       {"iterations", res.trace.iterationsRun},
                       {"converged", res.trace.converged}};
  man.write(dir);
  out << "fit " << o.algorithm << "/" << o.penalty << " K=" << cfg.K << ": objective "
      << io::format_double(final_obj) << " after " << res.trace.iterationsRun << " iterations"
      << (res.trace.converged ? " (converged)" : " (iteration limit)") << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct PosteriorOpts {
  std::string x, noise, prior, out;
  int threads = 0;
};

int cmd_posterior(const PosteriorOpts& o, const std::vector<std::string>& argv, std::ostream& out) {
  const Dataset d = io::read_dataset(o.x, o.noise);
  const MixturePrior m = io::read_prior(o.prior);
  const PosteriorSummary s = summarize(d, m, o.threads);
  const fs::path dir(o.out);
  ensure_dir(dir);
  Manifest man("posterior", argv);
  man.doc["inputs"] = {{"x", o.x}, {"noise", o.noise}, {"prior", o.prior}};
  man.doc["parameters"] = {{"threads", o.threads}};
  io::write_summary_csv(dir / "summary.csv", d, s);
  man.output(dir / "summary.csv");
  man.write(dir);
  out << "wrote " << d.n() * d.dim() << " posterior rows to " << (dir / "summary.csv").string() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct EvaluateOpts {
  std::string prior, truth, out;
  double threshold = 0.05;
  int threads = 0;
};

fs::path require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw Error(ErrorKind::Io, std::string("missing ground truth: ") + what + " (" + p.string() + ")");
  return p;
}

int cmd_evaluate(const EvaluateOpts& o, const std::vector<std::string>& argv, std::ostream& out) {
  const fs::path truth_dir(o.truth);
  const Dataset train = io::read_dataset(require_file(truth_dir / "x.csv", "x.csv"),
                                         require_file(truth_dir / "noise.csv", "noise.csv"));
  const Matrix theta = io::read_matrix_csv(require_file(truth_dir / "theta.csv", "theta.csv"));
  const MixturePrior true_prior = io::read_prior(require_file(truth_dir / "true_prior.json", "true_prior.json"));
  const MixturePrior fitted = io::read_prior(o.prior);

  const bool has_test = fs::exists(truth_dir / "x_test.csv");
  const Dataset test = has_test ? train.with_x(io::read_matrix_csv(truth_dir / "x_test.csv")) : train;
  GroundTruth truth{true_prior, theta, Matrix(), Matrix(), {}, {}};
  const EvalReport rep = evaluate(train, test, truth, fitted, o.threshold, default_thresholds(), o.threads);

  const fs::path dir(o.out);
  ensure_dir(dir);
  Manifest man("evaluate", argv);
  man.doc["inputs"] = {{"prior", o.prior}, {"truth", o.truth}, {"kl_on", has_test ? "x_test.csv" : "x.csv"}};
  man.doc["parameters"] = {{"threshold", o.threshold}, {"threads", o.threads}};
  io::write_text(dir / "report.json", io::report_to_json(rep).dump(2) + "\n");
  io::write_curve_csv(dir / "curve.csv", rep.powerFsrCurve);
  man.output(dir / "report.json");
  man.output(dir / "curve.csv");
  man.write(dir);
  out << "KL " << io::format_double(rep.klDivergence) << ", empirical FSR "
      << io::format_double(rep.empiricalFsr) << " over " << rep.significantCount
      << " tests at lfsr < " << o.threshold << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct BenchOpts {
  std::string scenario = "hybrid";
  int n = 1000;
  int nTest = -1;
  int R = 5;
  int K = 10;
  int replicates = 1;
  int maxIterations = 2000;
  double tolerance = 0.01;
  int warmStart = 20;
  double threshold = 0.05;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out;
};

struct BenchMethod {
  std::string name;
  Algorithm algorithm;
  PenaltyKind penalty;
  ConstraintKind constraint;
};

int cmd_bench(const BenchOpts& o, const std::vector<std::string>& argv, std::ostream& out) {
  const std::vector<BenchMethod> methods = {
      {"ted", Algorithm::TED, PenaltyKind::None, ConstraintKind::Free},
      {"ted.iw", Algorithm::TED, PenaltyKind::InverseWishart, ConstraintKind::Free},
      {"ted.nn", Algorithm::TED, PenaltyKind::NuclearNorm, ConstraintKind::Free},
      {"ed", Algorithm::ED, PenaltyKind::None, ConstraintKind::Free},
      {"ed.iw", Algorithm::ED, PenaltyKind::InverseWishart, ConstraintKind::Free},
      {"ted.rank1", Algorithm::TED, PenaltyKind::None, ConstraintKind::Rank1},
      {"fa.rank1", Algorithm::FA, PenaltyKind::None, ConstraintKind::Rank1},
  };
  const fs::path dir(o.out);
  ensure_dir(dir);
  std::string csv =
      "replicate,method,algorithm,penalty,constraint,loglik,objective,iterations,converged,seconds,kl,fsr,significant\n";
  auto row = [&](int rep, const std::string& name, const std::string& alg, const std::string& pen,
                 const std::string& con, double ll, double obj, int its, bool conv, double secs,
                 const EvalReport& r) {
    csv += std::to_string(rep) + ',' + name + ',' + alg + ',' + pen + ',' + con + ',' + io::format_double(ll) +
           ',' + io::format_double(obj) + ',' + std::to_string(its) + ',' + (conv ? "1" : "0") + ',' +
           io::format_double(secs) + ',' + io::format_double(r.klDivergence) + ',' +
           io::format_double(r.empiricalFsr) + ',' + std::to_string(r.significantCount) + '\n';
    out << "rep " << rep << "  " << name << "  loglik " << io::format_double(ll) << "  kl "
        << io::format_double(r.klDivergence) << "  fsr " << io::format_double(r.empiricalFsr) << "\n";
  };

  for (int rep = 0; rep < o.replicates; ++rep) {
    const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(rep);
    Scenario sc{parse_scenario(o.scenario), o.n, o.nTest < 0 ? o.n : o.nTest, o.R, seed};
    const SimulatedData sim = generate(sc);
    const Dataset& test = sim.test ? *sim.test : sim.train;
    const EvalReport oracle = evaluate(sim.train, test, sim.truth, sim.truth.prior, o.threshold,
                                       default_thresholds(), o.threads);
    row(rep, "oracle", "-", "-", "-", log_likelihood(sim.train, sim.truth.prior, o.threads),
        log_likelihood(sim.train, sim.truth.prior, o.threads), 0, true, 0.0, oracle);

    for (const auto& m : methods) {
      FitConfig cfg;
      cfg.algorithm = m.algorithm;
      cfg.penalty = m.penalty == PenaltyKind::None ? Penalty::none()
                    : m.penalty == PenaltyKind::InverseWishart
                        ? Penalty::inverse_wishart(o.R)
                        : Penalty::nuclear_norm(o.R);
      cfg.maxIterations = o.maxIterations;
      cfg.tolerance = o.tolerance;
      cfg.warmStartEDIterations = o.warmStart;
      cfg.K = o.K;
      cfg.seed = seed;
      cfg.threads = o.threads;
      const ComponentConstraint c =
          m.constraint == ConstraintKind::Rank1 ? ComponentConstraint::rank1() : ComponentConstraint::free();
      const MixturePrior init = random_init(o.R, o.K, seed, std::vector<ComponentConstraint>(o.K, c));
      const FitResult res = fit(sim.train, init, cfg);
      const EvalReport r = evaluate(sim.train, test, sim.truth, res.prior, o.threshold,
                                    default_thresholds(), o.threads);
      row(rep, m.name, to_string(m.algorithm), to_string(m.penalty), to_string(m.constraint),
          log_likelihood(sim.train, res.prior, o.threads), res.trace.perIteration.back().objective,
          res.trace.iterationsRun, res.trace.converged, res.trace.perIteration.back().seconds, r);
    }
  }
  Manifest man("bench", argv);
  man.doc["seed"] = o.seed;
  man.doc["parameters"] = {{"scenario", o.scenario}, {"n", o.n},       {"n_test", o.nTest},
                           {"R", o.R},               {"K", o.K},       {"replicates", o.replicates},
                           {"max_iterations", o.maxIterations},        {"tolerance", o.tolerance},
                           {"warm_start", o.warmStart},                {"threshold", o.threshold}};
  io::write_text(dir / "results.csv", csv);
  man.output(dir / "results.csv");
  man.write(dir);
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  }

  CLI::App app{"Empirical Bayes multivariate normal means: fit mixture priors, compute posteriors"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", EBMNM_VERSION);
  std::string ignored_config;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", ignored_config, "File of key = value lines mirroring the flags");
  };

  SimulateOpts sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a simulated dataset with ground truth");
  sim_cmd->add_option("--scenario", sim.scenario)->check(CLI::IsMember({"hybrid", "rank1"}))->capture_default_str();
  sim_cmd->add_option("--n", sim.n, "Training observations")->check(CLI::PositiveNumber)->capture_default_str();
  sim_cmd->add_option("--n-test", sim.nTest, "Test observations")->check(CLI::NonNegativeNumber)->capture_default_str();
  sim_cmd->add_option("--R", sim.R, "Dimension")->check(CLI::PositiveNumber)->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed)->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "Output directory")->required();
  add_config(sim_cmd);

  FitOpts fo;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a mixture prior");
  fit_cmd->add_option("--x", fo.x, "Observations CSV (n x R)")->required();
  fit_cmd->add_option("--noise", fo.noise, "Noise CSV (R x R or n*R x R)")->required();
  fit_cmd->add_option("--algorithm", fo.algorithm)->check(CLI::IsMember({"ted", "ed", "fa"}))->capture_default_str();
  fit_cmd->add_option("--penalty", fo.penalty)->check(CLI::IsMember({"none", "iw", "nn"}))->capture_default_str();
  fit_cmd->add_option("--lambda,--lambda-mode", fo.lambda, "Penalty strength, or R for the dimension")
      ->capture_default_str();
  fit_cmd->add_option("--K", fo.K, "Mixture components")->check(CLI::PositiveNumber)->capture_default_str();
  fit_cmd->add_option("--constraint", fo.constraint, "free or rank1 for random initialisation")
      ->check(CLI::IsMember({"free", "rank1"}));
  fit_cmd->add_option("--init", fo.init, "Initial prior JSON (overrides --K/--constraint)");
  fit_cmd->add_option("--max-iterations", fo.maxIterations)->check(CLI::PositiveNumber)->capture_default_str();
  fit_cmd->add_option("--tolerance", fo.tolerance)->check(CLI::PositiveNumber)->capture_default_str();
  fit_cmd->add_option("--warm-start", fo.warmStart, "ED warm-start iterations")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  fit_cmd->add_option("--seed", fo.seed)->capture_default_str();
  fit_cmd->add_option("--threads", fo.threads, "Worker threads (0 = all cores)")->capture_default_str();
  fit_cmd->add_option("--out", fo.out, "Output directory")->required();
  add_config(fit_cmd);

  PosteriorOpts po;
  auto* post_cmd = app.add_subcommand("posterior", "Posterior means, sds and lfsr");
  post_cmd->add_option("--x", po.x)->required();
  post_cmd->add_option("--noise", po.noise)->required();
  post_cmd->add_option("--prior", po.prior)->required();
  post_cmd->add_option("--threads", po.threads)->capture_default_str();
  post_cmd->add_option("--out", po.out)->required();
  add_config(post_cmd);

  EvaluateOpts eo;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a fitted prior against simulation ground truth");
  eval_cmd->add_option("--prior", eo.prior, "Fitted prior JSON")->required();
  eval_cmd->add_option("--truth", eo.truth, "Directory written by simulate")->required();
  eval_cmd->add_option("--threshold", eo.threshold, "lfsr significance threshold")->capture_default_str();
  eval_cmd->add_option("--threads", eo.threads)->capture_default_str();
  eval_cmd->add_option("--out", eo.out)->required();
  add_config(eval_cmd);

  BenchOpts bo;
  auto* bench_cmd = app.add_subcommand("bench", "Run the algorithm x penalty grid on simulated replicates");
  bench_cmd->add_option("--scenario", bo.scenario)->check(CLI::IsMember({"hybrid", "rank1"}))->capture_default_str();
  bench_cmd->add_option("--n", bo.n)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--n-test", bo.nTest, "Test observations (default: n)");
  bench_cmd->add_option("--R", bo.R)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--K", bo.K)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--replicates", bo.replicates)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--max-iterations", bo.maxIterations)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--tolerance", bo.tolerance)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--warm-start", bo.warmStart)->check(CLI::NonNegativeNumber)->capture_default_str();
  bench_cmd->add_option("--threshold", bo.threshold)->capture_default_str();
  bench_cmd->add_option("--seed", bo.seed)->capture_default_str();
  bench_cmd->add_option("--threads", bo.threads)->capture_default_str();
  bench_cmd->add_option("--out", bo.out)->required();
  add_config(bench_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*sim_cmd) return cmd_simulate(sim, args, out);
    if (*fit_cmd) return cmd_fit(fo, args, out);
    if (*post_cmd) return cmd_posterior(po, args, out);
    if (*eval_cmd) return cmd_evaluate(eo, args, out);
    if (*bench_cmd) return cmd_bench(bo, args, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  }
  return kUsageError;
}

int main(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace ebmnm::cli
