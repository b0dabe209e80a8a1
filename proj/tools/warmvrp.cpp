// Command-line front end: gen, train, solve, bench, report.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "warmvrp/bench.hpp"
#include "warmvrp/csv.hpp"
#include "warmvrp/ga.hpp"
#include "warmvrp/instances.hpp"
#include "warmvrp/trainer.hpp"

namespace fs = std::filesystem;
using namespace warmvrp;

namespace {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };
Level g_level = Level::Info;

void log(Level level, const std::string& message) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= g_level) std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << '\n';
}

struct Global {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir;
  std::string log_level = "info";
};

fs::path resolve(const Global& g, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? p : fs::path(g.out_dir) / p;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

Instance read_any_instance(const fs::path& path) {
  if (path.extension() == ".vrp") return parse_cvrplib(read_text(path), path.stem().string());
  return load_instance(path);
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string dist;
  int n = 0;
  int count = 0;
  std::string capacity_rule = "fixed:50";
  int clusters = 0;
  double spread = 0.0;
  double asymmetry = 0.2;
  double detour_noise = 0.3;
  int clustered_capacity = 160000;
  long probe_iterations = 200;
  bool no_budget = false;
};

CapacityRule parse_capacity_rule(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (kind == "fixed") return FixedCapacity{std::stoi(rest)};
    if (kind == "range") {
      const auto dash = rest.find('-');
      if (dash == std::string::npos) throw Error("");
      return CapacityRange{std::stoi(rest.substr(0, dash)), std::stoi(rest.substr(dash + 1))};
    }
  } catch (const std::exception&) {
  }
  throw CLI::ValidationError("--capacity-rule", "expected fixed:Q or range:LOW-HIGH, got '" + text + "'");
}

int run_gen(const Global& g, const GenArgs& a) {
  const CapacityRule rule = parse_capacity_rule(a.capacity_rule);
  const fs::path dir(g.out_dir);
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["distribution"] = a.dist;
  manifest["n_customers"] = a.n;
  manifest["count"] = a.count;
  manifest["seed"] = g.seed;
  manifest["instances"] = nlohmann::json::array();
  for (int i = 0; i < a.count; ++i) {
    const std::uint64_t seed = split_seed(g.seed, DataSplit::Test, static_cast<std::uint64_t>(i));
    Instance inst;
    if (a.dist == "uniform") {
      UniformGenConfig cfg;
      cfg.n_customers = a.n;
      cfg.capacity_rule = rule;
      cfg.seed = seed;
      inst = gen_uniform(cfg);
    } else {
      ClusteredGenConfig cfg;
      cfg.n_customers = a.n;
      cfg.n_clusters = a.clusters;
      cfg.cluster_spread = a.spread;
      cfg.asymmetry_factor = a.asymmetry;
      cfg.detour_noise = a.detour_noise;
      cfg.capacity = a.clustered_capacity;
      cfg.seed = seed;
      inst = gen_clustered(cfg);
    }
    if (!a.no_budget) {
      RunLimits probe{1.0, a.probe_iterations};
      const BudgetAssignment b = assign_vehicle_budget(inst, probe, derive_seed(seed, 7));
      inst = b.instance;
      log(Level::Debug, inst.id + ": K=" + std::to_string(inst.vehicle_budget) +
                            " lower bound=" + std::to_string(b.lower_bound));
    }
    const std::string file = inst.id + ".json";
    save_instance(inst, dir / file);
    manifest["instances"].push_back({{"file", file}, {"id", inst.id}, {"digest", file_digest(dir / file)}});
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  log(Level::Info, "wrote " + std::to_string(a.count) + " instances to " + dir.string());
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string out = "params.json";
  std::string resume;
};

int run_train(const Global& g, const TrainArgs& a) {
  TrainConfig cfg = train_config_from_json_text(read_text(a.config));
  if (g.seed_given) cfg.seed = g.seed;
  validate(cfg);
  const fs::path out = resolve(g, a.out);
  const fs::path log_path = resolve(g, "train_log.csv");
  const fs::path ckpt_path = resolve(g, "train_checkpoint.json");
  fs::create_directories(fs::path(g.out_dir));

  TrainHooks hooks;
  std::ofstream log_file;
  if (!a.resume.empty()) {
    hooks.resume = checkpoint_from_json_text(read_text(a.resume));
    log_file.open(log_path, std::ios::binary | std::ios::app);
  } else {
    log_file.open(log_path, std::ios::binary);
    write_train_log_header(log_file);
  }
  if (!log_file) throw Error("cannot write " + log_path.string());
  hooks.on_log = [&](const TrainLogRow& row) {
    write_train_log_row(log_file, row);
    log_file.flush();
    if (row.eval_cost)
      log(Level::Info, "stage " + std::to_string(row.stage) + " iteration " + std::to_string(row.iteration) +
                           " eval " + std::to_string(*row.eval_cost));
  };
  std::optional<TrainCheckpoint> last_checkpoint;
  hooks.on_checkpoint = [&](const TrainCheckpoint& c) {
    write_text(ckpt_path, to_json_text(c));
    last_checkpoint = c;
  };

  try {
    const TrainResult result = train(cfg, hooks);
    save_params(result.best, out);
    log(Level::Info, "initial eval " + std::to_string(result.initial_eval) + ", best eval " +
                         std::to_string(result.best_eval) + ", params " + out.string());
  } catch (const NonFiniteGradient& e) {
    if (last_checkpoint) save_params(last_checkpoint->best, out);
    log(Level::Error, std::string("training halted: ") + e.what());
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
  std::string instance;
  std::string init;
  std::string params;
  double budget = 1.0;
  std::optional<long> max_iterations;
  std::string trace = "trace.csv";
  std::string solution = "solution.json";
  int candidates = 8;
  double temperature = 1.0;
};

int run_solve(const Global& g, const SolveArgs& a) {
  const Instance inst = read_any_instance(a.instance);
  MethodSpec method;
  method.name = a.init;
  method.candidates = a.candidates;
  method.temperature = a.temperature;
  if (a.init == "random") method.scheme = InitScheme::Random;
  else if (a.init == "greedy") method.scheme = InitScheme::Greedy;
  else {
    method.scheme = InitScheme::Policy;
    method.params = load_params(a.params);
  }

  GaConfig ga;
  ga.seed = derive_seed(g.seed, 3);
  const auto start = std::chrono::steady_clock::now();
  const SeedSet seeds = make_seeds(inst, method, ga, g.seed);
  const double init_s =
      a.max_iterations ? 0.0 : std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log(Level::Info, "init " + seeds.outcome + " with " + std::to_string(seeds.solutions.size()) + " seeds in " +
                       std::to_string(init_s) + " s");

  RunLimits limits{std::max(a.budget - init_s, 1e-3), a.max_iterations};
  if (a.max_iterations) limits.time_budget_s = a.budget;
  const RunTrace trace = run(inst, ga, seeds.solutions, limits);
  for (const RejectedSeed& r : trace.rejected)
    log(Level::Warn, "seed " + std::to_string(r.index) + " rejected: " + r.reason);

  std::ostringstream csv;
  write_trace_csv_header(csv);
  write_trace_csv(csv, trace, inst.id, a.init, g.seed);
  write_text(resolve(g, a.trace), csv.str());

  const std::optional<Solution>& result = trace.best ? trace.best : trace.fewest_routes;
  if (!result) {
    log(Level::Warn, "no capacity-feasible solution found");
    return 2;
  }
  save_solution(*result, inst.id, resolve(g, a.solution));
  log(Level::Info, "cost " + std::to_string(result->cost) + " with " + std::to_string(result->route_count()) +
                       " routes" + (trace.best ? "" : " (over the vehicle budget)"));
  return trace.best ? 0 : 2;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string instances;
  std::string methods;
  double budget = 0.0;
  std::optional<long> max_iterations;
  std::vector<double> checkpoints;
  int jobs = 1;
  std::string out = "bench";
};

std::vector<Instance> load_instance_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path& p = entry.path();
    if (!entry.is_regular_file() || p.filename() == "manifest.json") continue;
    if (p.extension() == ".json" || p.extension() == ".vrp") files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  std::vector<Instance> out;
  for (const fs::path& p : files) out.push_back(read_any_instance(p));
  if (out.empty()) throw Error("no instance files in " + dir.string());
  return out;
}

int run_bench(const Global& g, const BenchArgs& a) {
  const std::vector<Instance> instances = load_instance_dir(a.instances);
  const std::vector<MethodSpec> methods = load_methods(a.methods);
  MatrixConfig cfg;
  cfg.total_budget_s = a.budget;
  cfg.max_iterations = a.max_iterations;
  if (!a.checkpoints.empty()) cfg.checkpoints = a.checkpoints;
  cfg.seed = g.seed;
  cfg.jobs = a.jobs;
  log(Level::Info, std::to_string(instances.size()) + " instances x " + std::to_string(methods.size()) +
                       " methods, " + std::to_string(a.budget) + " s each");
  const std::vector<RunRecord> records = run_matrix(instances, methods, cfg);

  const fs::path dir = resolve(g, a.out);
  std::ostringstream csv;
  write_records_csv(csv, records);
  write_text(dir / "records.csv", csv.str());
  int failures = 0;
  for (const RunRecord& r : records)
    if (!r.error.empty()) {
      ++failures;
      log(Level::Error, r.instance_id + " / " + r.method + ": " + r.error);
    } else {
      log(Level::Debug, r.instance_id + " / " + r.method + ": init " + r.init_outcome);
    }
  log(Level::Info, "records written to " + (dir / "records.csv").string());
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::string records;
  std::string out = "report";
  std::string baseline = "random";
  int resamples = 10000;
  double ci = 0.95;
};

int run_report(const Global& g, const ReportArgs& a) {
  const fs::path file = fs::path(a.records) / "records.csv";
  if (!fs::exists(file)) throw Error("no records.csv in " + a.records);
  std::ifstream in(file, std::ios::binary);
  const std::vector<RunRecord> records = read_records_csv(in);
  if (records.empty()) throw Error(file.string() + " holds no records");
  ReportSpec spec;
  spec.baseline = a.baseline;
  spec.resamples = a.resamples;
  spec.ci_level = a.ci;
  spec.seed = g.seed;
  const BenchReport rep = report(records, spec);
  write_report(rep, resolve(g, a.out));
  for (const GapRow& row : rep.gap_curve)
    std::cout << row.method << " @" << csv::format_double(row.checkpoint_s)
              << "s mean gap " << csv::format_optional(row.mean_gap) << " (n=" << row.n_used << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Warm-started CVRP solving: instance generation, policy training and benchmarking"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  if (const char* env = std::getenv("WARMVRP_OUT_DIR")) g.out_dir = env;
  if (g.out_dir.empty()) g.out_dir = ".";
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out-dir", g.out_dir, "Output directory (default $WARMVRP_OUT_DIR or .)");
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate benchmark instances and a manifest");
  gen_cmd->add_option("--dist", gen.dist)->required()->check(CLI::IsMember({"uniform", "clustered"}));
  gen_cmd->add_option("--n", gen.n, "Customers per instance")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--count", gen.count)->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--capacity-rule", gen.capacity_rule, "uniform: fixed:Q or range:LOW-HIGH");
  gen_cmd->add_option("--clusters", gen.clusters, "clustered: cluster count (0 = by size)");
  gen_cmd->add_option("--spread", gen.spread, "clustered: cluster spread (0 = 3% of the side)");
  gen_cmd->add_option("--asymmetry", gen.asymmetry, "clustered: cost asymmetry factor");
  gen_cmd->add_option("--detour-noise", gen.detour_noise, "clustered: detour noise");
  gen_cmd->add_option("--capacity", gen.clustered_capacity, "clustered: vehicle capacity");
  gen_cmd->add_option("--probe-iterations", gen.probe_iterations, "GA probe length for the vehicle budget");
  gen_cmd->add_flag("--no-budget", gen.no_budget, "Leave the vehicle budget unassigned");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train policy parameters");
  train_cmd->add_option("--config", tr.config, "Training config JSON")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Params file (relative to --out-dir)");
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  SolveArgs sv;
  auto* solve_cmd = app.add_subcommand("solve", "Solve one instance");
  solve_cmd->add_option("--instance", sv.instance)->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--init", sv.init)->required()->check(CLI::IsMember({"random", "greedy", "policy"}));
  auto* params_opt = solve_cmd->add_option("--params", sv.params, "Policy params (required for --init policy)")
                         ->check(CLI::ExistingFile);
  solve_cmd->add_option("--budget", sv.budget, "Total seconds, init included")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--max-iterations", sv.max_iterations, "Deterministic iteration budget");
  solve_cmd->add_option("--trace", sv.trace);
  solve_cmd->add_option("--solution", sv.solution);
  solve_cmd->add_option("--candidates", sv.candidates)->check(CLI::PositiveNumber);
  solve_cmd->add_option("--temperature", sv.temperature)->check(CLI::PositiveNumber);

  BenchArgs bn;
  auto* bench_cmd = app.add_subcommand("bench", "Run the method x instance matrix");
  bench_cmd->add_option("--instances", bn.instances)->required()->check(CLI::ExistingDirectory);
  bench_cmd->add_option("--methods", bn.methods)->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--budget", bn.budget, "Total seconds per run")->required()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--max-iterations", bn.max_iterations, "Deterministic iteration budget");
  bench_cmd->add_option("--checkpoints", bn.checkpoints, "Checkpoint times in seconds")->delimiter(',');
  bench_cmd->add_option("--jobs", bn.jobs)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", bn.out, "Records directory (relative to --out-dir)");

  ReportArgs rp;
  auto* report_cmd = app.add_subcommand("report", "Summarize persisted records");
  report_cmd->add_option("--records", rp.records, "Directory holding records.csv")->required();
  report_cmd->add_option("--out", rp.out, "Report directory (relative to --out-dir)");
  report_cmd->add_option("--baseline", rp.baseline);
  report_cmd->add_option("--resamples", rp.resamples)->check(CLI::PositiveNumber);
  report_cmd->add_option("--ci", rp.ci)->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
    if (solve_cmd->parsed() && sv.init == "policy" && params_opt->count() == 0)
      throw CLI::RequiredError("--params (with --init policy)");
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  g.seed_given = seed_opt->count() > 0;
  g_level = g.log_level == "error" ? Level::Error
            : g.log_level == "warn" ? Level::Warn
            : g.log_level == "debug" ? Level::Debug
                                     : Level::Info;

  try {
    if (gen_cmd->parsed()) return run_gen(g, gen);
    if (train_cmd->parsed()) return run_train(g, tr);
    if (solve_cmd->parsed()) return run_solve(g, sv);
    if (bench_cmd->parsed()) return run_bench(g, bn);
    if (report_cmd->parsed()) return run_report(g, rp);
  } catch (const std::exception& e) {
    log(Level::Error, e.what());
    return 1;
  }
  return 1;
}
