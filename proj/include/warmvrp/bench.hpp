#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "warmvrp/core.hpp"
#include "warmvrp/ga.hpp"
#include "warmvrp/policy.hpp"

namespace warmvrp {

enum class InitScheme { Random, Greedy, Policy };

struct MethodSpec {
  std::string name;
  InitScheme scheme = InitScheme::Random;
  std::optional<PolicyParams> params;  // required for Policy
  int candidates = 8;
  double temperature = 1.0;
};

/// Reads {"methods": [{"name": ..., "init": "random|greedy|policy", "params": path}]};
/// relative params paths resolve against `base_dir`.
std::vector<MethodSpec> load_methods(const std::filesystem::path& path);
std::vector<MethodSpec> methods_from_json_text(const std::string& text,
                                               const std::filesystem::path& base_dir = {});

struct SeedSet {
  std::vector<Solution> solutions;
  std::string outcome;  // "random", "greedy" or the policy InitKind
};

/// Initial solutions for `method`; education uses the GA's granularity and move cap.
SeedSet make_seeds(const Instance& instance, const MethodSpec& method, const GaConfig& ga, std::uint64_t seed);

inline const std::vector<double> kDefaultCheckpoints{0.25, 0.5, 1, 2, 4, 8, 16, 32};

struct MatrixConfig {
  double total_budget_s = 1.0;
  std::optional<long> max_iterations;  // deterministic mode; init time then counts as 0
  std::vector<double> checkpoints = kDefaultCheckpoints;
  std::uint64_t seed = 0;
  GaConfig ga;  // seed and checkpoint_times are set per run
  int jobs = 1;
};

/// One point of a run on the total-budget time axis (init time included).
struct RecordPoint {
  double checkpoint_s = 0.0;
  std::optional<double> cost;  // best feasible cost, absent if none yet
  int routes = 0;
  bool feasible = false;
};

struct RunRecord {
  std::string instance_id;
  std::string method;
  std::uint64_t seed = 0;
  double budget_s = 0.0;
  double init_time_s = 0.0;
  double ga_elapsed_s = 0.0;
  std::vector<RecordPoint> points;  // configured checkpoints <= budget, then the final point
  std::string init_outcome;
  std::string error;  // non-empty when the run failed
};

/// Seed of one (instance, method) cell.
std::uint64_t cell_seed(std::uint64_t matrix_seed, const std::string& instance_id,
                        const std::string& method);

/// Runs every (instance, method) cell. The GA gets the budget left after seed
/// generation; a failing cell is recorded with its error and does not stop
/// the matrix.
std::vector<RunRecord> run_matrix(std::span<const Instance> instances, std::span<const MethodSpec> methods,
                                  const MatrixConfig& config);

/// Incumbent feasible cost at the last point <= checkpoint.
std::optional<double> cost_at(const RunRecord& record, double checkpoint);

void write_records_csv(std::ostream& out, std::span<const RunRecord> records);
std::vector<RunRecord> read_records_csv(std::istream& in);

/// Minimum feasible cost over every record and point of the instance.
std::optional<double> best_known(std::span<const RunRecord> records, const std::string& instance_id);

class NonPositiveBest : public Error {
 public:
  using Error::Error;
};

/// (cost - best) / best.
double gap(double cost, double best);

struct GapPoint {
  std::string method;
  double checkpoint_s = 0.0;
  std::optional<double> mean_gap;  // absent on an empty intersection
  std::vector<double> gaps;        // per instance of the intersection, in instance order
  std::vector<std::string> instances;
};

/// Mean gap per (method, checkpoint) over the instances on which every method
/// of `methods` has a feasible solution at that checkpoint.
std::vector<GapPoint> mean_gap_curve(std::span<const RunRecord> records, std::span<const std::string> methods,
                                     std::span<const double> checkpoints);

/// Percentile bootstrap of the mean.
std::pair<double, double> bootstrap_ci(std::span<const double> samples, double level = 0.95,
                                       int resamples = 10000, std::uint64_t seed = 0);

class NoDecisive : public Error {
 public:
  using Error::Error;
};

struct WinRatio {
  double ratio = 0.0;
  int decisive = 0;
  int a_wins = 0;
  int b_wins = 0;
  int ties = 0;
};

/// Hierarchical per-instance comparison at a checkpoint; ties excluded.
/// Throws NoDecisive when every instance ties.
WinRatio win_ratio(std::span<const RunRecord> records, const std::string& method_a,
                   const std::string& method_b, double checkpoint);

/// One-sided sign test: P(X >= wins) for X ~ Binomial(decisive, 1/2).
double sign_test_p(int wins, int decisive);

struct ReportSpec {
  std::vector<std::string> methods;  // empty: every method in the records, first-seen order
  std::vector<double> checkpoints;   // empty: every configured checkpoint in the records
  std::string baseline = "random";
  double ci_level = 0.95;
  int resamples = 10000;
  std::uint64_t seed = 0;
};

struct GapRow {
  std::string method;
  double checkpoint_s;
  std::optional<double> mean_gap, ci_low, ci_high;
  int n_used;
};

struct WinRow {
  std::string method_a, method_b;
  double checkpoint_s;
  std::optional<WinRatio> result;  // absent when no instance is decisive
  std::optional<double> p_value;
};

struct ScatterRow {
  std::string instance_id, method, baseline;
  double checkpoint_s;
  std::optional<double> cost, baseline_cost;
};

struct FeasibilityRow {
  std::string method;
  double checkpoint_s;
  double rate;
  int n_instances;
};

struct BenchReport {
  std::vector<GapRow> gap_curve;
  std::vector<WinRow> win_ratios;
  std::vector<ScatterRow> scatter;
  std::vector<FeasibilityRow> feasibility;
};

BenchReport report(std::span<const RunRecord> records, const ReportSpec& spec = {});

/// Writes gap_curve.csv, win_ratio.csv, scatter.csv and feasibility.csv.
void write_report(const BenchReport& report, const std::filesystem::path& dir);

}  // namespace warmvrp
