#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include "warmvrp/core.hpp"

namespace warmvrp {

struct FixedCapacity {
  int capacity = 50;
};

/// Capacity drawn per instance, uniformly in [low, high].
struct CapacityRange {
  int low = 40;
  int high = 80;
};

using CapacityRule = std::variant<FixedCapacity, CapacityRange>;

struct UniformGenConfig {
  int n_customers = 99;
  int demand_low = 1;
  int demand_high = 9;
  CapacityRule capacity_rule = FixedCapacity{50};
  double square_side = 1.0;
  std::uint64_t seed = 0;
};

/// Clustered customers, an off-cluster depot and a noisy asymmetric cost
/// matrix. Demands are exponential, rounded up and clipped.
struct ClusteredGenConfig {
  int n_customers = 99;
  int n_clusters = 0;          // 0: max(3, n_customers / 25)
  double cluster_spread = 0.0; // <= 0: 3% of square_side
  int depot_pool_size = 50;
  double asymmetry_factor = 0.2;
  double detour_noise = 0.3;
  double demand_mean = 16000.0;
  int demand_clip = 100000;
  int capacity = 160000;
  double square_side = 10.0;
  std::uint64_t seed = 0;
};

void validate(const UniformGenConfig& config);
void validate(const ClusteredGenConfig& config);

Instance gen_uniform(const UniformGenConfig& config);
Instance gen_clustered(const ClusteredGenConfig& config);

/// Seeds for split `s` and item `i`; splits map to disjoint seed ranges.
enum class DataSplit : std::uint64_t { Train = 0, Validation = 1, Test = 2 };
std::uint64_t split_seed(std::uint64_t base, DataSplit split, std::uint64_t index);

enum class BudgetRule { LowerBoundAchieved, BestProbe };

struct BudgetAssignment {
  Instance instance;
  BudgetRule rule = BudgetRule::LowerBoundAchieved;
  int lower_bound = 0;
  int greedy_routes = 0;
  std::optional<int> probe_routes;
};

class NoFeasibleProbe : public Error {
 public:
  using Error::Error;
};

/// K = lower bound if the educated greedy solution or a short GA probe reaches
/// it, otherwise the fewest routes any probe produced.
BudgetAssignment assign_vehicle_budget(const Instance& instance, const RunLimits& probe,
                                       std::uint64_t seed = 0);

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Native JSON document: id, n_nodes, capacity, vehicle_budget (null when
/// unassigned), demands, cost_matrix (full, row-major), optional coords.
std::string to_json_text(const Instance& instance);
Instance instance_from_json_text(const std::string& text);

void save_instance(const Instance& instance, const std::filesystem::path& path);

/// Accepts the native format and the EUC_2D / EXPLICIT subset of the
/// standard CVRP text format (detected by content).
Instance load_instance(const std::filesystem::path& path);
Instance parse_cvrplib(const std::string& text, const std::string& fallback_name = "");

std::string to_json_text(const Solution& solution, const std::string& instance_id);
void save_solution(const Solution& solution, const std::string& instance_id,
                   const std::filesystem::path& path);

/// Returns (instance_id, solution) as stored; cost/feasible are not recomputed.
std::pair<std::string, Solution> load_solution(const std::filesystem::path& path);

/// 64-bit FNV-1a digest of a byte string, hex-encoded.
std::string digest_hex(const std::string& bytes);
std::string file_digest(const std::filesystem::path& path);

}  // namespace warmvrp
