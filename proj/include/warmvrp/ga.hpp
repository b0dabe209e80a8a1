#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warmvrp/core.hpp"
#include "warmvrp/local_search.hpp"
#include "warmvrp/rng.hpp"

namespace warmvrp {

/// Permutation of customers 1..N-1.
using GiantTour = std::vector<int>;

/// Optimal partition of `tour` into consecutive capacity-feasible routes
/// (shortest path over the segment DAG, directed costs). With `route_limit`
/// the layered variant keeps at most that many routes; std::nullopt means no
/// partition exists under the limit.
std::optional<Solution> split(const Instance& instance, std::span<const int> tour,
                              std::optional<int> route_limit = std::nullopt);

/// Concatenation of the non-empty routes in their stored order.
GiantTour encode(const Solution& solution);

/// Order crossover: copies p1[cut_i, cut_j) and fills the remaining positions
/// cyclically from cut_j with p2's customers in p2's cyclic order from cut_j.
GiantTour ox_crossover(std::span<const int> p1, std::span<const int> p2, int cut_i, int cut_j);

/// Undirected adjacencies (depot at both tour ends) present in t1 but not t2.
int broken_pairs_distance(std::span<const int> t1, std::span<const int> t2);

struct Individual {
  GiantTour tour;
  Solution solution;
  double penalized_cost = 0.0;
  double biased_fitness = 0.0;
  long birth = 0;  // insertion counter, for deterministic tie-breaks
};

struct GaConfig {
  int population_min = 12;   // mu
  int generation_size = 20;  // lambda
  double elite_fraction = 0.3;
  double diversity_weight = 0.5;
  int n_closest = 3;
  int granularity = 20;
  double penalty_initial = 1.0;  // multiple of the mean depot round trip
  double penalty_increase = 1.2;
  double penalty_decrease = 0.85;
  double target_feasible = 0.2;
  int penalty_window = 50;
  long move_cap = kDefaultMoveCap;
  std::uint64_t seed = 0;
  std::vector<double> checkpoint_times;
};

void validate(const GaConfig& config);

/// cost + load_penalty * total excess load + route_penalty * max(0, routes - K).
double penalized_cost(const Instance& instance, const Solution& solution, double route_penalty,
                      double load_penalty);

/// Rank by penalized cost plus diversity_weight times rank by mean
/// broken-pairs distance to the n_closest peers (most diverse ranks 0).
/// Lower is better; ties go to the earlier element.
std::vector<double> biased_fitness(std::span<const Individual> population, double diversity_weight,
                                   int n_closest = 3);

struct RejectedSeed {
  int index;
  std::string reason;
};

struct TracePoint {
  double elapsed_s = 0.0;
  std::optional<double> best_cost;  // best feasible cost so far
  int routes = 0;
  bool feasible = false;
};

struct RunTrace {
  std::vector<TracePoint> points;  // one per reached checkpoint, then the final point
  TracePoint after_init;
  std::optional<Solution> best;           // best feasible (route count <= K)
  std::optional<Solution> fewest_routes;  // capacity-feasible, fewest routes then cost
  std::vector<RejectedSeed> rejected;
  long iterations = 0;
  double elapsed_s = 0.0;
};

/// Steady-state hybrid genetic search. Single-threaded; owns all of its state.
class GeneticSearch {
 public:
  using Clock = std::chrono::steady_clock;

  GeneticSearch(const Instance& instance, GaConfig config);

  /// Validates, educates and inserts each seed; rejected ones are reported.
  std::vector<RejectedSeed> inject_initials(std::span<const Solution> seeds);

  /// Adds educated random-permutation individuals until the population holds
  /// `target` members or `should_stop` returns true.
  template <typename StopFn>
  void fill_random(int target, StopFn&& should_stop) {
    while (static_cast<int>(population_.size()) < target && !should_stop()) add_random();
  }
  void fill_random(int target) {
    fill_random(target, [] { return false; });
  }

  /// Produces, educates and inserts one offspring.
  void step();

  const std::vector<Individual>& population() const noexcept { return population_; }
  const std::optional<Solution>& best_feasible() const noexcept { return best_; }
  const std::optional<Solution>& fewest_routes() const noexcept { return fewest_routes_; }
  double route_penalty() const noexcept { return route_penalty_; }
  long offspring_count() const noexcept { return offspring_; }
  const Instance& instance() const noexcept { return *instance_; }
  const GaConfig& config() const noexcept { return config_; }

  /// Individual from a capacity-feasible solution: encoded, then re-split
  /// under the route limit when that is no worse.
  Individual make_individual(Solution educated);

  /// Split with the vehicle budget, falling back to an unbounded split.
  Solution decode(std::span<const int> tour) const;

 private:
  void add_random();
  void insert(Individual individual);
  void survivor_selection();
  void adapt_penalty();
  void record(const Solution& solution);
  const Individual& tournament();

  const Instance* instance_;
  GaConfig config_;
  NeighborLists neighbors_;
  Rng rng_;
  double route_penalty_ = 0.0;
  double load_penalty_ = 0.0;
  std::vector<Individual> population_;
  std::optional<Solution> best_;
  std::optional<Solution> fewest_routes_;
  long births_ = 0;
  long offspring_ = 0;
  int window_feasible_ = 0;
  int window_count_ = 0;
};

/// Runs the search from `init` seeds until the time budget (or the iteration
/// override) is used up, recording the incumbent at every checkpoint.
///
/// In iteration-bounded mode the clock is virtual:
/// elapsed = time_budget * iterations / max_iterations, so traces depend only
/// on the seed.
RunTrace run(const Instance& instance, const GaConfig& config, std::span<const Solution> init,
             const RunLimits& limits);

void write_trace_csv_header(std::ostream& out);
void write_trace_csv(std::ostream& out, const RunTrace& trace, const std::string& instance_id,
                     const std::string& method, std::uint64_t seed);

}  // namespace warmvrp
