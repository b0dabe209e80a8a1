#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace warmvrp {

using CostMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

/// A route lists customer indices; the depot (node 0) is implicit at both ends.
using Route = std::vector<int>;
using Routes = std::vector<Route>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidNode : public Error {
 public:
  explicit InvalidNode(int node);
  int node() const noexcept { return node_; }

 private:
  int node_;
};

class InvalidInstance : public Error {
 public:
  using Error::Error;
};

/// CVRP instance. Node 0 is the depot, nodes 1..n_nodes()-1 are customers.
struct Instance {
  std::string id;
  std::vector<int> demands;  // demands[0] == 0
  int capacity = 0;
  int vehicle_budget = 0;  // 0 means "not assigned yet"
  CostMatrix cost;
  std::optional<Coords> coords;

  int n_nodes() const noexcept { return static_cast<int>(demands.size()); }
  int n_customers() const noexcept { return n_nodes() > 0 ? n_nodes() - 1 : 0; }
  bool has_budget() const noexcept { return vehicle_budget > 0; }
  std::int64_t total_demand() const noexcept;

  bool operator==(const Instance& other) const;
};

/// Throws InvalidInstance naming the first broken invariant.
void validate(const Instance& instance);

struct Solution {
  Routes routes;
  double cost = 0.0;
  bool feasible = false;

  /// Number of non-empty routes.
  int route_count() const noexcept;
};

enum class ViolationKind { MissingCustomer, DuplicateCustomer, CapacityExceeded, TooManyRoutes };

struct Violation {
  ViolationKind kind;
  int customer = -1;       // Missing/Duplicate
  int route = -1;          // CapacityExceeded (and the route of a duplicate visit)
  std::int64_t load = 0;   // CapacityExceeded
  int count = 0;           // TooManyRoutes

  bool operator==(const Violation&) const = default;
};

struct FeasibilityReport {
  bool ok = true;
  std::vector<Violation> violations;
};

std::string to_string(const Violation& v);

double route_cost(const Instance& instance, std::span<const int> route);

/// Route sum of demands. Does not validate indices.
std::int64_t route_load(const Instance& instance, std::span<const int> route);

/// Total travel cost of a set of routes.
///
/// Edge costs are summed in ascending order so that two solutions using the
/// same multiset of edges (e.g. a route and its reversal on a symmetric
/// matrix, or the same routes listed in another order) get bit-identical
/// totals. Tie detection in comparisons relies on this.
double total_cost(const Instance& instance, const Routes& routes);

FeasibilityReport check_feasible(const Instance& instance, const Routes& routes);

Solution evaluate(const Instance& instance, Routes routes);

/// Drops empty routes.
Solution finalize(const Instance& instance, Routes routes);

/// max(1, ceil(total demand / capacity)) when customers exist, else 0.
int vehicle_lower_bound(const Instance& instance);

/// Feasibility first, then cost. `less` means `a` is preferred.
std::weak_ordering hierarchical_compare(const std::optional<Solution>& a,
                                        const std::optional<Solution>& b);

/// Same rule on (feasible, cost) summaries; absent or infeasible ranks last.
std::weak_ordering hierarchical_compare(std::optional<double> a_feasible_cost,
                                        std::optional<double> b_feasible_cost);

/// Wall-clock budget with an optional iteration override (deterministic mode).
struct RunLimits {
  double time_budget_s = 1.0;
  std::optional<long> max_iterations;
};

/// True when every customer appears exactly once and all indices are valid.
bool covers_all_customers(const Instance& instance, const Routes& routes);

}  // namespace warmvrp
