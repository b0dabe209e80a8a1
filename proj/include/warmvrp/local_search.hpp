#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "warmvrp/core.hpp"
#include "warmvrp/rng.hpp"

namespace warmvrp {

/// For every customer, its `granularity` nearest other customers by the
/// outgoing cost c(u, v), ascending, ties by index. Index 0 is unused.
struct NeighborLists {
  int granularity = 0;
  std::vector<std::vector<int>> lists;

  std::span<const int> of(int customer) const { return lists[customer]; }
};

NeighborLists build_neighbors(const Instance& instance, int granularity = 20);

struct MoveOutcome {
  bool applied = false;
  double delta = 0.0;
};

/// Moves below this (negative) delta are considered improving.
inline constexpr double kImprovementEpsilon = 1e-9;

/// Mutable route set the move operators act on. Routes may become empty;
/// they are dropped only when the solution is released.
class RouteState {
 public:
  RouteState(const Instance& instance, Routes routes);

  const Instance& instance() const noexcept { return *instance_; }
  const Routes& routes() const noexcept { return routes_; }
  int route_count() const noexcept { return static_cast<int>(routes_.size()); }
  const Route& route(int r) const { return routes_[r]; }

  int route_of(int customer) const { return route_of_[customer]; }
  int position_of(int customer) const { return position_of_[customer]; }
  std::int64_t load(int r) const { return loads_[r]; }
  double cost(int r) const { return costs_[r]; }

  /// Sum of cached per-route costs (maintained incrementally by the moves).
  double cached_cost() const noexcept { return cached_cost_; }

  /// Node at `position` of route r. Positions -1 and size() are the depot.
  int node_at(int r, int position) const;

  void set_route(int r, Route route);

  Solution to_solution() const;

 private:
  void reindex(int r);

  const Instance* instance_;
  Routes routes_;
  std::vector<int> route_of_;
  std::vector<int> position_of_;
  std::vector<std::int64_t> loads_;
  std::vector<double> costs_;
  double cached_cost_ = 0.0;
};

/// Insertion point: right after `position` in `route` (-1 = after the depot).
struct Anchor {
  int route;
  int position;
};

inline Anchor after_node(const RouteState& state, int customer) {
  return {state.route_of(customer), state.position_of(customer)};
}
inline Anchor before_node(const RouteState& state, int customer) {
  return {state.route_of(customer), state.position_of(customer) - 1};
}
inline Anchor route_start(int route) { return {route, -1}; }

/// Move customer u to the slot after `at`.
MoveOutcome relocate(RouteState& state, int u, Anchor at);

/// Exchange customers u and v.
MoveOutcome swap(RouteState& state, int u, int v);

/// Move the segment of `length` (2 or 3) customers starting at u, orientation kept.
MoveOutcome or_opt(RouteState& state, int u, int length, Anchor at);

/// Reverse the segment strictly after `from` up to and including customer v
/// (same route). Cost of the reversed segment is recomputed in full, so
/// asymmetric matrices are handled exactly.
MoveOutcome two_opt_intra(RouteState& state, Anchor from, int v);

/// Exchange the tails following `a` and `b`, which must lie in different routes.
MoveOutcome two_opt_star(RouteState& state, Anchor a, Anchor b);

struct EducateStats {
  long moves_applied = 0;
  int passes = 0;
};

/// First-improvement descent over all operators restricted to granular
/// neighbours, scanning customers in a random order. Stops after a pass with
/// no improvement or after `move_cap` applied moves.
///
/// Requires each customer exactly once and every route within capacity.
/// Never increases cost or route count.
Solution educate(const Instance& instance, const Solution& solution,
                 const NeighborLists& neighbors, long move_cap, Rng& rng,
                 EducateStats* stats = nullptr);

inline constexpr long kDefaultMoveCap = 1'000'000;

}  // namespace warmvrp
