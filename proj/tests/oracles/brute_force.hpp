#pragma once

// Exhaustive reference solvers used only by tests.

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "warmvrp/core.hpp"

namespace oracle {

using warmvrp::Instance;
using warmvrp::Route;
using warmvrp::Routes;

/// Cheapest visiting order of one customer group (all permutations).
inline Route best_order(const Instance& inst, Route group) {
  std::sort(group.begin(), group.end());
  Route best = group;
  double best_cost = warmvrp::route_cost(inst, group);
  while (std::next_permutation(group.begin(), group.end())) {
    const double c = warmvrp::route_cost(inst, group);
    if (c < best_cost) {
      best_cost = c;
      best = group;
    }
  }
  return best;
}

/// Optimal CVRP cost with at most `max_routes` routes, by enumerating every
/// set partition of the customers (restricted growth strings) and solving
/// each part as a TSP. std::nullopt when no partition fits.
inline std::optional<double> optimal_cost(const Instance& inst, int max_routes) {
  const int n = inst.n_customers();
  if (n == 0) return 0.0;
  std::vector<int> label(n, 0);
  std::optional<double> best;
  std::function<void(int, int)> recurse = [&](int i, int groups) {
    if (i == n) {
      Routes routes(groups);
      for (int c = 0; c < n; ++c) routes[label[c]].push_back(c + 1);
      for (const Route& r : routes)
        if (warmvrp::route_load(inst, r) > inst.capacity) return;
      for (Route& r : routes) r = best_order(inst, r);
      const double cost = warmvrp::total_cost(inst, routes);
      if (!best || cost < *best) best = cost;
      return;
    }
    for (int g = 0; g <= groups && g < max_routes; ++g) {
      label[i] = g;
      recurse(i + 1, std::max(groups, g + 1));
    }
  };
  recurse(0, 0);
  return best;
}

/// Minimum cost over all contiguous segmentations of `tour` into
/// capacity-feasible routes (2^(n-1) cut masks), optionally limited in count.
inline std::optional<double> best_segmentation(const Instance& inst, std::span<const int> tour,
                                               std::optional<int> route_limit = std::nullopt) {
  const int n = static_cast<int>(tour.size());
  if (n == 0) return 0.0;
  std::optional<double> best;
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    Routes routes(1);
    for (int i = 0; i < n; ++i) {
      routes.back().push_back(tour[i]);
      if (i + 1 < n && (mask >> i & 1u)) routes.emplace_back();
    }
    if (route_limit && static_cast<int>(routes.size()) > *route_limit) continue;
    bool fits = true;
    for (const Route& r : routes) fits = fits && warmvrp::route_load(inst, r) <= inst.capacity;
    if (!fits) continue;
    const double cost = warmvrp::total_cost(inst, routes);
    if (!best || cost < *best) best = cost;
  }
  return best;
}

/// Fewest routes of any capacity-feasible partition (bin packing by enumeration).
inline int min_routes(const Instance& inst) {
  const int n = inst.n_customers();
  for (int k = 1; k <= n; ++k) {
    std::vector<std::int64_t> bins(k, 0);
    std::function<bool(int)> place = [&](int i) {
      if (i > n) return true;
      for (int b = 0; b < k; ++b) {
        if (bins[b] + inst.demands[i] > inst.capacity) continue;
        bins[b] += inst.demands[i];
        if (place(i + 1)) return true;
        bins[b] -= inst.demands[i];
        if (bins[b] == 0) break;  // empty bins are interchangeable
      }
      return false;
    };
    if (place(1)) return k;
  }
  return n;
}

}  // namespace oracle
