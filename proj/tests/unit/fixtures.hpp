#pragma once

#include <initializer_list>
#include <utility>
#include <vector>

#include "warmvrp/core.hpp"

namespace fixtures {

/// Instance from explicit demands (depot first) and a full cost matrix.
inline warmvrp::Instance matrix_instance(std::vector<int> demands, int capacity,
                                         std::initializer_list<std::initializer_list<double>> rows,
                                         int budget = 0) {
  warmvrp::Instance inst;
  inst.id = "fixture";
  inst.demands = std::move(demands);
  inst.capacity = capacity;
  inst.vehicle_budget = budget;
  const int n = static_cast<int>(rows.size());
  inst.cost.resize(n, n);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) inst.cost(i, j++) = v;
    ++i;
  }
  return inst;
}

/// Euclidean instance from points (depot first).
inline warmvrp::Instance point_instance(std::vector<std::pair<double, double>> points,
                                        std::vector<int> demands, int capacity, int budget = 0) {
  warmvrp::Instance inst;
  inst.id = "points";
  inst.demands = std::move(demands);
  inst.capacity = capacity;
  inst.vehicle_budget = budget;
  const int n = static_cast<int>(points.size());
  warmvrp::Coords xy(n, 2);
  for (int i = 0; i < n; ++i) xy.row(i) << points[i].first, points[i].second;
  inst.cost.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) inst.cost(i, j) = (xy.row(i) - xy.row(j)).norm();
  inst.coords = xy;
  return inst;
}

/// Depot at x=0, customers at x=1,2,3 on a line.
inline warmvrp::Instance line3(std::vector<int> demands, int capacity, int budget = 0) {
  return point_instance({{0, 0}, {1, 0}, {2, 0}, {3, 0}}, std::move(demands), capacity, budget);
}

}  // namespace fixtures
