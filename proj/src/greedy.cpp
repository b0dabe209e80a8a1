#include "warmvrp/greedy.hpp"

#include <limits>

namespace warmvrp {

Solution greedy_construct(const Instance& instance, Rng* rng, double tie_noise) {
  const int n = instance.n_nodes();
  const bool noisy = rng != nullptr && tie_noise > 0.0;
  std::vector<char> visited(n, 0);
  int remaining = instance.n_customers();
  Routes routes;
  Route current_route;
  int current = 0;
  std::int64_t free_capacity = instance.capacity;

  while (remaining > 0) {
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int c = 1; c < n; ++c) {
      if (visited[c] || instance.demands[c] > free_capacity) continue;
      double cost = instance.cost(current, c);
      if (noisy) cost *= 1.0 + rng->uniform() * tie_noise;
      if (cost < best_cost) {
        best_cost = cost;
        best = c;
      }
    }
    if (best < 0) {
      // Nothing fits: close the route. Since d_i <= Q, an empty route always
      // accepts the next customer.
      routes.push_back(std::move(current_route));
      current_route.clear();
      current = 0;
      free_capacity = instance.capacity;
      continue;
    }
    visited[best] = 1;
    --remaining;
    current_route.push_back(best);
    free_capacity -= instance.demands[best];
    current = best;
  }
  if (!current_route.empty()) routes.push_back(std::move(current_route));
  return evaluate(instance, std::move(routes));
}

}  // namespace warmvrp
