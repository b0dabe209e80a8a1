#pragma once

#include "warmvrp/core.hpp"
#include "warmvrp/rng.hpp"

namespace warmvrp {

/// Nearest feasible neighbour construction on directed costs c(current, next).
///
/// A route is closed only when no unvisited customer fits the remaining
/// capacity. Without `rng` (or with tie_noise == 0) the result is fully
/// deterministic, ties going to the lowest customer index. With noise each
/// candidate cost is scaled by (1 + u * tie_noise), u ~ U[0, 1).
Solution greedy_construct(const Instance& instance, Rng* rng = nullptr, double tie_noise = 0.0);

}  // namespace warmvrp
