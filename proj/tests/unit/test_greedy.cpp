#include <doctest.h>

#include "fixtures.hpp"
#include "warmvrp/greedy.hpp"
#include "warmvrp/instances.hpp"

using namespace warmvrp;

TEST_CASE("greedy on the line visits customers outward") {
  const Instance inst = fixtures::line3({0, 1, 1, 1}, 10);
  const Solution s = greedy_construct(inst);
  CHECK(s.routes == Routes{{1, 2, 3}});
  CHECK(s.cost == doctest::Approx(6.0));
}

TEST_CASE("greedy opens a new route when nothing fits") {
  // Both customers at equal distance from the depot: index tie-break.
  const Instance inst = fixtures::point_instance({{0, 0}, {1, 0}, {-1, 0}}, {0, 6, 6}, 6);
  CHECK(greedy_construct(inst).routes == Routes{{1}, {2}});
}

TEST_CASE("greedy with one customer") {
  const Instance inst = fixtures::matrix_instance({0, 3}, 5, {{0, 2}, {7, 0}});
  const Solution s = greedy_construct(inst);
  CHECK(s.routes == Routes{{1}});
  CHECK(s.cost == 9.0);
}

TEST_CASE("greedy uses directed costs from the current node") {
  // c(0,2) < c(0,1) but from 2 the only way is 1.
  const Instance inst = fixtures::matrix_instance({0, 1, 1}, 10, {{0, 5, 1}, {1, 0, 9}, {9, 2, 0}});
  CHECK(greedy_construct(inst).routes == Routes{{2, 1}});
}

TEST_CASE("greedy properties") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    UniformGenConfig cfg;
    cfg.n_customers = 1 + static_cast<int>(seed % 60);
    cfg.capacity_rule = CapacityRange{10, 30};
    cfg.seed = seed;
    const Instance inst = gen_uniform(cfg);
    const Solution s = greedy_construct(inst);
    CHECK(covers_all_customers(inst, s.routes));
    for (const Route& r : s.routes) CHECK(route_load(inst, r) <= inst.capacity);
    CHECK(s.route_count() >= vehicle_lower_bound(inst));
    CHECK(greedy_construct(inst).routes == s.routes);

    Rng rng(seed);
    const Solution noisy = greedy_construct(inst, &rng, 0.3);
    CHECK(covers_all_customers(inst, noisy.routes));
  }
}
