#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "../oracles/brute_force.hpp"
#include "fixtures.hpp"
#include "warmvrp/ga.hpp"
#include "warmvrp/greedy.hpp"
#include "warmvrp/instances.hpp"

using namespace warmvrp;

namespace {

GiantTour random_tour(int n, Rng& rng) {
  GiantTour t(n);
  std::iota(t.begin(), t.end(), 1);
  rng.shuffle(std::span<int>(t));
  return t;
}

bool is_permutation_of(const GiantTour& t, int n) {
  GiantTour sorted = t;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < n; ++i)
    if (sorted[i] != i + 1) return false;
  return static_cast<int>(t.size()) == n;
}

RunLimits iterations(long n, double budget = 1.0) {
  RunLimits limits;
  limits.time_budget_s = budget;
  limits.max_iterations = n;
  return limits;
}

}  // namespace

TEST_CASE("split examples") {
  SUBCASE("everything fits") {
    const Instance inst = fixtures::line3({0, 1, 1, 1}, 10);
    const auto s = split(inst, GiantTour{1, 2, 3});
    REQUIRE(s);
    CHECK(s->routes == Routes{{1, 2, 3}});
    CHECK(s->cost == *oracle::best_segmentation(inst, GiantTour{1, 2, 3}));
  }
  SUBCASE("capacity forces a cut") {
    const Instance inst = fixtures::line3({0, 4, 4, 4}, 8);
    const auto s = split(inst, GiantTour{1, 2, 3});
    REQUIRE(s);
    // [1],[2,3] costs 2 + 6 = 8; [1,2],[3] costs 4 + 6 = 10.
    CHECK(s->routes == Routes{{1}, {2, 3}});
    CHECK(s->cost == 8.0);
    CHECK(s->cost == *oracle::best_segmentation(inst, GiantTour{1, 2, 3}));
  }
  SUBCASE("route limit") {
    const Instance inst = fixtures::line3({0, 4, 4, 4}, 8);
    CHECK_FALSE(split(inst, GiantTour{1, 2, 3}, 1));
    const auto two = split(inst, GiantTour{1, 2, 3}, 2);
    REQUIRE(two);
    CHECK(two->route_count() == 2);
  }
  SUBCASE("empty tour") {
    const Instance inst = fixtures::point_instance({{0, 0}}, {0}, 5);
    const auto s = split(inst, GiantTour{});
    REQUIRE(s);
    CHECK(s->routes.empty());
  }
}

TEST_CASE("split matches segment enumeration") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    ClusteredGenConfig cfg;
    cfg.n_customers = rng.uniform_int(1, 9);
    cfg.demand_mean = 60000;
    cfg.seed = rng.next();
    const Instance inst = gen_clustered(cfg);
    const GiantTour tour = random_tour(inst.n_customers(), rng);
    const auto s = split(inst, tour);
    REQUIRE(s);
    CHECK(s->cost == *oracle::best_segmentation(inst, tour));
    const int limit = rng.uniform_int(1, inst.n_customers());
    const auto bounded = split(inst, tour, limit);
    const auto expected = oracle::best_segmentation(inst, tour, limit);
    CHECK(bounded.has_value() == expected.has_value());
    if (bounded && expected) {
      CHECK(bounded->cost == *expected);
      CHECK(bounded->route_count() <= limit);
    }
  }
}

TEST_CASE("encode") {
  CHECK(encode(Solution{{{1, 2}, {3}}, 0, true}) == GiantTour{1, 2, 3});
  CHECK(encode(Solution{{{}, {2}, {}, {1, 3}}, 0, true}) == GiantTour{2, 1, 3});
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    UniformGenConfig cfg;
    cfg.n_customers = rng.uniform_int(1, 40);
    cfg.capacity_rule = FixedCapacity{20};
    cfg.seed = rng.next();
    const Instance inst = gen_uniform(cfg);
    const Solution g = greedy_construct(inst);
    const auto back = split(inst, encode(g));
    REQUIRE(back);
    CHECK(back->cost <= g.cost + 1e-9);
  }
}

TEST_CASE("ox_crossover") {
  const GiantTour p1{1, 2, 3, 4, 5}, p2{5, 4, 3, 2, 1};
  CHECK(ox_crossover(p1, p2, 1, 4) == GiantTour{5, 2, 3, 4, 1});
  CHECK(ox_crossover(p1, p1, 1, 3) == p1);
  CHECK(ox_crossover(p1, p2, 0, 5) == p1);
  CHECK_THROWS(ox_crossover(p1, p2, 3, 3));

  Rng rng(77);
  for (int trial = 0; trial < 100000; ++trial) {
    const int n = rng.uniform_int(1, 30);
    const GiantTour a = random_tour(n, rng), b = random_tour(n, rng);
    const int i = rng.uniform_int(0, n - 1);
    const int j = rng.uniform_int(i + 1, n);
    const GiantTour child = ox_crossover(a, b, i, j);
    if (!is_permutation_of(child, n)) {
      FAIL("child is not a permutation");
      break;
    }
  }
}

TEST_CASE("broken_pairs_distance") {
  const GiantTour t{1, 2, 3};
  CHECK(broken_pairs_distance(t, t) == 0);
  CHECK(broken_pairs_distance(t, GiantTour{3, 2, 1}) == 0);
  CHECK(broken_pairs_distance(t, GiantTour{2, 1, 3}) == 2);
  CHECK(broken_pairs_distance(GiantTour{1, 2, 3, 4}, GiantTour{1, 3, 2, 4}) == 2);
}

TEST_CASE("biased_fitness") {
  auto individual = [](GiantTour tour, double cost, long birth) {
    Individual ind;
    ind.tour = std::move(tour);
    ind.penalized_cost = cost;
    ind.birth = birth;
    return ind;
  };
  std::vector<Individual> pop{individual({1, 2, 3, 4}, 30, 0), individual({4, 3, 1, 2}, 10, 1),
                              individual({2, 4, 1, 3}, 20, 2)};
  const auto cost_only = biased_fitness(pop, 0.0);
  CHECK(cost_only == std::vector<double>{2, 0, 1});

  std::vector<Individual> twins{individual({1, 2, 3, 4}, 10, 0), individual({1, 2, 3, 4}, 10, 1),
                                individual({3, 1, 4, 2}, 10, 2)};
  const auto f = biased_fitness(twins, 1.0, 1);
  // Equal costs rank by insertion; the later twin also takes the worst diversity rank.
  CHECK(f == std::vector<double>{1, 3, 2});

  std::vector<Individual> one{individual({1}, 5, 0)};
  CHECK(biased_fitness(one, 0.5) == std::vector<double>{0.0});
}

TEST_CASE("penalized cost of feasible individuals equals cost") {
  const Instance inst = fixtures::line3({0, 4, 4, 4}, 8, 2);
  const Solution ok = evaluate(inst, {{1, 2}, {3}});
  CHECK(penalized_cost(inst, ok, 100.0, 100.0) == ok.cost);
  const Solution over = evaluate(inst, {{1}, {2}, {3}});
  CHECK(penalized_cost(inst, over, 100.0, 100.0) == over.cost + 100.0);
}

TEST_CASE("GaConfig validation") {
  GaConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.population_min = 1;
  CHECK_THROWS(validate(cfg));
  cfg = {};
  cfg.checkpoint_times = {1.0, 1.0};
  CHECK_THROWS(validate(cfg));
}

TEST_CASE("inject_initials") {
  UniformGenConfig ucfg;
  ucfg.n_customers = 30;
  ucfg.seed = 4;
  Instance inst = gen_uniform(ucfg);
  inst.vehicle_budget = 6;
  GaConfig cfg;
  cfg.seed = 1;

  SUBCASE("seeded plus random fill") {
    GeneticSearch ga(inst, cfg);
    std::vector<Solution> seeds;
    Rng rng(3);
    for (int k = 0; k < 8; ++k) seeds.push_back(greedy_construct(inst, &rng, 0.5));
    CHECK(ga.inject_initials(seeds).empty());
    CHECK(ga.population().size() == 8);
    ga.fill_random(cfg.population_min);
    CHECK(ga.population().size() == 12);
  }
  SUBCASE("bad seed is rejected, others kept") {
    GeneticSearch ga(inst, cfg);
    Solution broken = greedy_construct(inst);
    broken.routes.back().pop_back();
    std::vector<Solution> seeds{greedy_construct(inst), broken};
    const auto rejected = ga.inject_initials(seeds);
    REQUIRE(rejected.size() == 1);
    CHECK(rejected[0].index == 1);
    CHECK(ga.population().size() == 1);
  }
  SUBCASE("no seeds") {
    GeneticSearch ga(inst, cfg);
    CHECK(ga.inject_initials({}).empty());
    CHECK(ga.population().empty());
  }
}

TEST_CASE("run produces a monotone anytime trace") {
  ClusteredGenConfig ccfg;
  ccfg.n_customers = 40;
  ccfg.seed = 12;
  Instance inst = gen_clustered(ccfg);
  inst.vehicle_budget = vehicle_lower_bound(inst) + 1;
  GaConfig cfg;
  cfg.seed = 9;
  cfg.checkpoint_times = {0.1, 0.2, 0.4, 0.8};

  const Solution seed = greedy_construct(inst);
  const std::vector<Solution> init{seed};
  const RunTrace trace = run(inst, cfg, init, iterations(400));
  CHECK(trace.points.size() == 5);
  std::optional<double> prev;
  for (const auto& p : trace.points) {
    if (prev) {
      REQUIRE(p.best_cost);
      CHECK(*p.best_cost <= *prev);
    }
    prev = p.best_cost;
  }
  if (seed.feasible) {
    REQUIRE(trace.after_init.best_cost);
    CHECK(*trace.after_init.best_cost <= seed.cost);
    for (const auto& p : trace.points) CHECK(*p.best_cost <= seed.cost);
  }
  REQUIRE(trace.best);
  CHECK(trace.best->feasible);
  CHECK(trace.best->route_count() <= inst.vehicle_budget);
  CHECK(trace.iterations == 400);
}

TEST_CASE("iteration-bounded runs are reproducible") {
  ClusteredGenConfig ccfg;
  ccfg.n_customers = 30;
  ccfg.seed = 2;
  Instance inst = gen_clustered(ccfg);
  inst.vehicle_budget = vehicle_lower_bound(inst) + 1;
  GaConfig cfg;
  cfg.seed = 5;
  cfg.checkpoint_times = {0.25, 0.5};
  auto text = [&] {
    std::ostringstream out;
    write_trace_csv_header(out);
    write_trace_csv(out, run(inst, cfg, {}, iterations(300)), inst.id, "random", cfg.seed);
    return out.str();
  };
  const std::string a = text();
  CHECK(a == text());
  CHECK(a.find("instance_id,method,seed,checkpoint_s,best_cost,routes,feasible") == 0);
}

TEST_CASE("run finds the optimum of a six-customer instance") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    UniformGenConfig cfg;
    cfg.n_customers = 6;
    cfg.capacity_rule = FixedCapacity{15};
    cfg.seed = 100 + s;
    Instance inst = gen_uniform(cfg);
    inst.vehicle_budget = oracle::min_routes(inst);
    GaConfig gcfg;
    gcfg.seed = s;
    const RunTrace trace = run(inst, gcfg, {}, iterations(300));
    REQUIRE(trace.best);
    CHECK(trace.best->cost == *oracle::optimal_cost(inst, inst.vehicle_budget));
  }
}
