#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "../oracles/brute_force.hpp"
#include "fixtures.hpp"
#include "warmvrp/instances.hpp"
#include "warmvrp/rng.hpp"

using namespace warmvrp;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "warmvrp_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("gen_uniform follows its configuration") {
  UniformGenConfig cfg;
  cfg.n_customers = 99;
  cfg.seed = 7;
  const Instance a = gen_uniform(cfg);
  CHECK(a.n_nodes() == 100);
  CHECK(a.capacity == 50);
  for (int i = 1; i < a.n_nodes(); ++i) {
    CHECK(a.demands[i] >= 1);
    CHECK(a.demands[i] <= 9);
  }
  CHECK(a.demands[0] == 0);
  CHECK(to_json_text(a) == to_json_text(gen_uniform(cfg)));

  cfg.n_customers = 200;
  for (std::uint64_t s = 0; s < 50; ++s) {
    cfg.seed = s;
    cfg.capacity_rule = CapacityRange{40, 80};
    const Instance b = gen_uniform(cfg);
    CHECK(b.capacity >= 40);
    CHECK(b.capacity <= 80);
  }
}

TEST_CASE("generator configs are validated") {
  UniformGenConfig u;
  u.demand_high = 60;
  CHECK_THROWS_AS(gen_uniform(u), Error);
  u = {};
  u.capacity_rule = CapacityRange{5, 80};
  CHECK_THROWS_AS(gen_uniform(u), Error);
  ClusteredGenConfig c;
  c.asymmetry_factor = 0.7;
  CHECK_THROWS_AS(gen_clustered(c), Error);
  c = {};
  c.demand_clip = c.capacity + 1;
  CHECK_THROWS_AS(gen_clustered(c), Error);
}

TEST_CASE("gen_clustered") {
  ClusteredGenConfig cfg;
  cfg.n_customers = 49;
  cfg.seed = 3;

  SUBCASE("zero noise and asymmetry gives a symmetric metric") {
    cfg.asymmetry_factor = 0.0;
    cfg.detour_noise = 0.0;
    const Instance inst = gen_clustered(cfg);
    const int n = inst.n_nodes();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        CHECK(inst.cost(i, j) == inst.cost(j, i));
        CHECK(inst.cost(i, j) == doctest::Approx((inst.coords->row(i) - inst.coords->row(j)).norm()));
        for (int k = 0; k < n; ++k) CHECK(inst.cost(i, j) <= inst.cost(i, k) + inst.cost(k, j) + 1e-12);
      }
  }
  SUBCASE("asymmetry shows up") {
    const Instance inst = gen_clustered(cfg);
    bool asym = false;
    for (int i = 0; i < inst.n_nodes() && !asym; ++i)
      for (int j = 0; j < inst.n_nodes(); ++j) asym = asym || inst.cost(i, j) != inst.cost(j, i);
    CHECK(asym);
  }
  SUBCASE("demand clip") {
    cfg.demand_mean = 16;
    cfg.demand_clip = 100;
    cfg.capacity = 160;
    const Instance inst = gen_clustered(cfg);
    CHECK(*std::max_element(inst.demands.begin(), inst.demands.end()) <= 100);
    CHECK(inst.capacity == 160);
  }
  SUBCASE("deterministic") {
    CHECK(to_json_text(gen_clustered(cfg)) == to_json_text(gen_clustered(cfg)));
  }
}

TEST_CASE("generated instances satisfy the instance invariants") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    Instance inst;
    if (trial % 2 == 0) {
      UniformGenConfig cfg;
      cfg.n_customers = rng.uniform_int(0, 40);
      cfg.demand_low = rng.uniform_int(0, 5);
      cfg.demand_high = cfg.demand_low + rng.uniform_int(0, 10);
      const int lo = cfg.demand_high + rng.uniform_int(0, 20);
      cfg.capacity_rule = CapacityRange{std::max(lo, 1), std::max(lo, 1) + rng.uniform_int(0, 30)};
      cfg.seed = rng.next();
      inst = gen_uniform(cfg);
    } else {
      ClusteredGenConfig cfg;
      cfg.n_customers = rng.uniform_int(0, 40);
      cfg.asymmetry_factor = rng.uniform(0.0, 0.5);
      cfg.detour_noise = rng.uniform();
      cfg.seed = rng.next();
      inst = gen_clustered(cfg);
    }
    CHECK_NOTHROW(validate(inst));
  }
}

TEST_CASE("split seeds are disjoint") {
  for (std::uint64_t i = 0; i < 100; ++i) {
    CHECK(split_seed(1, DataSplit::Train, i) != split_seed(1, DataSplit::Test, i));
    CHECK((split_seed(1, DataSplit::Train, i) >> 62) == 0);
    CHECK((split_seed(1, DataSplit::Test, i) >> 62) == 2);
  }
}

TEST_CASE("assign_vehicle_budget") {
  RunLimits probe;
  probe.time_budget_s = 0.2;
  probe.max_iterations = 200;

  SUBCASE("greedy reaches the lower bound") {
    const Instance inst = fixtures::line3({0, 1, 1, 1}, 10);
    const auto out = assign_vehicle_budget(inst, probe);
    CHECK(out.instance.vehicle_budget == 1);
    CHECK(out.rule == BudgetRule::LowerBoundAchieved);
  }
  SUBCASE("no pair fits, so the probe settles on three routes") {
    const Instance inst = fixtures::line3({0, 6, 6, 6}, 10);
    CHECK(vehicle_lower_bound(inst) == 2);
    CHECK(oracle::min_routes(inst) == 3);
    const auto out = assign_vehicle_budget(inst, probe);
    CHECK(out.lower_bound == 2);
    CHECK(out.instance.vehicle_budget == 3);
    CHECK(out.rule == BudgetRule::BestProbe);
  }
  SUBCASE("single customer") {
    const Instance inst = fixtures::point_instance({{0, 0}, {1, 1}}, {0, 4}, 5);
    CHECK(assign_vehicle_budget(inst, probe).instance.vehicle_budget == 1);
  }
  SUBCASE("budget is never below the partition optimum") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      UniformGenConfig cfg;
      cfg.n_customers = 8;
      cfg.capacity_rule = FixedCapacity{12};
      cfg.seed = s;
      const Instance inst = gen_uniform(cfg);
      const auto out = assign_vehicle_budget(inst, probe, s);
      CHECK(out.instance.vehicle_budget >= oracle::min_routes(inst));
      CHECK(out.instance.vehicle_budget >= vehicle_lower_bound(inst));
    }
  }
}

TEST_CASE("native format round trip") {
  ClusteredGenConfig cfg;
  cfg.n_customers = 12;
  Instance inst = gen_clustered(cfg);
  inst.vehicle_budget = 4;
  const auto path = temp_file("roundtrip.json");
  save_instance(inst, path);
  const Instance back = load_instance(path);
  CHECK(back == inst);

  Instance unassigned = inst;
  unassigned.vehicle_budget = 0;
  unassigned.coords.reset();
  CHECK(instance_from_json_text(to_json_text(unassigned)) == unassigned);
}

TEST_CASE("native format errors") {
  const std::string good = to_json_text(fixtures::line3({0, 1, 1, 1}, 5));
  CHECK_NOTHROW(instance_from_json_text(good));
  CHECK_THROWS_AS(instance_from_json_text("{\"id\": \"x\""), ParseError);
  CHECK_THROWS_AS(instance_from_json_text("{\"id\": \"x\", \"n_nodes\": 2}"), ParseError);
  const std::string rows =
      R"({"id":"x","n_nodes":2,"capacity":5,"vehicle_budget":null,"demands":[0,1],"cost_matrix":[[0,1]]})";
  CHECK_THROWS_AS(instance_from_json_text(rows), DimensionMismatch);
  const std::string cols =
      R"({"id":"x","n_nodes":2,"capacity":5,"vehicle_budget":null,"demands":[0,1],"cost_matrix":[[0,1],[1]]})";
  CHECK_THROWS_AS(instance_from_json_text(cols), DimensionMismatch);
  const std::string negative =
      R"({"id":"x","n_nodes":2,"capacity":5,"vehicle_budget":null,"demands":[0,1],"cost_matrix":[[0,-1],[1,0]]})";
  CHECK_THROWS_AS(instance_from_json_text(negative), ParseError);
}

TEST_CASE("standard text format") {
  SUBCASE("EUC_2D with rounding and depot reordering") {
    const std::string text = R"(NAME : tiny
COMMENT : test
TYPE : CVRP
DIMENSION : 3
EDGE_WEIGHT_TYPE : EUC_2D
CAPACITY : 10
NODE_COORD_SECTION
1 3 4
2 0 0
3 0 1
DEMAND_SECTION
1 2
2 0
3 5
DEPOT_SECTION
2
-1
EOF
)";
    const Instance inst = parse_cvrplib(text);
    CHECK(inst.id == "tiny");
    CHECK(inst.capacity == 10);
    CHECK(inst.demands == std::vector<int>{0, 2, 5});
    CHECK(inst.cost(0, 1) == 5.0);  // depot (0,0) to (3,4)
    CHECK(inst.cost(0, 2) == 1.0);
    CHECK(inst.cost(1, 2) == 4.0);  // sqrt(18) = 4.24 rounds to 4
  }
  SUBCASE("EXPLICIT lower row") {
    const std::string text = R"(NAME: m
DIMENSION: 3
CAPACITY: 10
EDGE_WEIGHT_TYPE: EXPLICIT
EDGE_WEIGHT_FORMAT: LOWER_ROW
EDGE_WEIGHT_SECTION
 7
 8 9
DEMAND_SECTION
1 0
2 3
3 3
DEPOT_SECTION
1
-1
EOF
)";
    const Instance inst = parse_cvrplib(text);
    CHECK(inst.cost(1, 0) == 7.0);
    CHECK(inst.cost(0, 2) == 8.0);
    CHECK(inst.cost(2, 1) == 9.0);
  }
  SUBCASE("full matrix keeps asymmetry") {
    const std::string text =
        "NAME: a\nDIMENSION: 2\nCAPACITY: 4\nVEHICLES: 1\nEDGE_WEIGHT_TYPE: EXPLICIT\n"
        "EDGE_WEIGHT_FORMAT: FULL_MATRIX\nEDGE_WEIGHT_SECTION\n0 5\n1 0\nDEMAND_SECTION\n1 0\n2 4\n"
        "DEPOT_SECTION\n1\n-1\nEOF\n";
    const Instance inst = parse_cvrplib(text);
    CHECK(inst.cost(0, 1) == 5.0);
    CHECK(inst.cost(1, 0) == 1.0);
    CHECK(inst.vehicle_budget == 1);
  }
  SUBCASE("diagnostics") {
    CHECK_THROWS_AS(parse_cvrplib("DIMENSION: 2\nEDGE_WEIGHT_TYPE: EUC_2D\n"), ParseError);
    const std::string short_demands =
        "DIMENSION: 3\nCAPACITY: 4\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n1 0 0\n2 1 1\n3 2 2\n"
        "DEMAND_SECTION\n1 0\n2 1\nEOF\n";
    CHECK_THROWS_AS(parse_cvrplib(short_demands), DimensionMismatch);
    try {
      parse_cvrplib("DIMENSION: 2\nCAPACITY: 4\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n1 0 zero\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 5);
    }
  }
  SUBCASE("loader detects the text format") {
    const auto path = temp_file("tiny.vrp");
    std::ofstream(path) << "DIMENSION: 2\nCAPACITY: 4\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n"
                           "1 0 0\n2 3 4\nDEMAND_SECTION\n1 0\n2 1\nEOF\n";
    const Instance inst = load_instance(path);
    CHECK(inst.id == "tiny");
    CHECK(inst.cost(0, 1) == 5.0);
  }
}

TEST_CASE("solution round trip and digests") {
  const Solution s{{{1, 2}, {3}}, 12.5, true};
  const auto path = temp_file("solution.json");
  save_solution(s, "inst", path);
  const auto [id, back] = load_solution(path);
  CHECK(id == "inst");
  CHECK(back.routes == s.routes);
  CHECK(back.cost == s.cost);
  CHECK(back.feasible);
  CHECK(digest_hex("") == "cbf29ce484222325");
  CHECK(digest_hex("a") == "af63dc4c8601ec8c");
  CHECK(file_digest(path) == digest_hex(to_json_text(s, "inst")));
}
