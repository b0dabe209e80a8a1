#include <doctest.h>

#include <sstream>

#include "warmvrp/csv.hpp"
#include "warmvrp/trainer.hpp"

using namespace warmvrp;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.curriculum = {{8, 3}};
  cfg.batch_instances = 3;
  cfg.rollouts_per_instance = 4;
  cfg.eval_instances = 4;
  cfg.eval_every = 2;
  cfg.hidden_dim = 6;
  cfg.seed = 21;
  return cfg;
}

TrainBatch small_batch(const PolicyParams& p, std::uint64_t seed) {
  return collect_batch(p, small_config(), 8, seed);
}

PolicyParams jitter(PolicyParams p, std::uint64_t seed, double sd) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < p.weights.size(); ++i) p.weights[i] += sd * rng.normal();
  return p;
}

}  // namespace

TEST_CASE("group advantages") {
  const std::vector<double> equal{5, 5, 5};
  CHECK(group_advantages(equal) == std::vector<double>{0, 0, 0});
  const std::vector<double> two{90, 110};
  CHECK(group_advantages(two) == std::vector<double>{1.0, -1.0});
}

TEST_CASE("collect_batch") {
  const PolicyParams p = init_params(6, 1);
  const TrainBatch a = small_batch(p, 5);
  CHECK(a.rollouts.size() == 12);
  for (int g = 0; g < 3; ++g) {
    double sum = 0.0;
    for (int r = 0; r < 4; ++r) sum += a.rollouts[g * 4 + r].advantage;
    CHECK(std::abs(sum) <= 1e-12);
  }
  const TrainBatch b = small_batch(p, 5);
  for (std::size_t i = 0; i < a.rollouts.size(); ++i) {
    CHECK(a.rollouts[i].cost == b.rollouts[i].cost);
    CHECK(a.rollouts[i].old_log_probs == b.rollouts[i].old_log_probs);
  }
}

TEST_CASE("surrogate gradient") {
  const PolicyParams p = init_params(6, 2, 0.5);
  TrainBatch batch = small_batch(p, 9);

  SUBCASE("equals REINFORCE when every ratio is one") {
    const Eigen::VectorXd ppo = surrogate(p, batch, 0.2).gradient;
    const Eigen::VectorXd reinforce = reinforce_gradient(p, batch);
    CHECK(ppo.norm() > 0.0);
    CHECK((ppo - reinforce).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("zero advantages give a zero gradient and no update") {
    for (auto& r : batch.rollouts) r.advantage = 0.0;
    CHECK(surrogate(p, batch, 0.2).gradient.isZero(0.0));
    CHECK(reinforce_gradient(p, batch).isZero(0.0));
    PolicyParams q = p;
    AdamState adam;
    ppo_update(q, adam, batch, small_config());
    CHECK(q == p);
  }
  SUBCASE("clipped terms contribute a constant") {
    // One positive-advantage step whose ratio is 1.5: value 1.2 A, no gradient.
    TrainBatch one;
    BatchRollout r = batch.rollouts.front();
    r.advantage = 2.0;
    r.features.resize(1);
    r.chosen.resize(1);
    r.old_log_probs.resize(1);
    const Surrogate base = surrogate(p, TrainBatch{{r}, 1, 0.0}, 0.2);
    CHECK(base.value == doctest::Approx(2.0));  // ratio 1: the term is A
    r.old_log_probs[0] -= std::log(1.5);
    one.rollouts.push_back(r);
    const Surrogate clipped = surrogate(p, one, 0.2);
    CHECK(clipped.value == doctest::Approx(1.2 * 2.0));
    CHECK(clipped.gradient.isZero(0.0));
  }
}

TEST_CASE("grad_check agrees with finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PolicyParams collect = init_params(6, seed, 0.5);
    const TrainBatch batch = small_batch(collect, 100 + seed);
    CHECK(grad_check(jitter(collect, seed, 0.02), batch, 0.2) < 1e-4);
  }
  const PolicyParams p = init_params(6, 7);
  TrainBatch zero = small_batch(p, 3);
  for (auto& r : zero.rollouts) r.advantage = 0.0;
  CHECK(grad_check(p, zero, 0.2) == 0.0);
}

TEST_CASE("non-finite gradients leave params untouched") {
  PolicyParams p = init_params(6, 3);
  TrainBatch batch = small_batch(p, 4);
  batch.rollouts.front().advantage = std::numeric_limits<double>::infinity();
  PolicyParams q = p;
  AdamState adam;
  CHECK_THROWS_AS(ppo_update(q, adam, batch, small_config()), NonFiniteGradient);
  CHECK(q == p);
  CHECK(adam.t == 0);
}

TEST_CASE("ppo_update moves the parameters") {
  PolicyParams p = init_params(6, 3);
  const TrainBatch batch = small_batch(p, 4);
  AdamState adam;
  const PolicyParams before = p;
  const UpdateStats stats = ppo_update(p, adam, batch, small_config());
  CHECK(stats.grad_norms.size() == 2);
  CHECK_FALSE(p == before);
  CHECK(adam.t == 2);
}

TEST_CASE("train") {
  SUBCASE("zero iterations returns the initial params") {
    TrainConfig cfg = small_config();
    cfg.curriculum = {{20, 0}};
    const TrainResult r = train(cfg);
    CHECK(r.best == init_params(cfg.hidden_dim, derive_seed(cfg.seed, 0xA11CE), cfg.init_scale));
    CHECK(r.best == r.last);
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].eval_cost);
  }
  SUBCASE("reproducible and best never worse than any evaluation") {
    const TrainConfig cfg = small_config();
    const TrainResult a = train(cfg);
    const TrainResult b = train(cfg);
    CHECK(a.last == b.last);
    CHECK(a.best == b.best);
    for (const auto& row : a.log)
      if (row.eval_cost) CHECK(a.best_eval <= *row.eval_cost);
    CHECK(a.log.size() == 4);
  }
  SUBCASE("resuming from a checkpoint is bit-identical") {
    TrainConfig cfg = small_config();
    cfg.curriculum = {{8, 3}, {10, 2}};
    const TrainResult full = train(cfg);
    std::vector<std::string> saved;
    TrainHooks hooks;
    hooks.on_checkpoint = [&](const TrainCheckpoint& c) { saved.push_back(to_json_text(c)); };
    train(cfg, hooks);
    REQUIRE(saved.size() >= 2);
    TrainHooks resume;
    resume.resume = checkpoint_from_json_text(saved[1]);
    const TrainResult rest = train(cfg, resume);
    CHECK(rest.last == full.last);
    CHECK(rest.best == full.best);
  }
  SUBCASE("log rows are well-formed") {
    std::ostringstream out;
    write_train_log_header(out);
    for (const auto& row : train(small_config()).log) write_train_log_row(out, row);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "stage,iteration,mean_batch_cost,eval_cost,grad_norm,wall_time_s");
    int rows = 0;
    while (std::getline(in, line)) {
      CHECK(csv::split_line(line).size() == 6);
      ++rows;
    }
    CHECK(rows == 4);
  }
}

TEST_CASE("config JSON round trip") {
  TrainConfig cfg = small_config();
  cfg.distribution = TrainDistribution::Clustered;
  cfg.clustered.n_clusters = 5;
  const TrainConfig back = train_config_from_json_text(to_json_text(cfg));
  CHECK(to_json_text(back) == to_json_text(cfg));
  CHECK(back.curriculum.size() == 1);
  CHECK(back.curriculum[0].n_customers == 8);
  CHECK_THROWS(train_config_from_json_text(R"({"rollouts_per_instance": 1})"));
  CHECK(train_config_from_json_text(R"({"curriculum": [{"n_customers": 30, "iterations": 2}]})")
            .curriculum[0]
            .n_customers == 30);
}
