#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "warmvrp/instances.hpp"
#include "warmvrp/policy.hpp"

namespace warmvrp {

struct CurriculumStage {
  int n_customers = 20;
  int iterations = 0;
};

enum class TrainDistribution { Uniform, Clustered };

struct TrainConfig {
  std::vector<CurriculumStage> curriculum{{20, 1500}, {50, 1500}, {100, 1000}};
  int batch_instances = 16;
  int rollouts_per_instance = 8;
  double clip_epsilon = 0.2;
  double learning_rate = 1e-3;
  int epochs_per_batch = 2;
  std::uint64_t seed = 0;
  int eval_every = 100;
  int eval_instances = 64;
  int eval_n_customers = 0;  // 0: size of the last stage
  int hidden_dim = 16;
  double init_scale = 0.1;
  double temperature = 1.0;

  TrainDistribution distribution = TrainDistribution::Uniform;
  UniformGenConfig uniform;      // n_customers and seed are set per instance
  ClusteredGenConfig clustered;  // likewise
  bool capacity_by_size = true;  // uniform only: Q = 30 / 40 / 50 for N <= 20 / <= 50 / above
};

void validate(const TrainConfig& config);

/// Training-distribution instance for a stage size and seed.
Instance training_instance(const TrainConfig& config, int n_customers, std::uint64_t seed);

/// Fixed held-out set (seed range disjoint from training batches).
std::vector<Instance> eval_set(const TrainConfig& config);

/// Mean deterministic-decode cost of the raw rollouts (no education).
double evaluate_policy(const PolicyParams& params, std::span<const Instance> instances);

/// (mean - cost) / std over a group of peer rollouts; all zeros when std = 0.
std::vector<double> group_advantages(std::span<const double> costs);

struct BatchRollout {
  int instance = 0;
  double cost = 0.0;
  double advantage = 0.0;
  std::vector<FeatureMatrix> features;  // decision steps only (more than one candidate)
  std::vector<int> chosen;
  std::vector<double> old_log_probs;
};

struct TrainBatch {
  std::vector<BatchRollout> rollouts;
  int n_instances = 0;
  double mean_cost = 0.0;
};

TrainBatch collect_batch(const PolicyParams& params, const TrainConfig& config, int n_customers,
                         std::uint64_t seed);

/// Clipped surrogate averaged over rollouts (per-step terms summed within a
/// rollout) and its exact gradient.
struct Surrogate {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

Surrogate surrogate(const PolicyParams& params, const TrainBatch& batch, double clip_epsilon,
                    double temperature = 1.0);

/// Mean over rollouts of A * sum_t grad log pi(a_t | s_t).
Eigen::VectorXd reinforce_gradient(const PolicyParams& params, const TrainBatch& batch,
                                   double temperature = 1.0);

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

struct AdamState {
  Eigen::VectorXd m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct UpdateStats {
  std::vector<double> surrogate;   // value before each epoch's step
  std::vector<double> grad_norms;  // per epoch
};

/// epochs_per_batch Adam ascent steps on the surrogate. On a non-finite
/// gradient throws NonFiniteGradient and leaves `params` and `adam` as they were.
UpdateStats ppo_update(PolicyParams& params, AdamState& adam, const TrainBatch& batch,
                       const TrainConfig& config);

/// Max over weights of |analytic - numeric| / max(|analytic|, |numeric|, floor),
/// numeric by central differences with h = 1e-5 (1 + |w|).
double grad_check(const PolicyParams& params, const TrainBatch& batch, double clip_epsilon,
                  double temperature = 1.0, double floor = 1e-6);

struct TrainLogRow {
  int stage = 0;
  int iteration = 0;
  double mean_batch_cost = 0.0;
  std::optional<double> eval_cost;
  double grad_norm = 0.0;
  double wall_time_s = 0.0;
};

void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, const TrainLogRow& row);

/// Everything needed to continue a run bit-identically.
struct TrainCheckpoint {
  PolicyParams params;
  AdamState adam;
  int stage = 0;
  int iteration = 0;  // next iteration to run within `stage`
  PolicyParams best;
  double best_eval = 0.0;
  double initial_eval = 0.0;
  double wall_time_s = 0.0;
};

std::string to_json_text(const TrainCheckpoint& checkpoint);
TrainCheckpoint checkpoint_from_json_text(const std::string& text);

struct TrainHooks {
  std::function<void(const TrainLogRow&)> on_log;
  std::function<void(const TrainCheckpoint&)> on_checkpoint;  // after every evaluation
  std::optional<TrainCheckpoint> resume;
};

struct TrainResult {
  PolicyParams best;   // lowest eval cost seen
  PolicyParams last;
  double best_eval = 0.0;
  double initial_eval = 0.0;
  std::vector<TrainLogRow> log;
};

/// Runs the curriculum in order, carrying parameters across stages.
TrainResult train(const TrainConfig& config, const TrainHooks& hooks = {});

TrainConfig train_config_from_json_text(const std::string& text);
std::string to_json_text(const TrainConfig& config);

}  // namespace warmvrp
