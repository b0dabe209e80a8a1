#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "warmvrp/core.hpp"
#include "warmvrp/rng.hpp"

namespace warmvrp {

inline constexpr int kFeatureDim = 8;

using FeatureRow = Eigen::Matrix<double, 1, kFeatureDim>;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, kFeatureDim, Eigen::RowMajor>;

/// Two-layer scorer: score(x) = w2 . tanh(W1^T x + b1) + b2.
///
/// All weights live in one flat vector laid out as W1 (kFeatureDim x hidden,
/// column-major), b1 (hidden), w2 (hidden), b2.
struct PolicyParams {
  int hidden_dim = 16;
  Eigen::VectorXd weights;
  std::string version = "warmvrp-policy/1";

  static Eigen::Index size_for(int hidden_dim) {
    return static_cast<Eigen::Index>(kFeatureDim) * hidden_dim + 2 * hidden_dim + 1;
  }

  auto w1() { return Eigen::Map<Eigen::MatrixXd>(weights.data(), kFeatureDim, hidden_dim); }
  auto w1() const {
    return Eigen::Map<const Eigen::MatrixXd>(weights.data(), kFeatureDim, hidden_dim);
  }
  auto b1() { return weights.segment(kFeatureDim * hidden_dim, hidden_dim); }
  auto b1() const { return weights.segment(kFeatureDim * hidden_dim, hidden_dim); }
  auto w2() { return weights.segment((kFeatureDim + 1) * hidden_dim, hidden_dim); }
  auto w2() const { return weights.segment((kFeatureDim + 1) * hidden_dim, hidden_dim); }
  double& b2() { return weights[weights.size() - 1]; }
  double b2() const { return weights[weights.size() - 1]; }

  bool operator==(const PolicyParams& other) const;
};

/// Throws Error when dimensions disagree or a weight is not finite.
void validate(const PolicyParams& params);

/// Uniform weights in [-scale, scale].
PolicyParams init_params(int hidden_dim, std::uint64_t seed, double scale = 0.1);

/// tanh(X W1 + b1), one row per candidate.
Eigen::MatrixXd hidden_layer(const PolicyParams& params, const Eigen::Ref<const FeatureMatrix>& features);

/// Scores for each row of `features`.
Eigen::VectorXd score(const PolicyParams& params, const Eigen::Ref<const FeatureMatrix>& features);

std::string to_json_text(const PolicyParams& params);
PolicyParams params_from_json_text(const std::string& text);
void save_params(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_params(const std::filesystem::path& path);

class InfeasibleCandidate : public Error {
 public:
  using Error::Error;
};

class DeadEnd : public Error {
 public:
  using Error::Error;
};

/// Partial construction. Also caches what the features need.
struct DecodeState {
  int current_node = 0;
  int remaining_capacity = 0;
  std::vector<char> unvisited;  // indexed by node, depot entry unused
  int unvisited_count = 0;
  Route route_so_far;
  Routes routes_done;
  int step = 0;

  double max_cost = 0.0;
  std::vector<double> cost_to_unvisited;  // sum over unvisited u of c(j, u), per node j

  bool done() const noexcept { return unvisited_count == 0 && route_so_far.empty(); }
};

DecodeState initial_state(const Instance& instance);

/// Moves to `action` (0 closes the current route). Throws InfeasibleCandidate
/// for an action the mask forbids.
void apply_action(const Instance& instance, DecodeState& state, int action);

/// The 8 scale-normalized features of choosing `candidate` in `state`.
FeatureRow featurize(const Instance& instance, const DecodeState& state, int candidate);

/// Feasible actions in ascending node order: the depot (when the route is not
/// empty) followed by unvisited customers that fit.
std::vector<int> feasible_actions(const Instance& instance, const DecodeState& state);

enum class DecodeMode { Deterministic, Sample };

struct DecodeConfig {
  DecodeMode mode = DecodeMode::Deterministic;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

struct StepDistribution {
  std::vector<int> candidates;  // node indices
  FeatureMatrix features;       // one row per candidate
  Eigen::VectorXd probs;        // masked softmax over candidates
  Eigen::VectorXd log_probs;

  /// Probability of `node`; exactly 0 for anything outside the feasible set.
  double probability_of(int node) const;
};

StepDistribution step_distribution(const Instance& instance, const DecodeState& state,
                                   const PolicyParams& params, const DecodeConfig& config);

/// Index of the highest probability, lowest node index on ties.
int argmax_action(const StepDistribution& dist);

struct Rollout {
  Solution solution;
  std::vector<double> step_log_probs;
  std::vector<int> chosen_actions;  // node indices, 0 for route closures

  // Replay data for the trainer.
  std::vector<FeatureMatrix> step_features;
  std::vector<int> chosen_index;  // row of the chosen action in step_features
};

Rollout rollout(const Instance& instance, const PolicyParams& params, const DecodeConfig& config);

/// Rollout 0 is deterministic, rollouts 1..k-1 sampled with seeds derived from
/// `seed`; each result is educated. Duplicates are kept.
std::vector<Solution> generate_candidates(const Instance& instance, const PolicyParams& params,
                                          int k, std::uint64_t seed, double temperature = 1.0);

enum class InitKind { Injected, GreedyOnly, NoInjection };

struct InitOutcome {
  InitKind kind = InitKind::NoInjection;
  std::vector<Solution> solutions;  // empty for NoInjection
  int candidates = 0;
  int vehicle_optimal = 0;  // candidates meeting the route-count criterion
  double elapsed_s = 0.0;
};

std::string to_string(InitKind kind);

/// Route-count criterion for seeds: exactly the lower bound, or at most the
/// vehicle budget when the budget exceeds the lower bound.
bool vehicle_optimal(const Instance& instance, const Solution& solution);

/// Policy candidates filtered by vehicle_optimal, falling back to the educated
/// greedy solution, then to no injection.
InitOutcome make_initial_population(const Instance& instance, const PolicyParams& params, int k,
                                    std::uint64_t seed, double temperature = 1.0);

}  // namespace warmvrp
