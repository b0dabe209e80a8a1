#include "warmvrp/policy.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "warmvrp/greedy.hpp"
#include "warmvrp/local_search.hpp"

namespace warmvrp {

using nlohmann::json;

bool PolicyParams::operator==(const PolicyParams& other) const {
  return hidden_dim == other.hidden_dim && version == other.version &&
         weights.size() == other.weights.size() && weights == other.weights;
}

void validate(const PolicyParams& params) {
  if (params.hidden_dim < 1) throw Error("hidden_dim must be positive");
  if (params.weights.size() != PolicyParams::size_for(params.hidden_dim))
    throw Error("policy has " + std::to_string(params.weights.size()) + " weights, expected " +
                std::to_string(PolicyParams::size_for(params.hidden_dim)));
  if (!params.weights.allFinite()) throw Error("policy weights must be finite");
}

PolicyParams init_params(int hidden_dim, std::uint64_t seed, double scale) {
  PolicyParams p;
  p.hidden_dim = hidden_dim;
  p.weights.resize(PolicyParams::size_for(hidden_dim));
  Rng rng(seed);
  for (Eigen::Index i = 0; i < p.weights.size(); ++i) p.weights[i] = rng.uniform(-scale, scale);
  validate(p);
  return p;
}

Eigen::MatrixXd hidden_layer(const PolicyParams& params, const Eigen::Ref<const FeatureMatrix>& features) {
  return ((features * params.w1()).rowwise() + params.b1().transpose()).array().tanh().matrix();
}

Eigen::VectorXd score(const PolicyParams& params, const Eigen::Ref<const FeatureMatrix>& features) {
  return (hidden_layer(params, features) * params.w2()).array() + params.b2();
}

std::string to_json_text(const PolicyParams& params) {
  json doc;
  doc["version"] = params.version;
  doc["feature_dim"] = kFeatureDim;
  doc["hidden_dim"] = params.hidden_dim;
  doc["weights"] = std::vector<double>(params.weights.data(), params.weights.data() + params.weights.size());
  return doc.dump(1) + "\n";
}

PolicyParams params_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("policy params: ") + e.what());
  }
  PolicyParams p;
  try {
    if (doc.at("feature_dim").get<int>() != kFeatureDim)
      throw Error("policy params: feature_dim must be " + std::to_string(kFeatureDim));
    p.version = doc.at("version").get<std::string>();
    p.hidden_dim = doc.at("hidden_dim").get<int>();
    const auto w = doc.at("weights").get<std::vector<double>>();
    p.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  } catch (const json::exception& e) {
    throw Error(std::string("policy params: ") + e.what());
  }
  validate(p);
  return p;
}

void save_params(const PolicyParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json_text(params);
}

PolicyParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return params_from_json_text(buffer.str());
}

DecodeState initial_state(const Instance& instance) {
  const int n = instance.n_nodes();
  DecodeState s;
  s.remaining_capacity = instance.capacity;
  s.unvisited.assign(n, 1);
  if (n > 0) s.unvisited[0] = 0;
  s.unvisited_count = instance.n_customers();
  s.max_cost = n > 0 ? instance.cost.maxCoeff() : 0.0;
  s.cost_to_unvisited.assign(n, 0.0);
  for (int j = 0; j < n; ++j)
    for (int u = 1; u < n; ++u) s.cost_to_unvisited[j] += instance.cost(j, u);
  return s;
}

namespace {

bool fits(const Instance& instance, const DecodeState& state, int node) {
  return node > 0 && node < instance.n_nodes() && state.unvisited[node] &&
         instance.demands[node] <= state.remaining_capacity;
}

}  // namespace

void apply_action(const Instance& instance, DecodeState& state, int action) {
  if (action == 0) {
    if (state.route_so_far.empty()) throw InfeasibleCandidate("depot chosen on an empty route");
    state.routes_done.push_back(std::move(state.route_so_far));
    state.route_so_far.clear();
    state.current_node = 0;
    state.remaining_capacity = instance.capacity;
  } else {
    if (!fits(instance, state, action))
      throw InfeasibleCandidate("customer " + std::to_string(action) + " is not a feasible choice");
    state.unvisited[action] = 0;
    --state.unvisited_count;
    for (int j = 0; j < instance.n_nodes(); ++j) state.cost_to_unvisited[j] -= instance.cost(j, action);
    state.route_so_far.push_back(action);
    state.current_node = action;
    state.remaining_capacity -= instance.demands[action];
  }
  ++state.step;
}

namespace {

void fill_features(const Instance& instance, const DecodeState& state, int candidate,
                   FeatureRow& f) {
  const double inv_max = state.max_cost > 0.0 ? 1.0 / state.max_cost : 0.0;
  const double q = instance.capacity;
  const int demand = candidate == 0 ? 0 : instance.demands[candidate];
  // Mean over the other unvisited customers (the candidate itself is about to leave the set).
  const int others = candidate == 0 ? state.unvisited_count : state.unvisited_count - 1;
  const double mean_out = others > 0 ? state.cost_to_unvisited[candidate] / others : 0.0;
  f[0] = instance.cost(state.current_node, candidate) * inv_max;
  f[1] = instance.cost(candidate, 0) * inv_max;
  f[2] = demand / q;
  f[3] = state.remaining_capacity / q;
  f[4] = instance.n_customers() > 0 ? static_cast<double>(state.unvisited_count) / instance.n_customers()
                                    : 0.0;
  f[5] = state.remaining_capacity > 0 ? static_cast<double>(demand) / state.remaining_capacity : 0.0;
  f[6] = candidate == 0 ? 1.0 : 0.0;
  f[7] = mean_out * inv_max;
}

}  // namespace

FeatureRow featurize(const Instance& instance, const DecodeState& state, int candidate) {
  if (candidate < 0 || candidate >= instance.n_nodes()) throw InvalidNode(candidate);
  if (candidate != 0 && !fits(instance, state, candidate))
    throw InfeasibleCandidate("customer " + std::to_string(candidate) + " does not fit");
  FeatureRow f;
  fill_features(instance, state, candidate, f);
  return f;
}

std::vector<int> feasible_actions(const Instance& instance, const DecodeState& state) {
  std::vector<int> actions;
  if (!state.route_so_far.empty()) actions.push_back(0);
  for (int j = 1; j < instance.n_nodes(); ++j)
    if (fits(instance, state, j)) actions.push_back(j);
  return actions;
}

double StepDistribution::probability_of(int node) const {
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i] == node) return probs[static_cast<Eigen::Index>(i)];
  return 0.0;
}

StepDistribution step_distribution(const Instance& instance, const DecodeState& state,
                                   const PolicyParams& params, const DecodeConfig& config) {
  if (!(config.temperature > 0.0)) throw Error("temperature must be positive");
  StepDistribution d;
  d.candidates = feasible_actions(instance, state);
  if (d.candidates.empty()) throw DeadEnd("no feasible action");
  const auto m = static_cast<Eigen::Index>(d.candidates.size());
  d.features.resize(m, kFeatureDim);
  FeatureRow row;
  for (Eigen::Index i = 0; i < m; ++i) {
    fill_features(instance, state, d.candidates[i], row);
    d.features.row(i) = row;
  }
  const Eigen::VectorXd z = score(params, d.features) / config.temperature;
  const double top = z.maxCoeff();
  const Eigen::ArrayXd e = (z.array() - top).exp();
  const double total = e.sum();
  d.probs = e / total;
  d.log_probs = (z.array() - top - std::log(total)).matrix();
  return d;
}

int argmax_action(const StepDistribution& dist) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < dist.probs.size(); ++i)
    if (dist.log_probs[i] > dist.log_probs[best]) best = i;
  return static_cast<int>(best);
}

Rollout rollout(const Instance& instance, const PolicyParams& params, const DecodeConfig& config) {
  validate(params);
  Rollout out;
  DecodeState state = initial_state(instance);
  Rng rng(config.seed);
  while (!state.done()) {
    StepDistribution dist = step_distribution(instance, state, params, config);
    int pick = 0;
    if (config.mode == DecodeMode::Deterministic) {
      pick = argmax_action(dist);
    } else {
      const double u = rng.uniform();
      double acc = 0.0;
      pick = static_cast<int>(dist.probs.size()) - 1;
      for (Eigen::Index i = 0; i < dist.probs.size(); ++i) {
        acc += dist.probs[i];
        if (u < acc) {
          pick = static_cast<int>(i);
          break;
        }
      }
    }
    const int action = dist.candidates[pick];
    out.step_log_probs.push_back(dist.log_probs[pick]);
    out.chosen_actions.push_back(action);
    out.chosen_index.push_back(pick);
    out.step_features.push_back(std::move(dist.features));
    apply_action(instance, state, action);
  }
  out.solution = evaluate(instance, std::move(state.routes_done));
  return out;
}

std::vector<Solution> generate_candidates(const Instance& instance, const PolicyParams& params,
                                          int k, std::uint64_t seed, double temperature) {
  if (k < 1) throw Error("k must be at least 1");
  const NeighborLists neighbors = build_neighbors(instance, 20);
  std::vector<Solution> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    DecodeConfig config;
    config.mode = i == 0 ? DecodeMode::Deterministic : DecodeMode::Sample;
    config.temperature = temperature;
    config.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    const Rollout r = rollout(instance, params, config);
    Rng ls_rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(i)));
    out.push_back(educate(instance, r.solution, neighbors, kDefaultMoveCap, ls_rng));
  }
  return out;
}

std::string to_string(InitKind kind) {
  switch (kind) {
    case InitKind::Injected: return "injected";
    case InitKind::GreedyOnly: return "greedy_only";
    case InitKind::NoInjection: return "no_injection";
  }
  return "unknown";
}

bool vehicle_optimal(const Instance& instance, const Solution& solution) {
  if (!covers_all_customers(instance, solution.routes)) return false;
  for (const Route& r : solution.routes)
    if (route_load(instance, r) > instance.capacity) return false;
  const int lb = vehicle_lower_bound(instance);
  const int routes = solution.route_count();
  if (instance.has_budget() && instance.vehicle_budget > lb) return routes <= instance.vehicle_budget;
  return routes == lb;
}

InitOutcome make_initial_population(const Instance& instance, const PolicyParams& params, int k,
                                    std::uint64_t seed, double temperature) {
  const auto start = std::chrono::steady_clock::now();
  InitOutcome out;
  const std::vector<Solution> candidates = generate_candidates(instance, params, k, seed, temperature);
  out.candidates = static_cast<int>(candidates.size());
  for (const Solution& s : candidates) {
    if (!vehicle_optimal(instance, s)) continue;
    ++out.vehicle_optimal;
    out.solutions.push_back(s);
  }
  if (!out.solutions.empty()) {
    out.kind = InitKind::Injected;
  } else {
    Rng ls_rng(derive_seed(seed, 999));
    Solution greedy = educate(instance, greedy_construct(instance), build_neighbors(instance, 20),
                              kDefaultMoveCap, ls_rng);
    if (vehicle_optimal(instance, greedy)) {
      out.kind = InitKind::GreedyOnly;
      out.solutions.push_back(std::move(greedy));
    }
  }
  out.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace warmvrp
