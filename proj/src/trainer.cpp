#include "warmvrp/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "warmvrp/csv.hpp"
#include "warmvrp/rng.hpp"

namespace warmvrp {

using nlohmann::json;

void validate(const TrainConfig& config) {
  if (config.curriculum.empty()) throw Error("curriculum must have at least one stage");
  for (const auto& stage : config.curriculum) {
    if (stage.n_customers < 1) throw Error("curriculum stage needs at least one customer");
    if (stage.iterations < 0) throw Error("curriculum iterations must be non-negative");
  }
  if (config.batch_instances < 1) throw Error("batch_instances must be positive");
  if (config.rollouts_per_instance < 2) throw Error("rollouts_per_instance must be at least 2");
  if (!(config.clip_epsilon > 0.0 && config.clip_epsilon < 1.0))
    throw Error("clip_epsilon must lie in (0, 1)");
  if (!(config.learning_rate > 0.0)) throw Error("learning_rate must be positive");
  if (config.epochs_per_batch < 1) throw Error("epochs_per_batch must be positive");
  if (config.eval_every < 1) throw Error("eval_every must be positive");
  if (config.eval_instances < 1) throw Error("eval_instances must be positive");
  if (config.hidden_dim < 1) throw Error("hidden_dim must be positive");
  if (!(config.temperature > 0.0)) throw Error("temperature must be positive");
}

Instance training_instance(const TrainConfig& config, int n_customers, std::uint64_t seed) {
  if (config.distribution == TrainDistribution::Clustered) {
    ClusteredGenConfig cfg = config.clustered;
    cfg.n_customers = n_customers;
    cfg.seed = seed;
    return gen_clustered(cfg);
  }
  UniformGenConfig cfg = config.uniform;
  cfg.n_customers = n_customers;
  cfg.seed = seed;
  if (config.capacity_by_size)
    cfg.capacity_rule = FixedCapacity{n_customers <= 20 ? 30 : n_customers <= 50 ? 40 : 50};
  return gen_uniform(cfg);
}

std::vector<Instance> eval_set(const TrainConfig& config) {
  const int n = config.eval_n_customers > 0 ? config.eval_n_customers : config.curriculum.back().n_customers;
  std::vector<Instance> out;
  out.reserve(config.eval_instances);
  for (int i = 0; i < config.eval_instances; ++i)
    out.push_back(training_instance(config, n, split_seed(config.seed, DataSplit::Validation, i)));
  return out;
}

double evaluate_policy(const PolicyParams& params, std::span<const Instance> instances) {
  if (instances.empty()) throw Error("empty evaluation set");
  double total = 0.0;
  for (const Instance& inst : instances) total += rollout(inst, params, DecodeConfig{}).solution.cost;
  return total / static_cast<double>(instances.size());
}

std::vector<double> group_advantages(std::span<const double> costs) {
  const double n = static_cast<double>(costs.size());
  std::vector<double> adv(costs.size(), 0.0);
  if (costs.empty()) return adv;
  const double mean = std::accumulate(costs.begin(), costs.end(), 0.0) / n;
  double var = 0.0;
  for (double c : costs) var += (c - mean) * (c - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 0.0)) return adv;
  for (std::size_t i = 0; i < costs.size(); ++i) adv[i] = (mean - costs[i]) / sd;
  return adv;
}

TrainBatch collect_batch(const PolicyParams& params, const TrainConfig& config, int n_customers,
                         std::uint64_t seed) {
  TrainBatch batch;
  batch.n_instances = config.batch_instances;
  const int per = config.rollouts_per_instance;
  double total = 0.0;
  for (int b = 0; b < config.batch_instances; ++b) {
    const Instance inst =
        training_instance(config, n_customers, split_seed(seed, DataSplit::Train, static_cast<std::uint64_t>(b)));
    std::vector<double> costs;
    const std::size_t first = batch.rollouts.size();
    for (int r = 0; r < per; ++r) {
      DecodeConfig dc;
      dc.mode = DecodeMode::Sample;
      dc.temperature = config.temperature;
      dc.seed = derive_seed(seed, static_cast<std::uint64_t>(1'000'000 + b * per + r));
      Rollout ro = rollout(inst, params, dc);
      BatchRollout br;
      br.instance = b;
      br.cost = ro.solution.cost;
      for (std::size_t t = 0; t < ro.step_features.size(); ++t) {
        if (ro.step_features[t].rows() < 2) continue;  // forced step, no gradient
        br.features.push_back(std::move(ro.step_features[t]));
        br.chosen.push_back(ro.chosen_index[t]);
        br.old_log_probs.push_back(ro.step_log_probs[t]);
      }
      costs.push_back(br.cost);
      total += br.cost;
      batch.rollouts.push_back(std::move(br));
    }
    const auto adv = group_advantages(costs);
    for (int r = 0; r < per; ++r) batch.rollouts[first + r].advantage = adv[r];
  }
  batch.mean_cost = total / static_cast<double>(batch.rollouts.size());
  return batch;
}

namespace {

/// log pi(chosen) for one step, computed exactly as the decoder does, plus
/// what the backward pass needs.
struct StepForward {
  Eigen::MatrixXd hidden;  // m x H, after tanh
  Eigen::VectorXd probs;
  double log_prob = 0.0;
};

StepForward forward(const PolicyParams& params, const FeatureMatrix& x, int chosen, double temperature) {
  StepForward f;
  f.hidden = hidden_layer(params, x);
  const Eigen::VectorXd z = score(params, x) / temperature;
  const double top = z.maxCoeff();
  const Eigen::ArrayXd e = (z.array() - top).exp();
  const double total = e.sum();
  f.probs = e / total;
  f.log_prob = z[chosen] - top - std::log(total);
  return f;
}

/// grad += coef * d log pi(chosen) / d weights.
void backward(const PolicyParams& params, const FeatureMatrix& x, int chosen, const StepForward& f,
              double coef, double temperature, Eigen::VectorXd& grad) {
  const int h = params.hidden_dim;
  Eigen::VectorXd g = -f.probs;
  g[chosen] += 1.0;
  g *= coef / temperature;  // d/d score
  const Eigen::MatrixXd dpre =
      ((g * params.w2().transpose()).array() * (1.0 - f.hidden.array().square())).matrix();
  Eigen::Map<Eigen::MatrixXd>(grad.data(), kFeatureDim, h).noalias() += x.transpose() * dpre;
  grad.segment(kFeatureDim * h, h) += dpre.colwise().sum().transpose();
  grad.segment((kFeatureDim + 1) * h, h).noalias() += f.hidden.transpose() * g;
  grad[grad.size() - 1] += g.sum();
}

}  // namespace

Surrogate surrogate(const PolicyParams& params, const TrainBatch& batch, double clip_epsilon,
                    double temperature) {
  Surrogate out;
  out.gradient = Eigen::VectorXd::Zero(params.weights.size());
  if (batch.rollouts.empty()) return out;
  const double scale = 1.0 / static_cast<double>(batch.rollouts.size());
  for (const BatchRollout& r : batch.rollouts) {
    const double a = r.advantage;
    if (a == 0.0) continue;
    for (std::size_t t = 0; t < r.features.size(); ++t) {
      const StepForward f = forward(params, r.features[t], r.chosen[t], temperature);
      const double ratio = std::exp(f.log_prob - r.old_log_probs[t]);
      const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
      out.value += scale * std::min(ratio * a, clipped * a);
      const bool active = a > 0.0 ? ratio <= 1.0 + clip_epsilon : ratio >= 1.0 - clip_epsilon;
      if (active) backward(params, r.features[t], r.chosen[t], f, scale * a * ratio, temperature, out.gradient);
    }
  }
  return out;
}

Eigen::VectorXd reinforce_gradient(const PolicyParams& params, const TrainBatch& batch, double temperature) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.weights.size());
  if (batch.rollouts.empty()) return grad;
  const double scale = 1.0 / static_cast<double>(batch.rollouts.size());
  for (const BatchRollout& r : batch.rollouts) {
    if (r.advantage == 0.0) continue;
    for (std::size_t t = 0; t < r.features.size(); ++t) {
      const StepForward f = forward(params, r.features[t], r.chosen[t], temperature);
      backward(params, r.features[t], r.chosen[t], f, scale * r.advantage, temperature, grad);
    }
  }
  return grad;
}

UpdateStats ppo_update(PolicyParams& params, AdamState& adam, const TrainBatch& batch,
                       const TrainConfig& config) {
  PolicyParams next = params;
  AdamState state = adam;
  const auto n = params.weights.size();
  if (state.m.size() != n) state.m = Eigen::VectorXd::Zero(n);
  if (state.v.size() != n) state.v = Eigen::VectorXd::Zero(n);
  UpdateStats stats;
  for (int epoch = 0; epoch < config.epochs_per_batch; ++epoch) {
    const Surrogate s = surrogate(next, batch, config.clip_epsilon, config.temperature);
    if (!s.gradient.allFinite() || !std::isfinite(s.value))
      throw NonFiniteGradient("non-finite surrogate gradient in epoch " + std::to_string(epoch));
    stats.surrogate.push_back(s.value);
    stats.grad_norms.push_back(s.gradient.norm());
    if (s.gradient.isZero(0.0)) continue;
    // Ascent: Adam on the negated surrogate.
    const Eigen::VectorXd g = -s.gradient;
    ++state.t;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    next.weights.array() -=
        config.learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
    if (!next.weights.allFinite()) throw NonFiniteGradient("update produced non-finite weights");
  }
  params = std::move(next);
  adam = std::move(state);
  return stats;
}

double grad_check(const PolicyParams& params, const TrainBatch& batch, double clip_epsilon,
                  double temperature, double floor) {
  const Eigen::VectorXd analytic = surrogate(params, batch, clip_epsilon, temperature).gradient;
  PolicyParams probe = params;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < params.weights.size(); ++i) {
    const double w = params.weights[i];
    const double h = 1e-5 * (1.0 + std::abs(w));
    probe.weights[i] = w + h;
    const double up = surrogate(probe, batch, clip_epsilon, temperature).value;
    probe.weights[i] = w - h;
    const double down = surrogate(probe, batch, clip_epsilon, temperature).value;
    probe.weights[i] = w;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

void write_train_log_header(std::ostream& out) {
  out << "stage,iteration,mean_batch_cost,eval_cost,grad_norm,wall_time_s\n";
}

void write_train_log_row(std::ostream& out, const TrainLogRow& row) {
  out << row.stage << ',' << row.iteration << ',' << csv::format_double(row.mean_batch_cost) << ','
      << csv::format_optional(row.eval_cost) << ',' << csv::format_double(row.grad_norm) << ','
      << csv::format_double(row.wall_time_s) << '\n';
}

namespace {

json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd json_vector(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string to_json_text(const TrainCheckpoint& c) {
  json doc;
  doc["params"] = json::parse(to_json_text(c.params));
  doc["best"] = json::parse(to_json_text(c.best));
  doc["adam"] = {{"m", vector_json(c.adam.m)}, {"v", vector_json(c.adam.v)}, {"t", c.adam.t}};
  doc["stage"] = c.stage;
  doc["iteration"] = c.iteration;
  doc["best_eval"] = c.best_eval;
  doc["initial_eval"] = c.initial_eval;
  doc["wall_time_s"] = c.wall_time_s;
  return doc.dump(1) + "\n";
}

TrainCheckpoint checkpoint_from_json_text(const std::string& text) {
  TrainCheckpoint c;
  try {
    const json doc = json::parse(text);
    c.params = params_from_json_text(doc.at("params").dump());
    c.best = params_from_json_text(doc.at("best").dump());
    c.adam.m = json_vector(doc.at("adam").at("m"));
    c.adam.v = json_vector(doc.at("adam").at("v"));
    c.adam.t = doc.at("adam").at("t").get<long>();
    c.stage = doc.at("stage").get<int>();
    c.iteration = doc.at("iteration").get<int>();
    c.best_eval = doc.at("best_eval").get<double>();
    c.initial_eval = doc.at("initial_eval").get<double>();
    c.wall_time_s = doc.at("wall_time_s").get<double>();
  } catch (const json::exception& e) {
    throw Error(std::string("training checkpoint: ") + e.what());
  }
  return c;
}

TrainResult train(const TrainConfig& config, const TrainHooks& hooks) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Instance> held_out = eval_set(config);

  TrainCheckpoint state;
  if (hooks.resume) {
    state = *hooks.resume;
    validate(state.params);
    if (state.params.hidden_dim != config.hidden_dim) throw Error("checkpoint hidden_dim differs from config");
  } else {
    state.params = init_params(config.hidden_dim, derive_seed(config.seed, 0xA11CE), config.init_scale);
    state.best = state.params;
    state.best_eval = evaluate_policy(state.params, held_out);
    state.initial_eval = state.best_eval;
  }
  const double offset = state.wall_time_s;
  auto wall = [&] {
    return offset + std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  TrainResult result;
  auto log = [&](const TrainLogRow& row) {
    result.log.push_back(row);
    if (hooks.on_log) hooks.on_log(row);
  };
  if (!hooks.resume) log({0, 0, 0.0, state.best_eval, 0.0, wall()});

  for (int s = state.stage; s < static_cast<int>(config.curriculum.size()); ++s) {
    const CurriculumStage& stage = config.curriculum[s];
    const std::uint64_t stage_seed = derive_seed(config.seed, static_cast<std::uint64_t>(s + 1));
    for (int it = s == state.stage ? state.iteration : 0; it < stage.iterations; ++it) {
      const std::uint64_t batch_seed = derive_seed(stage_seed, static_cast<std::uint64_t>(it));
      const TrainBatch batch = collect_batch(state.params, config, stage.n_customers, batch_seed);
      const UpdateStats stats = ppo_update(state.params, state.adam, batch, config);

      TrainLogRow row{s, it + 1, batch.mean_cost, std::nullopt, stats.grad_norms.front(), 0.0};
      const bool eval_now = (it + 1) % config.eval_every == 0 || it + 1 == stage.iterations;
      if (eval_now) {
        const double e = evaluate_policy(state.params, held_out);
        row.eval_cost = e;
        if (e < state.best_eval) {
          state.best_eval = e;
          state.best = state.params;
        }
      }
      row.wall_time_s = wall();
      log(row);
      if (eval_now && hooks.on_checkpoint) {
        TrainCheckpoint snapshot = state;
        snapshot.stage = it + 1 == stage.iterations ? s + 1 : s;
        snapshot.iteration = it + 1 == stage.iterations ? 0 : it + 1;
        snapshot.wall_time_s = row.wall_time_s;
        hooks.on_checkpoint(snapshot);
      }
    }
    state.iteration = 0;
  }
  result.best = state.best;
  result.last = state.params;
  result.best_eval = state.best_eval;
  result.initial_eval = state.initial_eval;
  return result;
}

namespace {

template <typename T>
void read_opt(const json& doc, const char* key, T& into) {
  if (doc.contains(key)) into = doc.at(key).get<T>();
}

}  // namespace

TrainConfig train_config_from_json_text(const std::string& text) {
  TrainConfig c;
  try {
    const json doc = json::parse(text);
    if (doc.contains("curriculum")) {
      c.curriculum.clear();
      for (const auto& stage : doc.at("curriculum")) {
        if (stage.is_array())
          c.curriculum.push_back({stage.at(0).get<int>(), stage.at(1).get<int>()});
        else
          c.curriculum.push_back({stage.at("n_customers").get<int>(), stage.at("iterations").get<int>()});
      }
    }
    read_opt(doc, "batch_instances", c.batch_instances);
    read_opt(doc, "rollouts_per_instance", c.rollouts_per_instance);
    read_opt(doc, "clip_epsilon", c.clip_epsilon);
    read_opt(doc, "learning_rate", c.learning_rate);
    read_opt(doc, "epochs_per_batch", c.epochs_per_batch);
    read_opt(doc, "seed", c.seed);
    read_opt(doc, "eval_every", c.eval_every);
    read_opt(doc, "eval_instances", c.eval_instances);
    read_opt(doc, "eval_n_customers", c.eval_n_customers);
    read_opt(doc, "hidden_dim", c.hidden_dim);
    read_opt(doc, "init_scale", c.init_scale);
    read_opt(doc, "temperature", c.temperature);
    read_opt(doc, "capacity_by_size", c.capacity_by_size);
    if (doc.contains("distribution")) {
      const auto name = doc.at("distribution").get<std::string>();
      if (name == "uniform") c.distribution = TrainDistribution::Uniform;
      else if (name == "clustered") c.distribution = TrainDistribution::Clustered;
      else throw Error("distribution must be 'uniform' or 'clustered'");
    }
    if (doc.contains("uniform")) {
      const json& u = doc.at("uniform");
      read_opt(u, "demand_low", c.uniform.demand_low);
      read_opt(u, "demand_high", c.uniform.demand_high);
      read_opt(u, "square_side", c.uniform.square_side);
      if (u.contains("capacity")) c.uniform.capacity_rule = FixedCapacity{u.at("capacity").get<int>()};
      if (u.contains("capacity_range"))
        c.uniform.capacity_rule = CapacityRange{u.at("capacity_range").at(0).get<int>(),
                                                u.at("capacity_range").at(1).get<int>()};
    }
    if (doc.contains("clustered")) {
      const json& k = doc.at("clustered");
      read_opt(k, "n_clusters", c.clustered.n_clusters);
      read_opt(k, "cluster_spread", c.clustered.cluster_spread);
      read_opt(k, "depot_pool_size", c.clustered.depot_pool_size);
      read_opt(k, "asymmetry_factor", c.clustered.asymmetry_factor);
      read_opt(k, "detour_noise", c.clustered.detour_noise);
      read_opt(k, "demand_mean", c.clustered.demand_mean);
      read_opt(k, "demand_clip", c.clustered.demand_clip);
      read_opt(k, "capacity", c.clustered.capacity);
      read_opt(k, "square_side", c.clustered.square_side);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("training config: ") + e.what());
  }
  validate(c);
  return c;
}

std::string to_json_text(const TrainConfig& c) {
  json doc;
  json stages = json::array();
  for (const auto& s : c.curriculum) stages.push_back({s.n_customers, s.iterations});
  doc["curriculum"] = stages;
  doc["batch_instances"] = c.batch_instances;
  doc["rollouts_per_instance"] = c.rollouts_per_instance;
  doc["clip_epsilon"] = c.clip_epsilon;
  doc["learning_rate"] = c.learning_rate;
  doc["epochs_per_batch"] = c.epochs_per_batch;
  doc["seed"] = c.seed;
  doc["eval_every"] = c.eval_every;
  doc["eval_instances"] = c.eval_instances;
  doc["eval_n_customers"] = c.eval_n_customers;
  doc["hidden_dim"] = c.hidden_dim;
  doc["init_scale"] = c.init_scale;
  doc["temperature"] = c.temperature;
  doc["capacity_by_size"] = c.capacity_by_size;
  doc["distribution"] = c.distribution == TrainDistribution::Clustered ? "clustered" : "uniform";
  json u;
  u["demand_low"] = c.uniform.demand_low;
  u["demand_high"] = c.uniform.demand_high;
  u["square_side"] = c.uniform.square_side;
  if (const auto* f = std::get_if<FixedCapacity>(&c.uniform.capacity_rule)) u["capacity"] = f->capacity;
  else {
    const auto& r = std::get<CapacityRange>(c.uniform.capacity_rule);
    u["capacity_range"] = {r.low, r.high};
  }
  doc["uniform"] = u;
  doc["clustered"] = {{"n_clusters", c.clustered.n_clusters},
                      {"cluster_spread", c.clustered.cluster_spread},
                      {"depot_pool_size", c.clustered.depot_pool_size},
                      {"asymmetry_factor", c.clustered.asymmetry_factor},
                      {"detour_noise", c.clustered.detour_noise},
                      {"demand_mean", c.clustered.demand_mean},
                      {"demand_clip", c.clustered.demand_clip},
                      {"capacity", c.clustered.capacity},
                      {"square_side", c.clustered.square_side}};
  return doc.dump(1) + "\n";
}

}  // namespace warmvrp
