#include "warmvrp/ga.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "warmvrp/csv.hpp"

namespace warmvrp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Routes segments_to_routes(std::span<const int> tour, const std::vector<int>& cuts) {
  Routes routes;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
    routes.emplace_back(tour.begin() + cuts[k], tour.begin() + cuts[k + 1]);
  return routes;
}

}  // namespace

std::optional<Solution> split(const Instance& instance, std::span<const int> tour,
                              std::optional<int> route_limit) {
  const int n = static_cast<int>(tour.size());
  for (int node : tour)
    if (node < 1 || node >= instance.n_nodes()) throw InvalidNode(node);
  if (n == 0) return evaluate(instance, {});
  const auto& d = instance.demands;
  const std::int64_t q = instance.capacity;

  // Relaxes every capacity-feasible segment [i, j] starting from label `from`.
  auto for_each_segment = [&](int i, auto&& relax) {
    std::int64_t load = 0;
    double path = 0.0;
    for (int j = i; j < n; ++j) {
      load += d[tour[j]];
      if (load > q) break;
      if (j > i) path += instance.cost(tour[j - 1], tour[j]);
      relax(j + 1, instance.cost(0, tour[i]) + path + instance.cost(tour[j], 0));
    }
  };

  if (!route_limit) {
    std::vector<double> label(n + 1, kInf);
    std::vector<int> pred(n + 1, -1);
    label[0] = 0.0;
    for (int i = 0; i < n; ++i) {
      if (label[i] == kInf) continue;
      for_each_segment(i, [&](int end, double segment) {
        if (label[i] + segment < label[end]) {
          label[end] = label[i] + segment;
          pred[end] = i;
        }
      });
    }
    std::vector<int> cuts{n};
    for (int at = n; at > 0; at = pred[at]) cuts.push_back(pred[at]);
    std::reverse(cuts.begin(), cuts.end());
    return evaluate(instance, segments_to_routes(tour, cuts));
  }

  const int k_max = std::min(*route_limit, n);
  if (k_max < 1) return std::nullopt;
  // label[k][i]: cheapest cover of the first i customers with exactly k routes.
  std::vector<std::vector<double>> label(k_max + 1, std::vector<double>(n + 1, kInf));
  std::vector<std::vector<int>> pred(k_max + 1, std::vector<int>(n + 1, -1));
  label[0][0] = 0.0;
  for (int k = 0; k < k_max; ++k) {
    for (int i = 0; i < n; ++i) {
      if (label[k][i] == kInf) continue;
      for_each_segment(i, [&](int end, double segment) {
        if (label[k][i] + segment < label[k + 1][end]) {
          label[k + 1][end] = label[k][i] + segment;
          pred[k + 1][end] = i;
        }
      });
    }
  }
  int best_k = -1;
  for (int k = 1; k <= k_max; ++k)
    if (label[k][n] < kInf && (best_k < 0 || label[k][n] < label[best_k][n])) best_k = k;
  if (best_k < 0) return std::nullopt;
  std::vector<int> cuts{n};
  for (int k = best_k, at = n; k > 0; --k) {
    at = pred[k][at];
    cuts.push_back(at);
  }
  std::reverse(cuts.begin(), cuts.end());
  return evaluate(instance, segments_to_routes(tour, cuts));
}

GiantTour encode(const Solution& solution) {
  GiantTour tour;
  for (const Route& route : solution.routes) tour.insert(tour.end(), route.begin(), route.end());
  return tour;
}

GiantTour ox_crossover(std::span<const int> p1, std::span<const int> p2, int cut_i, int cut_j) {
  const int n = static_cast<int>(p1.size());
  if (static_cast<int>(p2.size()) != n) throw Error("ox_crossover: parents differ in length");
  if (cut_i < 0 || cut_i >= cut_j || cut_j > n) throw Error("ox_crossover: invalid cut points");
  const int max_node = n == 0 ? 0 : *std::max_element(p1.begin(), p1.end());
  std::vector<char> present(max_node + 1, 0);
  GiantTour child(n, 0);
  for (int k = cut_i; k < cut_j; ++k) {
    child[k] = p1[k];
    present[p1[k]] = 1;
  }
  int write = cut_j % n;
  for (int offset = 0; offset < n; ++offset) {
    const int node = p2[(cut_j + offset) % n];
    if (node > max_node || present[node]) continue;
    present[node] = 1;
    child[write] = node;
    write = (write + 1) % n;
  }
  return child;
}

int broken_pairs_distance(std::span<const int> t1, std::span<const int> t2) {
  const int n = static_cast<int>(t2.size());
  if (n == 0) return 0;
  int max_node = 0;
  for (int node : t2) max_node = std::max(max_node, node);
  for (int node : t1) max_node = std::max(max_node, node);
  thread_local std::vector<int> succ, pred;
  succ.assign(max_node + 1, -1);
  pred.assign(max_node + 1, -1);
  auto link = [](int a, int b) {
    succ[a] = b;
    pred[b] = a;
  };
  link(0, t2[0]);
  for (int k = 0; k + 1 < n; ++k) link(t2[k], t2[k + 1]);
  link(t2[n - 1], 0);

  int broken = 0;
  auto check = [&](int a, int b) {
    if (succ[a] != b && pred[a] != b) ++broken;
  };
  check(0, t1.front());
  for (std::size_t k = 0; k + 1 < t1.size(); ++k) check(t1[k], t1[k + 1]);
  check(t1.back(), 0);
  return broken;
}

void validate(const GaConfig& config) {
  if (config.population_min < 2) throw Error("population_min must be at least 2");
  if (config.generation_size < 1) throw Error("generation_size must be at least 1");
  if (config.granularity < 1) throw Error("granularity must be at least 1");
  if (config.n_closest < 1) throw Error("n_closest must be at least 1");
  if (config.elite_fraction < 0.0 || config.elite_fraction > 1.0)
    throw Error("elite_fraction must lie in [0, 1]");
  for (std::size_t k = 1; k < config.checkpoint_times.size(); ++k)
    if (!(config.checkpoint_times[k] > config.checkpoint_times[k - 1]))
      throw Error("checkpoint_times must be strictly increasing");
}

double penalized_cost(const Instance& instance, const Solution& solution, double route_penalty,
                      double load_penalty) {
  std::int64_t excess = 0;
  for (const Route& route : solution.routes)
    excess += std::max<std::int64_t>(0, route_load(instance, route) - instance.capacity);
  double value = solution.cost;
  if (excess > 0) value += load_penalty * static_cast<double>(excess);
  if (instance.has_budget()) {
    const int extra = solution.route_count() - instance.vehicle_budget;
    if (extra > 0) value += route_penalty * extra;
  }
  return value;
}

std::vector<double> biased_fitness(std::span<const Individual> population, double diversity_weight,
                                   int n_closest) {
  const int size = static_cast<int>(population.size());
  std::vector<double> score(size, 0.0);
  if (size == 0) return score;

  std::vector<int> by_cost(size);
  std::iota(by_cost.begin(), by_cost.end(), 0);
  std::stable_sort(by_cost.begin(), by_cost.end(), [&](int a, int b) {
    return population[a].penalized_cost < population[b].penalized_cost;
  });
  for (int rank = 0; rank < size; ++rank) score[by_cost[rank]] = rank;
  if (size == 1 || diversity_weight == 0.0) return score;

  std::vector<std::vector<int>> dist(size, std::vector<int>(size, 0));
  for (int a = 0; a < size; ++a)
    for (int b = a + 1; b < size; ++b)
      dist[a][b] = dist[b][a] = broken_pairs_distance(population[a].tour, population[b].tour);

  std::vector<double> diversity(size, 0.0);
  const int take = std::min(n_closest, size - 1);
  std::vector<int> row;
  for (int a = 0; a < size; ++a) {
    row.clear();
    for (int b = 0; b < size; ++b)
      if (b != a) row.push_back(dist[a][b]);
    std::partial_sort(row.begin(), row.begin() + take, row.end());
    diversity[a] = std::accumulate(row.begin(), row.begin() + take, 0.0) / take;
  }
  std::vector<int> by_diversity(size);
  std::iota(by_diversity.begin(), by_diversity.end(), 0);
  std::stable_sort(by_diversity.begin(), by_diversity.end(),
                   [&](int a, int b) { return diversity[a] > diversity[b]; });
  for (int rank = 0; rank < size; ++rank) score[by_diversity[rank]] += diversity_weight * rank;
  return score;
}

GeneticSearch::GeneticSearch(const Instance& instance, GaConfig config)
    : instance_(&instance),
      config_(std::move(config)),
      neighbors_(build_neighbors(instance, config_.granularity)),
      rng_(config_.seed) {
  validate(config_);
  double round_trip = 0.0;
  for (int i = 1; i < instance.n_nodes(); ++i)
    round_trip += instance.cost(0, i) + instance.cost(i, 0);
  if (instance.n_customers() > 0) round_trip /= instance.n_customers();
  route_penalty_ = std::max(1e-9, config_.penalty_initial * round_trip);
  const double max_cost = instance.cost.size() > 0 ? instance.cost.maxCoeff() : 1.0;
  load_penalty_ = std::max(1e-9, max_cost / std::max(1, instance.capacity));
}

Solution GeneticSearch::decode(std::span<const int> tour) const {
  if (instance_->has_budget())
    if (auto limited = split(*instance_, tour, instance_->vehicle_budget)) return *limited;
  return *split(*instance_, tour);
}

Individual GeneticSearch::make_individual(Solution educated) {
  Individual ind;
  ind.tour = encode(educated);
  const std::optional<int> limit =
      instance_->has_budget() ? std::optional<int>(instance_->vehicle_budget) : std::nullopt;
  std::optional<Solution> resplit = split(*instance_, ind.tour, limit);
  const bool over_budget =
      instance_->has_budget() && educated.route_count() > instance_->vehicle_budget;
  if (resplit && (resplit->cost <= educated.cost || over_budget))
    ind.solution = std::move(*resplit);
  else
    ind.solution = std::move(educated);
  ind.penalized_cost = penalized_cost(*instance_, ind.solution, route_penalty_, load_penalty_);
  return ind;
}

void GeneticSearch::record(const Solution& solution) {
  if (solution.feasible && (!best_ || solution.cost < best_->cost)) best_ = solution;
  if (!covers_all_customers(*instance_, solution.routes)) return;
  for (const Route& route : solution.routes)
    if (route_load(*instance_, route) > instance_->capacity) return;
  const int routes = solution.route_count();
  if (!fewest_routes_ || routes < fewest_routes_->route_count() ||
      (routes == fewest_routes_->route_count() && solution.cost < fewest_routes_->cost))
    fewest_routes_ = solution;
}

void GeneticSearch::insert(Individual individual) {
  individual.birth = births_++;
  record(individual.solution);
  population_.push_back(std::move(individual));
}

std::vector<RejectedSeed> GeneticSearch::inject_initials(std::span<const Solution> seeds) {
  std::vector<RejectedSeed> rejected;
  for (int k = 0; k < static_cast<int>(seeds.size()); ++k) {
    const Solution& seed = seeds[k];
    if (!covers_all_customers(*instance_, seed.routes)) {
      rejected.push_back({k, "seed does not visit every customer exactly once"});
      continue;
    }
    const bool overloaded = std::any_of(seed.routes.begin(), seed.routes.end(), [&](const Route& r) {
      return route_load(*instance_, r) > instance_->capacity;
    });
    if (overloaded) {
      rejected.push_back({k, "seed exceeds vehicle capacity"});
      continue;
    }
    const Solution evaluated = evaluate(*instance_, seed.routes);
    record(evaluated);
    insert(make_individual(educate(*instance_, evaluated, neighbors_, config_.move_cap, rng_)));
  }
  return rejected;
}

void GeneticSearch::add_random() {
  GiantTour tour(instance_->n_customers());
  std::iota(tour.begin(), tour.end(), 1);
  rng_.shuffle(std::span<int>(tour));
  Solution decoded = decode(tour);
  insert(make_individual(educate(*instance_, decoded, neighbors_, config_.move_cap, rng_)));
}

const Individual& GeneticSearch::tournament() {
  const int size = static_cast<int>(population_.size());
  const int a = rng_.uniform_int(0, size - 1);
  const int b = rng_.uniform_int(0, size - 1);
  const Individual& ia = population_[a];
  const Individual& ib = population_[b];
  if (ia.biased_fitness != ib.biased_fitness) return ia.biased_fitness < ib.biased_fitness ? ia : ib;
  return ia.birth <= ib.birth ? ia : ib;
}

void GeneticSearch::step() {
  ++offspring_;
  const int n = instance_->n_customers();
  if (population_.empty()) {
    add_random();
    return;
  }
  if (n < 2) return;

  const auto fitness = biased_fitness(population_, config_.diversity_weight, config_.n_closest);
  for (std::size_t k = 0; k < population_.size(); ++k) population_[k].biased_fitness = fitness[k];
  const Individual* first = &tournament();
  const Individual* second = &tournament();
  for (int retry = 0; retry < 3 && second == first && population_.size() > 1; ++retry)
    second = &tournament();

  int a = rng_.uniform_int(0, n);
  int b = rng_.uniform_int(0, n - 1);
  if (b >= a) ++b;
  GiantTour child = ox_crossover(first->tour, second->tour, std::min(a, b), std::max(a, b));
  Solution educated = educate(*instance_, decode(child), neighbors_, config_.move_cap, rng_);
  Individual offspring = make_individual(std::move(educated));

  ++window_count_;
  if (offspring.solution.feasible) ++window_feasible_;
  insert(std::move(offspring));
  adapt_penalty();
  if (static_cast<int>(population_.size()) > config_.population_min + config_.generation_size)
    survivor_selection();
}

void GeneticSearch::adapt_penalty() {
  if (window_count_ < config_.penalty_window) return;
  const double fraction = static_cast<double>(window_feasible_) / window_count_;
  if (fraction < config_.target_feasible - 0.05)
    route_penalty_ *= config_.penalty_increase;
  else if (fraction > config_.target_feasible + 0.05)
    route_penalty_ *= config_.penalty_decrease;
  window_count_ = window_feasible_ = 0;
  for (Individual& ind : population_)
    ind.penalized_cost = penalized_cost(*instance_, ind.solution, route_penalty_, load_penalty_);
}

void GeneticSearch::survivor_selection() {
  const int elite = static_cast<int>(std::ceil(config_.elite_fraction * config_.population_min));
  while (static_cast<int>(population_.size()) > config_.population_min) {
    const int size = static_cast<int>(population_.size());
    const auto fitness = biased_fitness(population_, config_.diversity_weight, config_.n_closest);

    std::vector<int> by_cost(size);
    std::iota(by_cost.begin(), by_cost.end(), 0);
    std::stable_sort(by_cost.begin(), by_cost.end(), [&](int x, int y) {
      return population_[x].penalized_cost < population_[y].penalized_cost;
    });
    std::vector<char> shielded(size, 0);
    for (int k = 0; k < std::min(elite, size); ++k) shielded[by_cost[k]] = 1;

    int victim = -1;
    bool victim_is_clone = false;
    for (int k = 0; k < size; ++k) {
      if (shielded[k]) continue;
      bool clone = false;
      for (int other = 0; other < size && !clone; ++other)
        clone = other != k &&
                broken_pairs_distance(population_[k].tour, population_[other].tour) == 0;
      const bool worse = victim < 0 || (clone && !victim_is_clone) ||
                         (clone == victim_is_clone && fitness[k] >= fitness[victim]);
      if (worse) {
        victim = k;
        victim_is_clone = clone;
      }
    }
    if (victim < 0) break;
    population_.erase(population_.begin() + victim);
  }
}

RunTrace run(const Instance& instance, const GaConfig& config, std::span<const Solution> init,
             const RunLimits& limits) {
  if (!(limits.time_budget_s > 0.0)) throw Error("time budget must be positive");
  if (limits.max_iterations && *limits.max_iterations < 0)
    throw Error("max_iterations must be non-negative");

  RunTrace trace;
  GeneticSearch search(instance, config);
  const auto start = GeneticSearch::Clock::now();
  const bool virtual_clock = limits.max_iterations.has_value();
  long iterations = 0;

  auto elapsed = [&]() -> double {
    if (virtual_clock) {
      if (*limits.max_iterations == 0) return limits.time_budget_s;
      return limits.time_budget_s * static_cast<double>(iterations) /
             static_cast<double>(*limits.max_iterations);
    }
    return std::chrono::duration<double>(GeneticSearch::Clock::now() - start).count();
  };
  auto snapshot = [&](double t) {
    TracePoint point;
    point.elapsed_s = t;
    if (const auto& best = search.best_feasible()) {
      point.best_cost = best->cost;
      point.routes = best->route_count();
      point.feasible = true;
    } else if (const auto& fewest = search.fewest_routes()) {
      point.routes = fewest->route_count();
    }
    return point;
  };

  std::size_t next_checkpoint = 0;
  // Records every checkpoint already passed; true once the budget is used up.
  auto poll = [&]() {
    const double t = elapsed();
    while (next_checkpoint < config.checkpoint_times.size() &&
           config.checkpoint_times[next_checkpoint] <= t)
      trace.points.push_back(snapshot(config.checkpoint_times[next_checkpoint++]));
    if (virtual_clock) return iterations >= *limits.max_iterations;
    return t >= limits.time_budget_s;
  };

  trace.rejected = search.inject_initials(init);
  bool done = virtual_clock ? false : poll();
  if (!done) search.fill_random(config.population_min, [&] { return !virtual_clock && poll(); });
  trace.after_init = snapshot(virtual_clock ? 0.0 : elapsed());
  done = poll();
  while (!done) {
    search.step();
    ++iterations;
    done = poll();
  }

  trace.iterations = iterations;
  trace.elapsed_s = elapsed();
  trace.points.push_back(snapshot(trace.elapsed_s));
  trace.best = search.best_feasible();
  trace.fewest_routes = search.fewest_routes();
  return trace;
}

void write_trace_csv_header(std::ostream& out) {
  out << "instance_id,method,seed,checkpoint_s,best_cost,routes,feasible\n";
}

void write_trace_csv(std::ostream& out, const RunTrace& trace, const std::string& instance_id,
                     const std::string& method, std::uint64_t seed) {
  for (const TracePoint& p : trace.points)
    out << instance_id << ',' << method << ',' << seed << ',' << csv::format_double(p.elapsed_s)
        << ',' << csv::format_optional(p.best_cost) << ',' << p.routes << ','
        << (p.feasible ? 1 : 0) << '\n';
}

}  // namespace warmvrp
