#include "warmvrp/local_search.hpp"

#include <algorithm>
#include <numeric>

namespace warmvrp {

NeighborLists build_neighbors(const Instance& instance, int granularity) {
  if (granularity < 1) throw Error("granularity must be at least 1");
  const int n = instance.n_nodes();
  NeighborLists result;
  result.granularity = granularity;
  result.lists.assign(n, {});
  std::vector<int> others;
  for (int u = 1; u < n; ++u) {
    others.clear();
    for (int v = 1; v < n; ++v)
      if (v != u) others.push_back(v);
    const auto keep = std::min<std::size_t>(granularity, others.size());
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(keep),
                      others.end(), [&](int a, int b) {
                        const double ca = instance.cost(u, a), cb = instance.cost(u, b);
                        return ca < cb || (ca == cb && a < b);
                      });
    others.resize(keep);
    result.lists[u] = others;
  }
  return result;
}

RouteState::RouteState(const Instance& instance, Routes routes)
    : instance_(&instance),
      routes_(std::move(routes)),
      route_of_(instance.n_nodes(), -1),
      position_of_(instance.n_nodes(), -1),
      loads_(routes_.size(), 0),
      costs_(routes_.size(), 0.0) {
  for (int r = 0; r < route_count(); ++r) reindex(r);
  cached_cost_ = std::accumulate(costs_.begin(), costs_.end(), 0.0);
}

int RouteState::node_at(int r, int position) const {
  const Route& route = routes_[r];
  if (position < 0 || position >= static_cast<int>(route.size())) return 0;
  return route[position];
}

void RouteState::reindex(int r) {
  const Route& route = routes_[r];
  for (int p = 0; p < static_cast<int>(route.size()); ++p) {
    route_of_[route[p]] = r;
    position_of_[route[p]] = p;
  }
  loads_[r] = route_load(*instance_, route);
  costs_[r] = route_cost(*instance_, route);
}

void RouteState::set_route(int r, Route route) {
  cached_cost_ -= costs_[r];
  routes_[r] = std::move(route);
  reindex(r);
  cached_cost_ += costs_[r];
}

Solution RouteState::to_solution() const { return finalize(*instance_, routes_); }

namespace {

double c(const RouteState& s, int i, int j) { return s.instance().cost(i, j); }

bool improving(double delta) { return delta < -kImprovementEpsilon; }

MoveOutcome rejected(double delta = 0.0) { return {false, delta}; }

/// Replaces one route when the edited sequence is cheaper.
MoveOutcome commit_intra(RouteState& state, int r, Route edited) {
  const double delta = route_cost(state.instance(), edited) - state.cost(r);
  if (!improving(delta)) return rejected(delta);
  state.set_route(r, std::move(edited));
  return {true, delta};
}

}  // namespace

MoveOutcome relocate(RouteState& state, int u, Anchor at) {
  const int ru = state.route_of(u), pu = state.position_of(u);
  const int rv = at.route, pv = at.position;
  if (ru == rv) {
    if (pv == pu || pv == pu - 1) return rejected();
    Route edited = state.route(ru);
    edited.erase(edited.begin() + pu);
    const int insert_at = pv < pu ? pv + 1 : pv;
    edited.insert(edited.begin() + insert_at, u);
    return commit_intra(state, ru, std::move(edited));
  }
  if (state.route(rv).empty()) return rejected();
  const int p = state.node_at(ru, pu - 1), x = state.node_at(ru, pu + 1);
  const int a = state.node_at(rv, pv), b = state.node_at(rv, pv + 1);
  const double delta =
      c(state, p, x) - c(state, p, u) - c(state, u, x) + c(state, a, u) + c(state, u, b) - c(state, a, b);
  if (state.load(rv) + state.instance().demands[u] > state.instance().capacity) return rejected(delta);
  if (!improving(delta)) return rejected(delta);
  Route from = state.route(ru);
  from.erase(from.begin() + pu);
  Route to = state.route(rv);
  to.insert(to.begin() + pv + 1, u);
  state.set_route(ru, std::move(from));
  state.set_route(rv, std::move(to));
  return {true, delta};
}

MoveOutcome swap(RouteState& state, int u, int v) {
  if (u == v) return rejected();
  const int ru = state.route_of(u), pu = state.position_of(u);
  const int rv = state.route_of(v), pv = state.position_of(v);
  if (ru == rv) {
    Route edited = state.route(ru);
    std::swap(edited[pu], edited[pv]);
    return commit_intra(state, ru, std::move(edited));
  }
  const auto& demands = state.instance().demands;
  const int pu_prev = state.node_at(ru, pu - 1), pu_next = state.node_at(ru, pu + 1);
  const int pv_prev = state.node_at(rv, pv - 1), pv_next = state.node_at(rv, pv + 1);
  const double delta = c(state, pu_prev, v) + c(state, v, pu_next) - c(state, pu_prev, u) -
                       c(state, u, pu_next) + c(state, pv_prev, u) + c(state, u, pv_next) -
                       c(state, pv_prev, v) - c(state, v, pv_next);
  const int q = state.instance().capacity;
  if (state.load(ru) - demands[u] + demands[v] > q || state.load(rv) - demands[v] + demands[u] > q)
    return rejected(delta);
  if (!improving(delta)) return rejected(delta);
  Route a = state.route(ru), b = state.route(rv);
  a[pu] = v;
  b[pv] = u;
  state.set_route(ru, std::move(a));
  state.set_route(rv, std::move(b));
  return {true, delta};
}

MoveOutcome or_opt(RouteState& state, int u, int length, Anchor at) {
  if (length < 2 || length > 3) throw Error("or_opt segment length must be 2 or 3");
  const int ru = state.route_of(u), pu = state.position_of(u);
  const Route& source = state.route(ru);
  const int last = pu + length - 1;
  if (last >= static_cast<int>(source.size())) return rejected();
  const int rv = at.route, pv = at.position;
  if (ru == rv) {
    if (pv >= pu - 1 && pv <= last) return rejected();
    Route edited = source;
    Route segment(edited.begin() + pu, edited.begin() + last + 1);
    edited.erase(edited.begin() + pu, edited.begin() + last + 1);
    const int insert_at = pv < pu ? pv + 1 : pv - length + 1;
    edited.insert(edited.begin() + insert_at, segment.begin(), segment.end());
    return commit_intra(state, ru, std::move(edited));
  }
  if (state.route(rv).empty()) return rejected();
  const int head = source[pu], tail = source[last];
  const int p = state.node_at(ru, pu - 1), x = state.node_at(ru, last + 1);
  const int a = state.node_at(rv, pv), b = state.node_at(rv, pv + 1);
  const double delta = c(state, p, x) - c(state, p, head) - c(state, tail, x) + c(state, a, head) +
                       c(state, tail, b) - c(state, a, b);
  std::int64_t segment_load = 0;
  for (int k = pu; k <= last; ++k) segment_load += state.instance().demands[source[k]];
  if (state.load(rv) + segment_load > state.instance().capacity) return rejected(delta);
  if (!improving(delta)) return rejected(delta);
  Route from = source;
  Route segment(from.begin() + pu, from.begin() + last + 1);
  from.erase(from.begin() + pu, from.begin() + last + 1);
  Route to = state.route(rv);
  to.insert(to.begin() + pv + 1, segment.begin(), segment.end());
  state.set_route(ru, std::move(from));
  state.set_route(rv, std::move(to));
  return {true, delta};
}

MoveOutcome two_opt_intra(RouteState& state, Anchor from, int v) {
  const int r = from.route;
  if (state.route_of(v) != r) return rejected();
  const int i = from.position, j = state.position_of(v);
  if (j < i + 2) return rejected();
  Route edited = state.route(r);
  std::reverse(edited.begin() + i + 1, edited.begin() + j + 1);
  return commit_intra(state, r, std::move(edited));
}

MoveOutcome two_opt_star(RouteState& state, Anchor a, Anchor b) {
  const int ra = a.route, rb = b.route;
  if (ra == rb) return rejected();
  const Route& route_a = state.route(ra);
  const Route& route_b = state.route(rb);
  if (route_a.empty() || route_b.empty()) return rejected();
  const int ua = state.node_at(ra, a.position), xa = state.node_at(ra, a.position + 1);
  const int ub = state.node_at(rb, b.position), xb = state.node_at(rb, b.position + 1);
  const double delta = c(state, ua, xb) + c(state, ub, xa) - c(state, ua, xa) - c(state, ub, xb);
  if (!improving(delta)) return rejected(delta);

  std::int64_t head_a = 0, head_b = 0;
  for (int k = 0; k <= a.position; ++k) head_a += state.instance().demands[route_a[k]];
  for (int k = 0; k <= b.position; ++k) head_b += state.instance().demands[route_b[k]];
  const std::int64_t tail_a = state.load(ra) - head_a, tail_b = state.load(rb) - head_b;
  const int q = state.instance().capacity;
  if (head_a + tail_b > q || head_b + tail_a > q) return rejected(delta);

  Route new_a(route_a.begin(), route_a.begin() + a.position + 1);
  new_a.insert(new_a.end(), route_b.begin() + b.position + 1, route_b.end());
  Route new_b(route_b.begin(), route_b.begin() + b.position + 1);
  new_b.insert(new_b.end(), route_a.begin() + a.position + 1, route_a.end());
  state.set_route(ra, std::move(new_a));
  state.set_route(rb, std::move(new_b));
  return {true, delta};
}

namespace {

bool try_pair(RouteState& state, int u, int v) {
  if (relocate(state, u, after_node(state, v)).applied) return true;
  if (relocate(state, u, before_node(state, v)).applied) return true;
  for (int length : {2, 3}) {
    if (or_opt(state, u, length, after_node(state, v)).applied) return true;
    if (or_opt(state, u, length, before_node(state, v)).applied) return true;
  }
  if (swap(state, u, v).applied) return true;
  if (state.route_of(u) == state.route_of(v)) {
    if (state.position_of(u) < state.position_of(v))
      return two_opt_intra(state, after_node(state, u), v).applied;
    return two_opt_intra(state, before_node(state, v), u).applied;
  }
  if (two_opt_star(state, after_node(state, u), before_node(state, v)).applied) return true;
  return two_opt_star(state, after_node(state, u), after_node(state, v)).applied;
}

}  // namespace

Solution educate(const Instance& instance, const Solution& solution,
                 const NeighborLists& neighbors, long move_cap, Rng& rng, EducateStats* stats) {
  RouteState state(instance, solution.routes);
  std::vector<int> order(instance.n_customers());
  std::iota(order.begin(), order.end(), 1);
  rng.shuffle(std::span<int>(order));

  long applied = 0;
  int passes = 0;
  bool improved = move_cap > 0;
  while (improved && applied < move_cap) {
    improved = false;
    ++passes;
    for (int u : order) {
      for (int v : neighbors.of(u)) {
        if (applied >= move_cap) break;
        if (try_pair(state, u, v)) {
          improved = true;
          ++applied;
        }
      }
    }
  }
  if (stats) {
    stats->moves_applied = applied;
    stats->passes = passes;
  }
  if (applied == 0) return evaluate(instance, solution.routes);
  return state.to_solution();
}

}  // namespace warmvrp
