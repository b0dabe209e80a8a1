#include "warmvrp/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace warmvrp {

InvalidNode::InvalidNode(int node)
    : Error("invalid node index " + std::to_string(node)), node_(node) {}

std::int64_t Instance::total_demand() const noexcept {
  std::int64_t total = 0;
  for (int d : demands) total += d;
  return total;
}

bool Instance::operator==(const Instance& other) const {
  if (id != other.id || demands != other.demands || capacity != other.capacity ||
      vehicle_budget != other.vehicle_budget || cost.rows() != other.cost.rows() ||
      cost.cols() != other.cost.cols() || cost != other.cost ||
      coords.has_value() != other.coords.has_value())
    return false;
  if (coords && (coords->rows() != other.coords->rows() || *coords != *other.coords)) return false;
  return true;
}

void validate(const Instance& instance) {
  const int n = instance.n_nodes();
  if (n < 1) throw InvalidInstance("instance has no depot");
  if (instance.demands[0] != 0) throw InvalidInstance("depot demand must be 0");
  if (instance.capacity <= 0) throw InvalidInstance("capacity must be positive");
  for (int i = 1; i < n; ++i) {
    if (instance.demands[i] < 0)
      throw InvalidInstance("negative demand at node " + std::to_string(i));
    if (instance.demands[i] > instance.capacity)
      throw InvalidInstance("demand at node " + std::to_string(i) + " exceeds capacity");
  }
  if (instance.cost.rows() != n || instance.cost.cols() != n)
    throw InvalidInstance("cost matrix dimensions do not match node count");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double c = instance.cost(i, j);
      if (!std::isfinite(c) || c < 0.0)
        throw InvalidInstance("cost entry (" + std::to_string(i) + "," + std::to_string(j) +
                              ") is negative or not finite");
    }
    if (instance.cost(i, i) != 0.0) throw InvalidInstance("non-zero diagonal cost");
  }
  if (instance.coords && instance.coords->rows() != n)
    throw InvalidInstance("coordinate count does not match node count");
  if (instance.vehicle_budget < 0) throw InvalidInstance("negative vehicle budget");
  if (instance.has_budget() && instance.vehicle_budget < vehicle_lower_bound(instance))
    throw InvalidInstance("vehicle budget below the vehicle lower bound");
}

int Solution::route_count() const noexcept {
  return static_cast<int>(
      std::count_if(routes.begin(), routes.end(), [](const Route& r) { return !r.empty(); }));
}

std::string to_string(const Violation& v) {
  std::ostringstream out;
  switch (v.kind) {
    case ViolationKind::MissingCustomer: out << "MissingCustomer(" << v.customer << ")"; break;
    case ViolationKind::DuplicateCustomer:
      out << "DuplicateCustomer(" << v.customer << ", route " << v.route << ")";
      break;
    case ViolationKind::CapacityExceeded:
      out << "CapacityExceeded(route " << v.route << ", load " << v.load << ")";
      break;
    case ViolationKind::TooManyRoutes: out << "TooManyRoutes(" << v.count << ")"; break;
  }
  return out.str();
}

namespace {

void check_indices(const Instance& instance, std::span<const int> route) {
  const int n = instance.n_nodes();
  for (int node : route)
    if (node < 1 || node >= n) throw InvalidNode(node);
}

}  // namespace

double route_cost(const Instance& instance, std::span<const int> route) {
  check_indices(instance, route);
  if (route.empty()) return 0.0;
  double cost = instance.cost(0, route.front());
  for (std::size_t k = 0; k + 1 < route.size(); ++k) cost += instance.cost(route[k], route[k + 1]);
  return cost + instance.cost(route.back(), 0);
}

std::int64_t route_load(const Instance& instance, std::span<const int> route) {
  std::int64_t load = 0;
  for (int node : route) load += instance.demands[node];
  return load;
}

double total_cost(const Instance& instance, const Routes& routes) {
  std::vector<double> edges;
  for (const Route& route : routes) {
    check_indices(instance, route);
    if (route.empty()) continue;
    edges.push_back(instance.cost(0, route.front()));
    for (std::size_t k = 0; k + 1 < route.size(); ++k)
      edges.push_back(instance.cost(route[k], route[k + 1]));
    edges.push_back(instance.cost(route.back(), 0));
  }
  std::sort(edges.begin(), edges.end());
  double total = 0.0;
  for (double e : edges) total += e;
  return total;
}

FeasibilityReport check_feasible(const Instance& instance, const Routes& routes) {
  const int n = instance.n_nodes();
  std::vector<int> visits(n, 0);
  std::vector<Violation> duplicates;
  std::vector<Violation> overloads;
  int non_empty = 0;
  for (std::size_t r = 0; r < routes.size(); ++r) {
    check_indices(instance, routes[r]);
    if (!routes[r].empty()) ++non_empty;
    for (int c : routes[r])
      if (++visits[c] == 2)
        duplicates.push_back({ViolationKind::DuplicateCustomer, c, static_cast<int>(r)});
    const std::int64_t load = route_load(instance, routes[r]);
    if (load > instance.capacity)
      overloads.push_back({ViolationKind::CapacityExceeded, -1, static_cast<int>(r), load});
  }

  FeasibilityReport report;
  for (int c = 1; c < n; ++c)
    if (visits[c] == 0) report.violations.push_back({ViolationKind::MissingCustomer, c});
  std::sort(duplicates.begin(), duplicates.end(),
            [](const Violation& a, const Violation& b) { return a.customer < b.customer; });
  report.violations.insert(report.violations.end(), duplicates.begin(), duplicates.end());
  report.violations.insert(report.violations.end(), overloads.begin(), overloads.end());
  if (instance.has_budget() && non_empty > instance.vehicle_budget) {
    Violation v{ViolationKind::TooManyRoutes};
    v.count = non_empty;
    report.violations.push_back(v);
  }
  report.ok = report.violations.empty();
  return report;
}

Solution evaluate(const Instance& instance, Routes routes) {
  Solution s;
  s.cost = total_cost(instance, routes);
  s.feasible = check_feasible(instance, routes).ok;
  s.routes = std::move(routes);
  return s;
}

Solution finalize(const Instance& instance, Routes routes) {
  std::erase_if(routes, [](const Route& r) { return r.empty(); });
  return evaluate(instance, std::move(routes));
}

int vehicle_lower_bound(const Instance& instance) {
  if (instance.n_nodes() <= 1) return 0;
  const std::int64_t total = instance.total_demand();
  const std::int64_t q = instance.capacity;
  return static_cast<int>(std::max<std::int64_t>(1, (total + q - 1) / q));
}

std::weak_ordering hierarchical_compare(std::optional<double> a, std::optional<double> b) {
  if (a && b) {
    if (*a < *b) return std::weak_ordering::less;
    if (*b < *a) return std::weak_ordering::greater;
    return std::weak_ordering::equivalent;
  }
  if (a) return std::weak_ordering::less;
  if (b) return std::weak_ordering::greater;
  return std::weak_ordering::equivalent;
}

std::weak_ordering hierarchical_compare(const std::optional<Solution>& a,
                                        const std::optional<Solution>& b) {
  auto summary = [](const std::optional<Solution>& s) -> std::optional<double> {
    if (s && s->feasible) return s->cost;
    return std::nullopt;
  };
  return hierarchical_compare(summary(a), summary(b));
}

bool covers_all_customers(const Instance& instance, const Routes& routes) {
  const int n = instance.n_nodes();
  std::vector<int> visits(n, 0);
  for (const Route& route : routes)
    for (int c : route) {
      if (c < 1 || c >= n) return false;
      if (++visits[c] > 1) return false;
    }
  return std::all_of(visits.begin() + std::min(1, n), visits.end(), [](int v) { return v == 1; });
}

}  // namespace warmvrp
