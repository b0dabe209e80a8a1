#include "warmvrp/instances.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "warmvrp/ga.hpp"
#include "warmvrp/greedy.hpp"
#include "warmvrp/local_search.hpp"
#include "warmvrp/rng.hpp"

namespace warmvrp {

using nlohmann::json;

namespace {

CostMatrix euclidean(const Coords& xy) {
  const auto n = xy.rows();
  CostMatrix cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = (xy.row(i) - xy.row(j)).norm();
  return cost;
}

int draw_capacity(const CapacityRule& rule, Rng& rng) {
  if (const auto* fixed = std::get_if<FixedCapacity>(&rule)) return fixed->capacity;
  const auto& range = std::get<CapacityRange>(rule);
  return rng.uniform_int(range.low, range.high);
}

int min_capacity(const CapacityRule& rule) {
  if (const auto* fixed = std::get_if<FixedCapacity>(&rule)) return fixed->capacity;
  return std::get<CapacityRange>(rule).low;
}

std::string seed_id(const char* prefix, int n, std::uint64_t seed) {
  return std::string(prefix) + "-n" + std::to_string(n) + "-s" + std::to_string(seed);
}

}  // namespace

void validate(const UniformGenConfig& config) {
  if (config.n_customers < 0) throw Error("n_customers must be non-negative");
  if (config.demand_low < 0 || config.demand_high < config.demand_low)
    throw Error("demand range must satisfy 0 <= low <= high");
  if (const auto* range = std::get_if<CapacityRange>(&config.capacity_rule))
    if (range->high < range->low) throw Error("capacity range is empty");
  if (min_capacity(config.capacity_rule) < std::max(1, config.demand_high))
    throw Error("capacity must be at least demand_high under every rule realization");
  if (!(config.square_side > 0.0)) throw Error("square_side must be positive");
}

void validate(const ClusteredGenConfig& config) {
  if (config.n_customers < 0) throw Error("n_customers must be non-negative");
  if (config.n_clusters < 0) throw Error("n_clusters must be non-negative");
  if (config.depot_pool_size < 1) throw Error("depot_pool_size must be positive");
  if (config.asymmetry_factor < 0.0 || config.asymmetry_factor > 0.5)
    throw Error("asymmetry_factor must lie in [0, 0.5]");
  if (config.detour_noise < 0.0 || config.detour_noise > 1.0)
    throw Error("detour_noise must lie in [0, 1]");
  if (!(config.demand_mean > 0.0)) throw Error("demand_mean must be positive");
  if (config.demand_clip < 1) throw Error("demand_clip must be positive");
  if (config.capacity < config.demand_clip) throw Error("demand_clip must not exceed capacity");
  if (!(config.square_side > 0.0)) throw Error("square_side must be positive");
}

Instance gen_uniform(const UniformGenConfig& config) {
  validate(config);
  Rng rng(config.seed);
  const int n = config.n_customers + 1;
  Instance inst;
  inst.id = seed_id("uniform", config.n_customers, config.seed);
  inst.capacity = draw_capacity(config.capacity_rule, rng);
  Coords xy(n, 2);
  for (int i = 0; i < n; ++i) {
    xy(i, 0) = rng.uniform() * config.square_side;
    xy(i, 1) = rng.uniform() * config.square_side;
  }
  inst.demands.assign(n, 0);
  for (int i = 1; i < n; ++i) inst.demands[i] = rng.uniform_int(config.demand_low, config.demand_high);
  inst.cost = euclidean(xy);
  inst.coords = std::move(xy);
  return inst;
}

Instance gen_clustered(const ClusteredGenConfig& config) {
  validate(config);
  Rng rng(config.seed);
  const int n = config.n_customers + 1;
  const double side = config.square_side;
  const int clusters = config.n_clusters > 0 ? config.n_clusters : std::max(3, config.n_customers / 25);
  const double spread = config.cluster_spread > 0.0 ? config.cluster_spread : 0.03 * side;
  auto clamp = [&](double v) { return std::clamp(v, 0.0, side); };

  Coords centers(clusters, 2);
  std::vector<double> weight(clusters);
  std::vector<double> scale(clusters);
  for (int k = 0; k < clusters; ++k) {
    centers(k, 0) = rng.uniform() * side;
    centers(k, 1) = rng.uniform() * side;
    weight[k] = rng.exponential(1.0);       // uneven cluster populations
    scale[k] = 0.5 + 1.5 * rng.uniform();   // uneven cluster extents
  }
  std::vector<double> cumulative(clusters);
  std::partial_sum(weight.begin(), weight.end(), cumulative.begin());

  Coords pool(config.depot_pool_size, 2);
  for (int k = 0; k < config.depot_pool_size; ++k) {
    pool(k, 0) = rng.uniform() * side;
    pool(k, 1) = rng.uniform() * side;
  }

  Coords xy(n, 2);
  xy.row(0) = pool.row(rng.uniform_int(0, config.depot_pool_size - 1));
  for (int i = 1; i < n; ++i) {
    const double pick = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const int k = std::min<int>(clusters - 1, static_cast<int>(it - cumulative.begin()));
    xy(i, 0) = clamp(centers(k, 0) + spread * scale[k] * rng.normal());
    xy(i, 1) = clamp(centers(k, 1) + spread * scale[k] * rng.normal());
  }

  CostMatrix cost = euclidean(xy);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) cost(i, j) *= 1.0 + rng.uniform() * config.detour_noise;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double skew = config.asymmetry_factor * (2.0 * rng.uniform() - 1.0);
      cost(i, j) *= 1.0 + skew;
      cost(j, i) *= 1.0 - skew;
    }

  Instance inst;
  inst.id = seed_id("clustered", config.n_customers, config.seed);
  inst.capacity = config.capacity;
  inst.demands.assign(n, 0);
  for (int i = 1; i < n; ++i) {
    const double volume = std::ceil(rng.exponential(config.demand_mean));
    inst.demands[i] = static_cast<int>(std::clamp(volume, 1.0, static_cast<double>(config.demand_clip)));
  }
  inst.cost = std::move(cost);
  inst.coords = std::move(xy);
  return inst;
}

std::uint64_t split_seed(std::uint64_t base, DataSplit split, std::uint64_t index) {
  // Disjoint ranges: the top two bits carry the split.
  return (static_cast<std::uint64_t>(split) << 62) |
         (derive_seed(base, index) & ((std::uint64_t{1} << 62) - 1));
}

BudgetAssignment assign_vehicle_budget(const Instance& instance, const RunLimits& probe,
                                       std::uint64_t seed) {
  BudgetAssignment out;
  Instance working = instance;
  working.vehicle_budget = 0;
  validate(working);
  out.lower_bound = vehicle_lower_bound(working);
  if (working.n_customers() == 0) {
    throw NoFeasibleProbe("instance has no customers");
  }

  Rng rng(derive_seed(seed, 1));
  const NeighborLists neighbors = build_neighbors(working, 20);
  const Solution greedy = educate(working, greedy_construct(working), neighbors, kDefaultMoveCap, rng);
  out.greedy_routes = greedy.route_count();
  int best_routes = out.greedy_routes;

  if (out.greedy_routes > out.lower_bound) {
    Instance probe_instance = working;
    probe_instance.vehicle_budget = out.lower_bound;
    GaConfig config;
    config.seed = derive_seed(seed, 2);
    const std::vector<Solution> seeds;
    const RunTrace trace = run(probe_instance, config, seeds, probe);
    if (trace.best) out.probe_routes = trace.best->route_count();
    else if (trace.fewest_routes) out.probe_routes = trace.fewest_routes->route_count();
    if (out.probe_routes) best_routes = std::min(best_routes, *out.probe_routes);
  }
  if (best_routes <= 0) throw NoFeasibleProbe("no probe produced a solution");

  out.rule = best_routes == out.lower_bound ? BudgetRule::LowerBoundAchieved : BudgetRule::BestProbe;
  working.vehicle_budget = best_routes;
  out.instance = std::move(working);
  return out;
}

ParseError::ParseError(const std::string& what, int line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

std::string to_json_text(const Instance& instance) {
  json doc;
  doc["id"] = instance.id;
  doc["n_nodes"] = instance.n_nodes();
  doc["capacity"] = instance.capacity;
  doc["vehicle_budget"] = instance.has_budget() ? json(instance.vehicle_budget) : json(nullptr);
  doc["demands"] = instance.demands;
  json matrix = json::array();
  for (Eigen::Index i = 0; i < instance.cost.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < instance.cost.cols(); ++j) row.push_back(instance.cost(i, j));
    matrix.push_back(std::move(row));
  }
  doc["cost_matrix"] = std::move(matrix);
  if (instance.coords) {
    json pts = json::array();
    for (Eigen::Index i = 0; i < instance.coords->rows(); ++i)
      pts.push_back({(*instance.coords)(i, 0), (*instance.coords)(i, 1)});
    doc["coords"] = std::move(pts);
  }
  return doc.dump(1) + "\n";
}

namespace {

template <typename T>
T required(const json& doc, const char* field) {
  if (!doc.contains(field)) throw ParseError(std::string("missing field '") + field + "'");
  try {
    return doc.at(field).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("field '") + field + "': " + e.what());
  }
}

}  // namespace

Instance instance_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  Instance inst;
  inst.id = required<std::string>(doc, "id");
  const int n = required<int>(doc, "n_nodes");
  inst.capacity = required<int>(doc, "capacity");
  if (doc.contains("vehicle_budget") && !doc["vehicle_budget"].is_null())
    inst.vehicle_budget = required<int>(doc, "vehicle_budget");
  inst.demands = required<std::vector<int>>(doc, "demands");
  if (static_cast<int>(inst.demands.size()) != n)
    throw DimensionMismatch("demands has " + std::to_string(inst.demands.size()) +
                            " entries, n_nodes is " + std::to_string(n));
  const auto rows = required<std::vector<std::vector<double>>>(doc, "cost_matrix");
  if (static_cast<int>(rows.size()) != n)
    throw DimensionMismatch("cost_matrix has " + std::to_string(rows.size()) + " rows, n_nodes is " +
                            std::to_string(n));
  inst.cost.resize(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != n)
      throw DimensionMismatch("cost_matrix row " + std::to_string(i) + " has " +
                              std::to_string(rows[i].size()) + " entries");
    for (int j = 0; j < n; ++j) inst.cost(i, j) = rows[i][j];
  }
  if (doc.contains("coords") && !doc["coords"].is_null()) {
    const auto pts = required<std::vector<std::array<double, 2>>>(doc, "coords");
    if (static_cast<int>(pts.size()) != n) throw DimensionMismatch("coords count differs from n_nodes");
    Coords xy(n, 2);
    for (int i = 0; i < n; ++i) xy.row(i) << pts[i][0], pts[i][1];
    inst.coords = std::move(xy);
  }
  try {
    validate(inst);
  } catch (const InvalidInstance& e) {
    throw ParseError(e.what());
  }
  return inst;
}

void save_instance(const Instance& instance, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json_text(instance);
  if (!out) throw Error("failed writing " + path.string());
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string upper(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

}  // namespace

Instance load_instance(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return instance_from_json_text(text);
  return parse_cvrplib(text, path.stem().string());
}

Instance parse_cvrplib(const std::string& text, const std::string& fallback_name) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::map<std::string, std::string> header;
  int dimension = -1;
  std::vector<std::pair<int, std::array<double, 2>>> coords;
  std::vector<std::pair<int, int>> demands;
  std::vector<double> weights;
  std::vector<int> depots;
  std::string section;
  int section_line = 0;

  auto number = [&](const std::string& token) {
    try {
      std::size_t used = 0;
      const double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      return v;
    } catch (const std::exception&) {
      throw ParseError("expected a number, got '" + token + "'", line_no);
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const std::string key = upper(trimmed);
    if (key == "EOF") break;
    const auto colon = trimmed.find(':');
    const bool is_section = key.ends_with("_SECTION");
    if (!is_section && colon != std::string::npos && !std::isdigit(static_cast<unsigned char>(trimmed[0])) &&
        trimmed[0] != '-') {
      header[upper(trim(trimmed.substr(0, colon)))] = trim(trimmed.substr(colon + 1));
      section.clear();
      if (upper(trim(trimmed.substr(0, colon))) == "DIMENSION")
        dimension = static_cast<int>(number(trim(trimmed.substr(colon + 1))));
      continue;
    }
    if (is_section) {
      section = key;
      section_line = line_no;
      if (section != "NODE_COORD_SECTION" && section != "DEMAND_SECTION" &&
          section != "DEPOT_SECTION" && section != "EDGE_WEIGHT_SECTION")
        throw ParseError("unsupported section " + trimmed, line_no);
      continue;
    }
    std::istringstream fields(trimmed);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (section == "NODE_COORD_SECTION") {
      if (tokens.size() != 3) throw ParseError("NODE_COORD_SECTION expects 'id x y'", line_no);
      coords.push_back({static_cast<int>(number(tokens[0])), {number(tokens[1]), number(tokens[2])}});
    } else if (section == "DEMAND_SECTION") {
      if (tokens.size() != 2) throw ParseError("DEMAND_SECTION expects 'id demand'", line_no);
      demands.push_back({static_cast<int>(number(tokens[0])), static_cast<int>(number(tokens[1]))});
    } else if (section == "DEPOT_SECTION") {
      for (const auto& tok : tokens) {
        const int id = static_cast<int>(number(tok));
        if (id != -1) depots.push_back(id);
      }
    } else if (section == "EDGE_WEIGHT_SECTION") {
      for (const auto& tok : tokens) weights.push_back(number(tok));
    } else {
      throw ParseError("data outside of any section: '" + trimmed + "'", line_no);
    }
  }
  (void)section_line;

  if (dimension <= 0) throw ParseError("missing or invalid DIMENSION");
  if (!header.contains("CAPACITY")) throw ParseError("missing CAPACITY");
  const int n = dimension;
  const std::string type = upper(header.contains("EDGE_WEIGHT_TYPE") ? header["EDGE_WEIGHT_TYPE"] : "");
  if (type != "EUC_2D" && type != "EXPLICIT")
    throw ParseError("EDGE_WEIGHT_TYPE must be EUC_2D or EXPLICIT, got '" + type + "'");
  if (static_cast<int>(demands.size()) != n)
    throw DimensionMismatch("DEMAND_SECTION has " + std::to_string(demands.size()) +
                            " entries, DIMENSION is " + std::to_string(n));
  const int depot = depots.empty() ? 1 : depots.front();
  if (depot < 1 || depot > n) throw ParseError("depot id out of range");

  // File ids are 1-based; node 0 of the model is the depot, the rest keep file order.
  std::vector<int> model_of(n + 1, -1);
  model_of[depot] = 0;
  for (int id = 1, next = 1; id <= n; ++id)
    if (id != depot) model_of[id] = next++;

  Instance inst;
  inst.id = header.contains("NAME") ? header["NAME"] : fallback_name;
  inst.capacity = static_cast<int>(number(header["CAPACITY"]));
  inst.demands.assign(n, 0);
  for (auto [id, d] : demands) {
    if (id < 1 || id > n) throw ParseError("demand id out of range: " + std::to_string(id));
    inst.demands[model_of[id]] = d;
  }
  for (const char* key : {"VEHICLES", "VEHICLE_BUDGET"})
    if (header.contains(key)) inst.vehicle_budget = static_cast<int>(number(header[key]));

  inst.cost.resize(n, n);
  if (type == "EUC_2D") {
    if (static_cast<int>(coords.size()) != n)
      throw DimensionMismatch("NODE_COORD_SECTION has " + std::to_string(coords.size()) +
                              " entries, DIMENSION is " + std::to_string(n));
    Coords xy(n, 2);
    for (auto [id, p] : coords) {
      if (id < 1 || id > n) throw ParseError("coordinate id out of range: " + std::to_string(id));
      xy.row(model_of[id]) << p[0], p[1];
    }
    // TSPLIB convention: nearest integer of the Euclidean distance.
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) inst.cost(i, j) = std::floor((xy.row(i) - xy.row(j)).norm() + 0.5);
    inst.coords = std::move(xy);
  } else {
    const std::string format =
        upper(header.contains("EDGE_WEIGHT_FORMAT") ? header["EDGE_WEIGHT_FORMAT"] : "FULL_MATRIX");
    CostMatrix file(n, n);
    file.setZero();
    std::size_t k = 0;
    auto take = [&]() {
      if (k >= weights.size()) throw DimensionMismatch("EDGE_WEIGHT_SECTION has too few entries");
      return weights[k++];
    };
    if (format == "FULL_MATRIX") {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) file(i, j) = take();
    } else if (format == "LOWER_ROW") {
      for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j) file(i, j) = file(j, i) = take();
    } else if (format == "LOWER_DIAG_ROW") {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) file(i, j) = file(j, i) = take();
    } else if (format == "UPPER_ROW") {
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) file(i, j) = file(j, i) = take();
    } else {
      throw ParseError("unsupported EDGE_WEIGHT_FORMAT " + format);
    }
    if (k != weights.size()) throw DimensionMismatch("EDGE_WEIGHT_SECTION has too many entries");
    for (int id_i = 1; id_i <= n; ++id_i)
      for (int id_j = 1; id_j <= n; ++id_j)
        inst.cost(model_of[id_i], model_of[id_j]) = file(id_i - 1, id_j - 1);
  }
  try {
    validate(inst);
  } catch (const InvalidInstance& e) {
    throw ParseError(e.what());
  }
  return inst;
}

std::string to_json_text(const Solution& solution, const std::string& instance_id) {
  json doc;
  doc["instance_id"] = instance_id;
  doc["routes"] = solution.routes;
  doc["cost"] = solution.cost;
  doc["feasible"] = solution.feasible;
  return doc.dump(1) + "\n";
}

void save_solution(const Solution& solution, const std::string& instance_id,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json_text(solution, instance_id);
}

std::pair<std::string, Solution> load_solution(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  Solution s;
  s.routes = required<Routes>(doc, "routes");
  s.cost = required<double>(doc, "cost");
  s.feasible = required<bool>(doc, "feasible");
  return {required<std::string>(doc, "instance_id"), std::move(s)};
}

std::string digest_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

std::string file_digest(const std::filesystem::path& path) { return digest_hex(read_file(path)); }

}  // namespace warmvrp
