#include "warmvrp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "warmvrp/csv.hpp"
#include "warmvrp/greedy.hpp"
#include "warmvrp/instances.hpp"
#include "warmvrp/local_search.hpp"

namespace warmvrp {

using nlohmann::json;

std::vector<MethodSpec> methods_from_json_text(const std::string& text, const std::filesystem::path& base_dir) {
  std::vector<MethodSpec> out;
  try {
    const json doc = json::parse(text);
    for (const json& m : doc.at("methods")) {
      MethodSpec spec;
      spec.name = m.at("name").get<std::string>();
      const auto init = m.at("init").get<std::string>();
      if (init == "random") spec.scheme = InitScheme::Random;
      else if (init == "greedy") spec.scheme = InitScheme::Greedy;
      else if (init == "policy") spec.scheme = InitScheme::Policy;
      else throw Error("method '" + spec.name + "': init must be random, greedy or policy");
      if (m.contains("candidates")) spec.candidates = m.at("candidates").get<int>();
      if (m.contains("temperature")) spec.temperature = m.at("temperature").get<double>();
      if (spec.scheme == InitScheme::Policy) {
        if (!m.contains("params")) throw Error("method '" + spec.name + "': policy init needs 'params'");
        std::filesystem::path p = m.at("params").get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        spec.params = load_params(p);
      }
      for (const MethodSpec& other : out)
        if (other.name == spec.name) throw Error("duplicate method name '" + spec.name + "'");
      out.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("methods file: ") + e.what());
  }
  if (out.empty()) throw Error("methods file lists no methods");
  return out;
}

std::vector<MethodSpec> load_methods(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return methods_from_json_text(buffer.str(), path.parent_path());
}

std::uint64_t cell_seed(std::uint64_t matrix_seed, const std::string& instance_id, const std::string& method) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : instance_id + '\x1f' + method) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return derive_seed(matrix_seed, h);
}

SeedSet make_seeds(const Instance& inst, const MethodSpec& method, const GaConfig& ga, std::uint64_t seed) {
  SeedSet out;
  switch (method.scheme) {
    case InitScheme::Random:
      out.outcome = "random";
      break;
    case InitScheme::Greedy: {
      Rng rng(derive_seed(seed, 1));
      out.solutions.push_back(
          educate(inst, greedy_construct(inst), build_neighbors(inst, ga.granularity), ga.move_cap, rng));
      out.outcome = "greedy";
      break;
    }
    case InitScheme::Policy: {
      if (!method.params) throw Error("method '" + method.name + "' has no policy params");
      InitOutcome init = make_initial_population(inst, *method.params, method.candidates, derive_seed(seed, 2),
                                                 method.temperature);
      out.outcome = to_string(init.kind);
      out.solutions = std::move(init.solutions);
      break;
    }
  }
  return out;
}

namespace {

RecordPoint from_trace(const TracePoint& p, double checkpoint) {
  return {checkpoint, p.best_cost, p.routes, p.feasible};
}

RunRecord run_cell(const Instance& inst, const MethodSpec& method, const MatrixConfig& config) {
  RunRecord rec;
  rec.instance_id = inst.id;
  rec.method = method.name;
  rec.seed = cell_seed(config.seed, inst.id, method.name);
  rec.budget_s = config.total_budget_s;
  const double budget = config.total_budget_s;
  const auto start = std::chrono::steady_clock::now();

  SeedSet seed_set = make_seeds(inst, method, config.ga, rec.seed);
  rec.init_outcome = seed_set.outcome;
  const std::vector<Solution>& seeds = seed_set.solutions;
  rec.init_time_s = config.max_iterations
                        ? 0.0
                        : std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::vector<double> checkpoints;
  for (double c : config.checkpoints)
    if (c <= budget) checkpoints.push_back(c);

  if (rec.init_time_s >= budget) {
    // No time left for the search: the best seed is the result.
    std::optional<Solution> best;
    for (const Solution& s : seeds) {
      const Solution e = evaluate(inst, s.routes);
      if (hierarchical_compare(std::optional<Solution>(e), best) < 0) best = e;
    }
    for (double c : checkpoints) rec.points.push_back({c, std::nullopt, 0, false});
    RecordPoint last{budget, std::nullopt, best ? best->route_count() : 0, false};
    if (best && best->feasible) {
      last.cost = best->cost;
      last.feasible = true;
    }
    rec.points.push_back(last);
    return rec;
  }

  GaConfig ga = config.ga;
  ga.seed = derive_seed(rec.seed, 3);
  ga.checkpoint_times.clear();
  for (double c : checkpoints)
    if (c >= rec.init_time_s) ga.checkpoint_times.push_back(c - rec.init_time_s);
  RunLimits limits{budget - rec.init_time_s, config.max_iterations};
  const RunTrace trace = run(inst, ga, seeds, limits);

  std::size_t k = 0;
  for (double c : checkpoints) {
    if (c < rec.init_time_s) rec.points.push_back({c, std::nullopt, 0, false});
    else rec.points.push_back(from_trace(trace.points.at(k++), c));
  }
  rec.ga_elapsed_s = trace.elapsed_s;
  rec.points.push_back(from_trace(trace.points.back(), rec.init_time_s + trace.elapsed_s));
  return rec;
}

}  // namespace

std::vector<RunRecord> run_matrix(std::span<const Instance> instances, std::span<const MethodSpec> methods,
                                  const MatrixConfig& config) {
  if (instances.empty() || methods.empty()) throw Error("run_matrix needs instances and methods");
  if (!(config.total_budget_s > 0.0)) throw Error("total budget must be positive");
  std::set<std::string> names;
  for (const MethodSpec& m : methods)
    if (!names.insert(m.name).second) throw Error("duplicate method name '" + m.name + "'");

  const std::size_t cells = instances.size() * methods.size();
  std::vector<RunRecord> records(cells);
  auto work = [&](std::size_t i) {
    const Instance& inst = instances[i / methods.size()];
    const MethodSpec& method = methods[i % methods.size()];
    try {
      records[i] = run_cell(inst, method, config);
    } catch (const std::exception& e) {
      RunRecord failed;
      failed.instance_id = inst.id;
      failed.method = method.name;
      failed.seed = cell_seed(config.seed, inst.id, method.name);
      failed.budget_s = config.total_budget_s;
      failed.error = e.what();
      records[i] = std::move(failed);
    }
  };
  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells; i = next++) work(i);
      });
    for (auto& th : pool) th.join();
  }
  return records;
}

std::optional<double> cost_at(const RunRecord& record, double checkpoint) {
  const RecordPoint* last = nullptr;
  for (const RecordPoint& p : record.points)
    if (p.checkpoint_s <= checkpoint && (!last || p.checkpoint_s >= last->checkpoint_s)) last = &p;
  if (!last || !last->feasible) return std::nullopt;
  return last->cost;
}

void write_records_csv(std::ostream& out, std::span<const RunRecord> records) {
  out << "instance_id,method,seed,budget_s,init_time_s,checkpoint_s,cost,routes,feasible\n";
  for (const RunRecord& r : records)
    for (const RecordPoint& p : r.points)
      out << r.instance_id << ',' << r.method << ',' << r.seed << ',' << csv::format_double(r.budget_s) << ','
          << csv::format_double(r.init_time_s) << ',' << csv::format_double(p.checkpoint_s) << ','
          << csv::format_optional(p.cost) << ',' << p.routes << ',' << (p.feasible ? 1 : 0) << '\n';
}

std::vector<RunRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("records file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "instance_id,method,seed,budget_s,init_time_s,checkpoint_s,cost,routes,feasible")
    throw Error("records file has an unexpected header: " + line);
  std::vector<RunRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    if (f.size() != 9) throw Error("records line " + std::to_string(line_no) + ": expected 9 fields");
    try {
      const std::uint64_t seed = csv::parse_u64(f[2]);
      if (out.empty() || out.back().instance_id != f[0] || out.back().method != f[1] || out.back().seed != seed) {
        RunRecord r;
        r.instance_id = f[0];
        r.method = f[1];
        r.seed = seed;
        r.budget_s = csv::parse_double(f[3]);
        r.init_time_s = csv::parse_double(f[4]);
        out.push_back(std::move(r));
      }
      out.back().points.push_back({csv::parse_double(f[5]), csv::parse_optional(f[6]),
                                   static_cast<int>(csv::parse_long(f[7])), csv::parse_long(f[8]) != 0});
    } catch (const Error& e) {
      throw Error("records line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::optional<double> best_known(std::span<const RunRecord> records, const std::string& instance_id) {
  std::optional<double> best;
  for (const RunRecord& r : records) {
    if (r.instance_id != instance_id) continue;
    for (const RecordPoint& p : r.points)
      if (p.feasible && p.cost && (!best || *p.cost < *best)) best = p.cost;
  }
  return best;
}

double gap(double cost, double best) {
  if (!(best > 0.0)) throw NonPositiveBest("best-known cost must be positive");
  return (cost - best) / best;
}

namespace {

std::vector<std::string> instance_order(std::span<const RunRecord> records) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const RunRecord& r : records)
    if (seen.insert(r.instance_id).second) ids.push_back(r.instance_id);
  return ids;
}

const RunRecord* find_record(std::span<const RunRecord> records, const std::string& id, const std::string& method) {
  for (const RunRecord& r : records)
    if (r.instance_id == id && r.method == method) return &r;
  return nullptr;
}

}  // namespace

std::vector<GapPoint> mean_gap_curve(std::span<const RunRecord> records, std::span<const std::string> methods,
                                     std::span<const double> checkpoints) {
  const std::vector<std::string> ids = instance_order(records);
  std::map<std::string, std::optional<double>> best;
  for (const auto& id : ids) best[id] = best_known(records, id);

  std::vector<GapPoint> out;
  for (double c : checkpoints) {
    std::vector<std::string> keep;
    for (const auto& id : ids) {
      bool all = !methods.empty();
      for (const auto& m : methods) {
        const RunRecord* r = find_record(records, id, m);
        all = all && r && cost_at(*r, c).has_value();
      }
      if (all) keep.push_back(id);
    }
    for (const auto& m : methods) {
      GapPoint p;
      p.method = m;
      p.checkpoint_s = c;
      p.instances = keep;
      for (const auto& id : keep) p.gaps.push_back(gap(*cost_at(*find_record(records, id, m), c), *best[id]));
      if (!p.gaps.empty())
        p.mean_gap = std::accumulate(p.gaps.begin(), p.gaps.end(), 0.0) / static_cast<double>(p.gaps.size());
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::pair<double, double> bootstrap_ci(std::span<const double> samples, double level, int resamples,
                                       std::uint64_t seed) {
  if (samples.empty()) throw Error("bootstrap needs at least one sample");
  if (!(level > 0.0 && level < 1.0)) throw Error("confidence level must lie in (0, 1)");
  if (resamples < 1) throw Error("resamples must be positive");
  Rng rng(seed);
  const int n = static_cast<int>(samples.size());
  std::vector<double> means(resamples);
  for (double& m : means) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += samples[rng.uniform_int(0, n - 1)];
    m = s / n;
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  const auto lo = static_cast<std::size_t>(std::floor(alpha * resamples));
  const auto hi = static_cast<std::size_t>(
      std::clamp<double>(std::ceil((1.0 - alpha) * resamples) - 1.0, 0.0, resamples - 1.0));
  return {means[std::min(lo, means.size() - 1)], means[hi]};
}

WinRatio win_ratio(std::span<const RunRecord> records, const std::string& method_a, const std::string& method_b,
                   double checkpoint) {
  WinRatio w;
  for (const auto& id : instance_order(records)) {
    const RunRecord* a = find_record(records, id, method_a);
    const RunRecord* b = find_record(records, id, method_b);
    if (!a || !b) continue;
    const auto order = hierarchical_compare(cost_at(*a, checkpoint), cost_at(*b, checkpoint));
    if (order < 0) ++w.a_wins;
    else if (order > 0) ++w.b_wins;
    else ++w.ties;
  }
  w.decisive = w.a_wins + w.b_wins;
  if (w.decisive == 0) throw NoDecisive("no decisive instance between " + method_a + " and " + method_b);
  w.ratio = static_cast<double>(w.a_wins) / w.decisive;
  return w;
}

double sign_test_p(int wins, int decisive) {
  if (decisive < 0 || wins < 0 || wins > decisive) throw Error("sign test needs 0 <= wins <= decisive");
  double p = 0.0;
  const double lg_n = std::lgamma(decisive + 1.0);
  for (int k = wins; k <= decisive; ++k)
    p += std::exp(lg_n - std::lgamma(k + 1.0) - std::lgamma(decisive - k + 1.0) - decisive * std::log(2.0));
  return std::min(1.0, p);
}

BenchReport report(std::span<const RunRecord> records, const ReportSpec& spec) {
  std::vector<RunRecord> ok;
  for (const RunRecord& r : records)
    if (r.error.empty()) ok.push_back(r);
  if (ok.empty()) throw Error("no records to report on");

  std::vector<std::string> methods = spec.methods;
  if (methods.empty()) {
    std::set<std::string> seen;
    for (const RunRecord& r : ok)
      if (seen.insert(r.method).second) methods.push_back(r.method);
  }
  std::vector<double> checkpoints = spec.checkpoints;
  if (checkpoints.empty()) {
    // Checkpoints present in every record (final points vary per run).
    std::map<double, std::size_t> count;
    for (const RunRecord& r : ok) {
      std::set<double> mine;
      for (const RecordPoint& p : r.points) mine.insert(p.checkpoint_s);
      for (double c : mine) ++count[c];
    }
    for (const auto& [c, n] : count)
      if (n == ok.size()) checkpoints.push_back(c);
  }

  BenchReport rep;
  const auto curve = mean_gap_curve(ok, methods, checkpoints);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const GapPoint& p = curve[i];
    GapRow row{p.method, p.checkpoint_s, p.mean_gap, std::nullopt, std::nullopt, static_cast<int>(p.gaps.size())};
    if (!p.gaps.empty()) {
      const auto [lo, hi] = bootstrap_ci(p.gaps, spec.ci_level, spec.resamples, derive_seed(spec.seed, i));
      row.ci_low = lo;
      row.ci_high = hi;
    }
    rep.gap_curve.push_back(row);
  }
  for (const auto& a : methods)
    for (const auto& b : methods) {
      if (a == b) continue;
      for (double c : checkpoints) {
        WinRow row{a, b, c, std::nullopt, std::nullopt};
        try {
          row.result = win_ratio(ok, a, b, c);
          row.p_value = sign_test_p(row.result->a_wins, row.result->decisive);
        } catch (const NoDecisive&) {
        }
        rep.win_ratios.push_back(row);
      }
    }
  const auto ids = instance_order(ok);
  if (std::find(methods.begin(), methods.end(), spec.baseline) != methods.end())
    for (const auto& m : methods) {
      if (m == spec.baseline) continue;
      for (double c : checkpoints)
        for (const auto& id : ids) {
          const RunRecord* r = find_record(ok, id, m);
          const RunRecord* base = find_record(ok, id, spec.baseline);
          rep.scatter.push_back({id, m, spec.baseline, c, r ? cost_at(*r, c) : std::nullopt,
                                 base ? cost_at(*base, c) : std::nullopt});
        }
    }
  for (const auto& m : methods)
    for (double c : checkpoints) {
      int n = 0, feasible = 0;
      for (const RunRecord& r : ok) {
        if (r.method != m) continue;
        ++n;
        if (cost_at(r, c)) ++feasible;
      }
      rep.feasibility.push_back({m, c, n > 0 ? static_cast<double>(feasible) / n : 0.0, n});
    }
  return rep;
}

void write_report(const BenchReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
  };
  using csv::format_double;
  using csv::format_optional;
  {
    auto out = open("gap_curve.csv");
    out << "method,checkpoint_s,mean_gap,ci_low,ci_high,n_used\n";
    for (const auto& r : rep.gap_curve)
      out << r.method << ',' << format_double(r.checkpoint_s) << ',' << format_optional(r.mean_gap) << ','
          << format_optional(r.ci_low) << ',' << format_optional(r.ci_high) << ',' << r.n_used << '\n';
  }
  {
    auto out = open("win_ratio.csv");
    out << "method_a,method_b,checkpoint_s,a_wins,b_wins,ties,decisive,win_ratio,sign_test_p\n";
    for (const auto& r : rep.win_ratios) {
      out << r.method_a << ',' << r.method_b << ',' << format_double(r.checkpoint_s) << ',';
      if (r.result)
        out << r.result->a_wins << ',' << r.result->b_wins << ',' << r.result->ties << ',' << r.result->decisive
            << ',' << format_double(r.result->ratio) << ',' << format_optional(r.p_value) << '\n';
      else
        out << "0,0,NA,0,NA,NA\n";
    }
  }
  {
    auto out = open("scatter.csv");
    out << "instance_id,method,baseline,checkpoint_s,cost,baseline_cost\n";
    for (const auto& r : rep.scatter)
      out << r.instance_id << ',' << r.method << ',' << r.baseline << ',' << format_double(r.checkpoint_s) << ','
          << format_optional(r.cost) << ',' << format_optional(r.baseline_cost) << '\n';
  }
  {
    auto out = open("feasibility.csv");
    out << "method,checkpoint_s,feasible_rate,n_instances\n";
    for (const auto& r : rep.feasibility)
      out << r.method << ',' << format_double(r.checkpoint_s) << ',' << format_double(r.rate) << ','
          << r.n_instances << '\n';
  }
}

}  // namespace warmvrp
