#include "blueprint/oracles.hpp"

#include <algorithm>
#include <exception>
#include <limits>

#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "blueprint/error.hpp"
#include "blueprint/plan_io.hpp"

namespace blueprint {

namespace {

constexpr uint64_t kSaturated = std::numeric_limits<uint64_t>::max();

uint64_t saturating_mul(uint64_t a, uint64_t b) {
  if (a != 0 && b > kSaturated / a) return kSaturated;
  return a * b;
}

// Exact local minimum of one node's cost for every assignment of the tensors
// it shares with other nodes.
struct NodeTable {
  std::vector<int> coupled;   // indices into the enumerated-tensor list
  std::vector<int64_t> mult;  // mixed-radix weight per coupled tensor
  std::vector<std::string> folded;
  std::vector<double> best;
  std::vector<std::vector<int>> folded_choice;
  std::vector<std::optional<LoopOrder>> order_choice;
};

struct Candidate {
  double cost = std::numeric_limits<double>::infinity();
  uint64_t index = kSaturated;

  bool better_than(const Candidate& o) const { return cost < o.cost || (cost == o.cost && index < o.index); }
};

bool advance(std::vector<int>& digits, const std::vector<int>& radix) {
  for (int d = static_cast<int>(digits.size()) - 1; d >= 0; --d) {
    if (++digits[d] < radix[d]) return true;
    digits[d] = 0;
  }
  return false;
}

Candidate scan(uint64_t begin, uint64_t end, const std::vector<int>& radix, const std::vector<NodeTable>& tables) {
  Candidate best;
  if (begin >= end) return best;
  std::vector<int> digits(radix.size(), 0);
  uint64_t rest = begin;
  for (int d = static_cast<int>(radix.size()) - 1; d >= 0; --d) {
    digits[d] = static_cast<int>(rest % radix[d]);
    rest /= radix[d];
  }
  for (uint64_t c = begin; c < end; ++c) {
    double total = 0.0;
    for (const NodeTable& t : tables) {
      int64_t idx = 0;
      for (size_t j = 0; j < t.coupled.size(); ++j) idx += digits[t.coupled[j]] * t.mult[j];
      total += t.best[idx];
    }
    if (total < best.cost) best = {total, c};
    advance(digits, radix);
  }
  return best;
}

}  // namespace

BruteForceResult brute_force_schedule(const Graph& g, const CostModel& cost, uint64_t budget, int cap,
                                      Parallelism parallelism) {
  const auto& nodes = g.nodes();
  std::map<std::string, int> touch;
  std::vector<std::vector<std::string>> node_tensors(nodes.size());
  for (size_t n = 0; n < nodes.size(); ++n) {
    for (const auto& in : nodes[n].inputs)
      if (std::find(node_tensors[n].begin(), node_tensors[n].end(), in) == node_tensors[n].end())
        node_tensors[n].push_back(in);
    node_tensors[n].push_back(nodes[n].output());
    for (const auto& t : node_tensors[n]) ++touch[t];
  }

  std::map<std::string, std::vector<Layout>> cands;
  BruteForceResult result;
  std::vector<std::string> enumerated;
  std::map<std::string, int> enum_index;
  for (const TensorDecl& t : g.tensors()) {
    cands[t.name] = candidate_layouts(t, cap);
    result.nominal_configurations = saturating_mul(result.nominal_configurations, cands[t.name].size());
    if (touch[t.name] >= 2) {
      enum_index[t.name] = static_cast<int>(enumerated.size());
      enumerated.push_back(t.name);
      result.enumerated_configurations = saturating_mul(result.enumerated_configurations, cands[t.name].size());
    }
  }
  for (const NodeDecl& n : nodes)
    if (reorderable(n.op)) result.nominal_configurations = saturating_mul(result.nominal_configurations, 6);
  if (result.enumerated_configurations > budget) throw BudgetExceeded(result.enumerated_configurations, budget);

  std::vector<NodeTable> tables(nodes.size());
  std::vector<std::exception_ptr> errors(nodes.size());
  const int node_count = static_cast<int>(nodes.size());
  const bool parallel = parallelism == Parallelism::kOpenMP;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int n = 0; n < node_count; ++n) {
    try {
      NodeTable& t = tables[n];
      std::vector<int> coupled_radix, folded_radix;
      std::vector<std::string> coupled_names;
      for (const auto& name : node_tensors[n]) {
        if (auto it = enum_index.find(name); it != enum_index.end()) {
          t.coupled.push_back(it->second);
          coupled_names.push_back(name);
          coupled_radix.push_back(static_cast<int>(cands.at(name).size()));
        } else {
          t.folded.push_back(name);
          folded_radix.push_back(static_cast<int>(cands.at(name).size()));
        }
      }
      t.mult.assign(t.coupled.size(), 1);
      int64_t size = 1;
      for (int j = static_cast<int>(t.coupled.size()) - 1; j >= 0; --j) {
        t.mult[j] = size;
        size *= coupled_radix[j];
      }
      t.best.assign(size, std::numeric_limits<double>::infinity());
      t.folded_choice.assign(size, {});
      t.order_choice.assign(size, std::nullopt);

      std::vector<std::optional<LoopOrder>> orders = {std::nullopt};
      if (reorderable(nodes[n].op)) orders.assign(LoopOrder::all().begin(), LoopOrder::all().end());
      std::map<std::string, Layout> current;
      auto lookup = [&](const std::string& name) -> const Layout& { return current.at(name); };

      std::vector<int> cd(coupled_radix.size(), 0);
      int64_t idx = 0;
      do {
        for (size_t j = 0; j < cd.size(); ++j) current[coupled_names[j]] = cands.at(coupled_names[j])[cd[j]];
        std::vector<int> fd(folded_radix.size(), 0);
        do {
          for (size_t j = 0; j < fd.size(); ++j) current[t.folded[j]] = cands.at(t.folded[j])[fd[j]];
          for (const auto& order : orders) {
            double c = cost.cost(make_query(g, nodes[n], lookup, order));
            if (c < t.best[idx]) {
              t.best[idx] = c;
              t.folded_choice[idx] = fd;
              t.order_choice[idx] = order;
            }
          }
        } while (advance(fd, folded_radix));
        ++idx;
      } while (advance(cd, coupled_radix));
    } catch (...) {
      errors[n] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<int> radix;
  for (const auto& name : enumerated) radix.push_back(static_cast<int>(cands.at(name).size()));
  const uint64_t total = result.enumerated_configurations;

  Candidate best;
  if (parallel) {
    int chunks = 1;
#ifdef _OPENMP
    chunks = std::max(1, omp_get_max_threads() * 4);
#endif
    chunks = static_cast<int>(std::min<uint64_t>(chunks, total));
    std::vector<Candidate> partial(chunks);
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < chunks; ++k) {
      uint64_t lo = total * k / chunks, hi = total * (k + 1) / chunks;
      partial[k] = scan(lo, hi, radix, tables);
    }
    for (const Candidate& c : partial)
      if (c.better_than(best)) best = c;
  } else {
    best = scan(0, total, radix, tables);
  }

  // Decode the winning configuration back into a schedule.
  std::vector<int> digits(radix.size(), 0);
  uint64_t rest = best.index;
  for (int d = static_cast<int>(radix.size()) - 1; d >= 0; --d) {
    digits[d] = static_cast<int>(rest % radix[d]);
    rest /= radix[d];
  }
  LayoutMap chosen;
  for (size_t e = 0; e < enumerated.size(); ++e) chosen[enumerated[e]] = cands.at(enumerated[e])[digits[e]];
  for (size_t n = 0; n < nodes.size(); ++n) {
    const NodeTable& t = tables[n];
    int64_t idx = 0;
    for (size_t j = 0; j < t.coupled.size(); ++j) idx += digits[t.coupled[j]] * t.mult[j];
    for (size_t j = 0; j < t.folded.size(); ++j) chosen[t.folded[j]] = cands.at(t.folded[j])[t.folded_choice[idx][j]];
    if (t.order_choice[idx]) result.schedule.loop_order[nodes[n].name] = *t.order_choice[idx];
  }
  for (const TensorDecl& t : g.tensors()) {
    if (t.rank() == 0) continue;
    auto it = chosen.find(t.name);
    result.schedule.layout[t.name] = it == chosen.end() ? Layout::identity(t.rank()) : it->second;
  }
  result.cost = nodes.empty() ? 0.0 : best.cost;
  result.schedule.predicted_cost = result.cost;
  return result;
}

OracleReport compare(const Graph& g, const CostModel& cost, const PlannerOptions& options, uint64_t budget) {
  OracleReport report;
  BruteForceResult bf = brute_force_schedule(g, cost, budget, options.layout_cap);
  report.planner = plan_schedule(g, cost, options);
  report.optimal = bf.schedule;
  report.optimal_cost = bf.cost;
  report.planner_cost = report.planner.predicted_cost;
  if (report.optimal_cost > 0.0)
    report.ratio = report.planner_cost / report.optimal_cost;
  else
    report.ratio = report.planner_cost == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  report.node_count = static_cast<int>(g.nodes().size());
  report.tensor_count = static_cast<int>(g.tensors().size());
  report.nominal_configurations = bf.nominal_configurations;
  report.enumerated_configurations = bf.enumerated_configurations;
  return report;
}

std::string oracle_report_json(const OracleReport& r) {
  nlohmann::json j;
  j["optimal_cost"] = r.optimal_cost;
  j["planner_cost"] = r.planner_cost;
  j["ratio"] = r.ratio;
  j["optimal_assignment"] = schedule_json(r.optimal);
  j["planner_assignment"] = schedule_json(r.planner);
  j["instance_summary"] = {{"nodes", r.node_count},
                           {"tensors", r.tensor_count},
                           {"nominal_configurations", r.nominal_configurations},
                           {"enumerated_configurations", r.enumerated_configurations}};
  return j.dump(2);
}

}  // namespace blueprint
