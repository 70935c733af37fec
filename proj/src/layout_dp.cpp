#include "blueprint/layout_dp.hpp"

#include <algorithm>
#include <exception>
#include <limits>
#include <set>

#include "blueprint/error.hpp"

namespace blueprint {

namespace {

void check_sequence(const Sequence& seq, const Graph& g) {
  auto mismatch = [](const std::string& why) { throw PlanningError("sequence/graph mismatch: " + why); };
  if (seq.nodes.empty()) mismatch("empty sequence");
  if (seq.nodes.size() != seq.edges.size()) mismatch("node and edge counts differ");
  for (size_t i = 0; i < seq.nodes.size(); ++i) {
    const TensorDecl* t = g.find_tensor(seq.edges[i]);
    if (!t) mismatch("unknown edge '" + seq.edges[i] + "'");
    int idx = -1;
    try {
      idx = g.node_index(seq.nodes[i]);
    } catch (const ValidationError&) {
      mismatch("unknown node '" + seq.nodes[i] + "'");
    }
    if (g.nodes()[idx].output() != seq.edges[i]) mismatch("edge '" + seq.edges[i] + "' is not produced by '" + seq.nodes[i] + "'");
    if (i + 1 < seq.nodes.size()) {
      const auto& next_inputs = g.node(seq.nodes[i + 1]).inputs;
      if (std::find(next_inputs.begin(), next_inputs.end(), seq.edges[i]) == next_inputs.end())
        mismatch("'" + seq.nodes[i + 1] + "' does not consume '" + seq.edges[i] + "'");
    }
  }
}

// Mixed-radix counter over candidate lists; digit 0 varies slowest.
bool advance(std::vector<int>& digits, const std::vector<int>& radix) {
  for (int d = static_cast<int>(digits.size()) - 1; d >= 0; --d) {
    if (++digits[d] < radix[d]) return true;
    digits[d] = 0;
  }
  return false;
}

}  // namespace

std::optional<Layout> SequencePlan::layout(const std::string& tensor) const {
  for (const auto& [name, layout] : choices)
    if (name == tensor) return layout;
  return std::nullopt;
}

std::vector<Layout> candidates_for(const TensorDecl& t, const LayoutMap& fixed, int cap) {
  if (auto it = fixed.find(t.name); it != fixed.end()) return {it->second};
  return candidate_layouts(t, cap);
}

SequencePlan dp_on_sequence(const Sequence& seq, const Graph& g, const CostModel& cost, const LayoutMap& fixed,
                            int cap) {
  check_sequence(seq, g);
  for (const auto& [name, layout] : fixed) {
    const TensorDecl* t = g.find_tensor(name);
    if (!t) throw PlanningError("pinned layout for unknown tensor '" + name + "'");
    auto cands = candidate_layouts(*t, cap);
    if (std::find(cands.begin(), cands.end(), layout) == cands.end())
      throw PlanningError("pinned layout " + to_string(layout) + " for '" + name + "' is not a candidate");
  }

  const size_t m = seq.nodes.size();
  SequencePlan plan;
  CostTable& table = plan.table;
  table.edges = seq.edges;
  table.candidates.resize(m);
  table.cells.resize(m);
  std::vector<std::vector<std::string>> side_names(m);
  std::vector<std::vector<std::vector<Layout>>> side_cands(m);

  for (size_t i = 0; i < m; ++i) {
    const NodeDecl& node = g.node(seq.nodes[i]);
    const std::string& out = seq.edges[i];
    const std::string pred = i ? seq.edges[i - 1] : std::string();

    std::set<std::string> seen = {out};
    if (i) seen.insert(pred);
    for (const auto& in : node.inputs)
      if (seen.insert(in).second) {
        side_names[i].push_back(in);
        side_cands[i].push_back(candidates_for(g.tensor(in), fixed, cap));
      }
    table.candidates[i] = candidates_for(g.tensor(out), fixed, cap);

    std::vector<int> radix;
    for (const auto& c : side_cands[i]) radix.push_back(static_cast<int>(c.size()));
    std::vector<std::optional<LoopOrder>> orders = {std::nullopt};
    if (reorderable(node.op)) orders.assign(LoopOrder::all().begin(), LoopOrder::all().end());
    const int npred = i ? static_cast<int>(table.candidates[i - 1].size()) : 1;

    LayoutMap current;
    auto lookup = [&](const std::string& name) -> const Layout& { return current.at(name); };
    auto& cells = table.cells[i];
    cells.resize(table.candidates[i].size());
    for (size_t li = 0; li < table.candidates[i].size(); ++li) {
      current[out] = table.candidates[i][li];
      CostCell& cell = cells[li];
      cell.best = std::numeric_limits<double>::infinity();
      for (int pi = 0; pi < npred; ++pi) {
        double base = 0.0;
        if (i) {
          current[pred] = table.candidates[i - 1][pi];
          base = table.cells[i - 1][pi].best;
        }
        std::vector<int> digits(radix.size(), 0);
        do {
          for (size_t s = 0; s < digits.size(); ++s) current[side_names[i][s]] = side_cands[i][s][digits[s]];
          for (const auto& order : orders) {
            double total = base + cost.cost(make_query(g, node, lookup, order));
            if (total < cell.best) {
              cell.best = total;
              cell.pred = i ? pi : -1;
              cell.side.clear();
              for (size_t s = 0; s < digits.size(); ++s) cell.side[side_names[i][s]] = digits[s];
              cell.loop_order = order;
            }
          }
        } while (advance(digits, radix));
      }
    }
  }

  // Pick the cheapest final layout and walk the back-pointers.
  const auto& last = table.cells[m - 1];
  int li = 0;
  for (int c = 1; c < static_cast<int>(last.size()); ++c)
    if (last[c].best < last[li].best) li = c;
  plan.cost = last[li].best;

  std::vector<std::vector<std::pair<std::string, Layout>>> per_node(m);
  for (int i = static_cast<int>(m) - 1; i >= 0; --i) {
    const CostCell& cell = table.cells[i][li];
    per_node[i].emplace_back(seq.edges[i], table.candidates[i][li]);
    for (size_t s = 0; s < side_names[i].size(); ++s)
      per_node[i].emplace_back(side_names[i][s], side_cands[i][s][cell.side.at(side_names[i][s])]);
    if (cell.loop_order) plan.loop_orders[seq.nodes[i]] = *cell.loop_order;
    li = cell.pred;
  }
  for (auto& occ : per_node)
    for (auto& c : occ) plan.choices.push_back(std::move(c));
  return plan;
}

LoopChoice search_loop_order(const Graph& g, const NodeDecl& node, const LayoutMap& layouts, const CostModel& cost) {
  if (!reorderable(node.op))
    throw PlanningError("loop-order search does not apply to " + std::string(op_name(node.op)) + " node '" +
                        node.name + "'");
  auto lookup = [&](const std::string& name) -> const Layout& {
    auto it = layouts.find(name);
    if (it == layouts.end()) throw PlanningError("no layout for tensor '" + name + "'");
    return it->second;
  };
  LoopChoice best{LoopOrder(), std::numeric_limits<double>::infinity()};
  for (const LoopOrder& order : LoopOrder::all()) {
    double c = cost.cost(make_query(g, node, lookup, order));
    if (c < best.cost) best = {order, c};
  }
  return best;
}

Layout vote(const std::vector<Layout>& votes, const std::vector<Layout>& candidates, VoteTieBreak tie_break,
            std::mt19937_64* rng) {
  std::vector<int> counts(candidates.size(), 0);
  for (const Layout& v : votes) {
    auto it = std::find(candidates.begin(), candidates.end(), v);
    if (it == candidates.end()) throw PlanningError("vote for non-candidate layout " + to_string(v));
    ++counts[it - candidates.begin()];
  }
  const int top = *std::max_element(counts.begin(), counts.end());
  std::vector<size_t> tied;
  for (size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == top) tied.push_back(c);
  if (tie_break == VoteTieBreak::kRandom && rng && tied.size() > 1) {
    std::uniform_int_distribution<size_t> pick(0, tied.size() - 1);
    return candidates[tied[pick(*rng)]];
  }
  return candidates[tied.front()];
}

Schedule resolve_and_merge(std::vector<SequencePlan> plans, const Decomposition& dec, const Graph& g,
                           const CostModel& cost, const PlannerOptions& options) {
  if (plans.size() != dec.sequences.size()) throw PlanningError("every sequence must be scheduled exactly once");

  std::map<std::string, std::vector<Layout>> occurrences;
  for (const SequencePlan& p : plans)
    for (const auto& [name, layout] : p.choices) occurrences[name].push_back(layout);

  std::mt19937_64 rng(options.seed);
  LayoutMap resolved;
  for (const auto& [name, votes] : occurrences)
    if (votes.size() > 1)
      resolved[name] = vote(votes, candidate_layouts(g.tensor(name), options.layout_cap), options.tie_break, &rng);

  for (size_t s = 0; s < plans.size(); ++s) {
    bool lost = false;
    for (const auto& [name, layout] : plans[s].choices)
      if (auto it = resolved.find(name); it != resolved.end() && it->second != layout) lost = true;
    if (lost) plans[s] = dp_on_sequence(dec.sequences[s], g, cost, resolved, options.layout_cap);
  }

  Schedule schedule;
  for (const TensorDecl& t : g.tensors()) {
    if (t.rank() == 0) continue;
    if (auto it = resolved.find(t.name); it != resolved.end()) {
      schedule.layout[t.name] = it->second;
      continue;
    }
    std::optional<Layout> chosen;
    for (const SequencePlan& p : plans)
      if ((chosen = p.layout(t.name))) break;
    schedule.layout[t.name] = chosen.value_or(Layout::identity(t.rank()));
  }
  LayoutMap all = schedule.layout;
  for (const TensorDecl& t : g.tensors())
    if (t.rank() == 0) all[t.name] = Layout{};
  for (const NodeDecl& n : g.nodes())
    if (reorderable(n.op)) schedule.loop_order[n.name] = search_loop_order(g, n, all, cost).order;
  schedule.predicted_cost = schedule_cost(g, schedule, cost);
  return schedule;
}

Schedule plan_schedule(const Graph& g, const CostModel& cost, const PlannerOptions& options) {
  Decomposition dec = decompose(g);
  const int count = static_cast<int>(dec.sequences.size());
  std::vector<SequencePlan> plans(count);
  std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < count; ++s) {
    try {
      plans[s] = dp_on_sequence(dec.sequences[s], g, cost, {}, options.layout_cap);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return resolve_and_merge(std::move(plans), dec, g, cost, options);
}

double node_cost(const Graph& g, const NodeDecl& node, const Schedule& schedule, const CostModel& cost) {
  std::map<std::string, Layout> local;
  for (const auto& in : node.inputs) local[in] = layout_of(schedule, g.tensor(in));
  local[node.output()] = layout_of(schedule, g.tensor(node.output()));
  std::optional<LoopOrder> order;
  if (reorderable(node.op)) {
    auto it = schedule.loop_order.find(node.name);
    order = it == schedule.loop_order.end() ? LoopOrder() : it->second;
  }
  return cost.cost(make_query(g, node, [&](const std::string& n) -> const Layout& { return local.at(n); }, order));
}

double schedule_cost(const Graph& g, const Schedule& schedule, const CostModel& cost) {
  double total = 0.0;
  for (const NodeDecl& n : g.nodes()) total += node_cost(g, n, schedule, cost);
  return total;
}

}  // namespace blueprint
