#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "blueprint/cost_model.hpp"
#include "blueprint/graph.hpp"
#include "blueprint/layout.hpp"
#include "blueprint/schedule.hpp"
#include "blueprint/sequencer.hpp"

namespace blueprint {

// How a vote between equally popular layouts is settled.
enum class VoteTieBreak { kEnumerationOrder, kRandom };

struct PlannerOptions {
  int layout_cap = kDefaultLayoutCap;
  VoteTieBreak tie_break = VoteTieBreak::kEnumerationOrder;
  uint64_t seed = 0;
};

// One DP cell: best cumulative cost of reaching an edge in a given layout and
// the choices that achieve it.
struct CostCell {
  double best = 0.0;
  int pred = -1;                          // candidate index on the previous edge
  std::map<std::string, int> side;        // off-sequence input -> candidate index
  std::optional<LoopOrder> loop_order;
};

struct CostTable {
  std::vector<std::string> edges;
  std::vector<std::vector<Layout>> candidates;  // per edge
  std::vector<std::vector<CostCell>> cells;     // per edge, per candidate
};

// Result of scheduling one sequence in isolation.
struct SequencePlan {
  CostTable table;
  // Every tensor this sequence touched (edges and side inputs), with each
  // occurrence's chosen layout. A tensor used by several nodes of the same
  // sequence can appear more than once.
  std::vector<std::pair<std::string, Layout>> choices;
  std::map<std::string, LoopOrder> loop_orders;
  double cost = 0.0;  // DP optimum of the final edge

  // First chosen layout for `tensor`, if the sequence touched it.
  std::optional<Layout> layout(const std::string& tensor) const;
};

std::vector<Layout> candidates_for(const TensorDecl& tensor, const LayoutMap& fixed, int cap);

// Per-sequence dynamic program over candidate layouts: for each edge and
// layout, the minimum over predecessor-edge layouts, free side-input layouts
// and loop orders of the predecessor's best plus the producing kernel's cost.
// Tensors in `fixed` are restricted to that layout.
SequencePlan dp_on_sequence(const Sequence& seq, const Graph& graph, const CostModel& cost, const LayoutMap& fixed,
                            int cap = kDefaultLayoutCap);

struct LoopChoice {
  LoopOrder order;
  double cost = 0.0;
};

// Evaluates all six i/j/k orders at the given layouts; first minimum wins.
LoopChoice search_loop_order(const Graph& graph, const NodeDecl& node, const LayoutMap& layouts,
                             const CostModel& cost);

// Mode of `votes`; ties go to the earliest layout in `candidates` or, in
// random mode, to a uniformly drawn tied layout.
Layout vote(const std::vector<Layout>& votes, const std::vector<Layout>& candidates, VoteTieBreak tie_break,
            std::mt19937_64* rng = nullptr);

// Majority-votes every tensor chosen more than once, re-optimizes the
// sequences that lost a vote with all shared tensors pinned, then re-searches
// loop orders at the final layouts and totals each node exactly once.
Schedule resolve_and_merge(std::vector<SequencePlan> plans, const Decomposition& dec, const Graph& graph,
                           const CostModel& cost, const PlannerOptions& options = {});

// decompose -> dp_on_sequence per sequence -> resolve_and_merge.
Schedule plan_schedule(const Graph& graph, const CostModel& cost, const PlannerOptions& options = {});

double node_cost(const Graph& graph, const NodeDecl& node, const Schedule& schedule, const CostModel& cost);
// Sum of node costs at the scheduled layouts and loop orders, in node order.
double schedule_cost(const Graph& graph, const Schedule& schedule, const CostModel& cost);

}  // namespace blueprint
