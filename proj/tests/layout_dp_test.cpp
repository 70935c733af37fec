#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "blueprint/error.hpp"
#include "blueprint/layout_dp.hpp"
#include "test_support.hpp"

using namespace blueprint;
using bptest::GraphBuilder;

namespace {

// 10 when every operand is row-major, 20 otherwise.
class RowMajorPreferring final : public CostModel {
 public:
  double cost(const CostQuery& q) const override {
    bool all = q.output_layout.is_identity();
    for (const Layout& l : q.input_layouts) all = all && l.is_identity();
    return all ? 10.0 : 20.0;
  }
  CostModelKind kind() const override { return CostModelKind::kAnalytic; }
};

Graph single_matmul(int64_t m = 4, int64_t k = 3, int64_t n = 5) {
  return GraphBuilder()
      .input("A", {m, k})
      .constant("B", {k, n})
      .output("C", {m, n})
      .node("mm", OpKind::kMatMul, {"A", "B"}, "C")
      .build();
}

// x -> mm(x, W1) -> h -> relu -> y
Graph two_node_chain() {
  return GraphBuilder()
      .input("x", {4, 6})
      .constant("W1", {6, 5})
      .intermediate("h", {4, 5})
      .output("y", {4, 5})
      .node("mm", OpKind::kMatMul, {"x", "W1"}, "h")
      .node("act", OpKind::kReLU, {"h"}, "y")
      .build();
}

std::map<std::string, Layout> plan_layouts(const SequencePlan& p) {
  std::map<std::string, Layout> out;
  for (const auto& [name, layout] : p.choices) out.emplace(name, layout);
  return out;
}

}  // namespace

TEST(DpOnSequence, UniqueMinimumIsRowMajor) {
  Graph g = single_matmul();
  RowMajorPreferring cost;
  SequencePlan p = dp_on_sequence(decompose(g).sequences[0], g, cost, {});
  EXPECT_EQ(p.cost, 10.0);
  for (const auto& [name, layout] : p.choices) EXPECT_TRUE(layout.is_identity()) << name;
  EXPECT_EQ(p.loop_orders.at("mm"), LoopOrder());
}

TEST(DpOnSequence, TwoNodeChainMatchesExhaustiveSearch) {
  Graph g = two_node_chain();
  AnalyticCostModel cost;
  SequencePlan p = dp_on_sequence(decompose(g).sequences[0], g, cost, {});
  auto best = bptest::exhaustive_optimum(g, cost);
  EXPECT_DOUBLE_EQ(p.cost, best.cost);

  Schedule s;
  for (const auto& [name, layout] : plan_layouts(p)) s.layout[name] = layout;
  for (const auto& [name, order] : p.loop_orders) s.loop_order[name] = order;
  EXPECT_DOUBLE_EQ(bptest::recompute_cost(g, s, cost), best.cost);
}

TEST(DpOnSequence, PinnedMiddleTensorIsRespected) {
  Graph g = two_node_chain();
  AnalyticCostModel cost;
  const Sequence seq = decompose(g).sequences[0];
  SequencePlan free = dp_on_sequence(seq, g, cost, {});
  SequencePlan pinned = dp_on_sequence(seq, g, cost, {{"h", Layout::reversed(2)}});
  EXPECT_EQ(*pinned.layout("h"), Layout::reversed(2));
  EXPECT_GE(pinned.cost, free.cost);
  EXPECT_DOUBLE_EQ(pinned.cost, bptest::exhaustive_optimum(g, cost, {{"h", Layout::reversed(2)}}).cost);
}

TEST(DpOnSequence, RejectsMismatchedSequence) {
  Graph g = two_node_chain();
  AnalyticCostModel cost;
  EXPECT_THROW(dp_on_sequence(Sequence{{"act", "mm"}, {"y", "h"}}, g, cost, {}), PlanningError);
  EXPECT_THROW(dp_on_sequence(Sequence{{"mm"}, {"y"}}, g, cost, {}), PlanningError);
  EXPECT_THROW(dp_on_sequence(Sequence{{"ghost"}, {"y"}}, g, cost, {}), PlanningError);
  EXPECT_THROW(dp_on_sequence(Sequence{}, g, cost, {}), PlanningError);
}

TEST(DpOnSequence, RejectsPinOutsideCandidates) {
  Graph g = two_node_chain();
  AnalyticCostModel cost;
  const Sequence seq = decompose(g).sequences[0];
  EXPECT_THROW(dp_on_sequence(seq, g, cost, {{"h", Layout::reversed(2)}}, 1), PlanningError);
  EXPECT_THROW(dp_on_sequence(seq, g, cost, {{"h", Layout::identity(3)}}), PlanningError);
}

TEST(DpOnSequence, TableCellsAreFiniteAndBackPointersValid) {
  std::mt19937_64 rng(3);
  AnalyticCostModel cost;
  for (int t = 0; t < 20; ++t) {
    Graph g = bptest::random_chain(rng, 4, 3);
    SequencePlan p = dp_on_sequence(decompose(g).sequences[0], g, cost, {});
    const CostTable& table = p.table;
    for (size_t e = 0; e < table.cells.size(); ++e)
      for (const CostCell& c : table.cells[e]) {
        EXPECT_TRUE(std::isfinite(c.best));
        EXPECT_GE(c.best, 0.0);
        if (e == 0) EXPECT_EQ(c.pred, -1);
        else EXPECT_TRUE(c.pred >= 0 && c.pred < static_cast<int>(table.candidates[e - 1].size()));
      }
  }
}

TEST(Vote, StrictMajority) {
  const Layout l1 = Layout::identity(2), l2 = Layout::reversed(2);
  auto cands = candidate_layouts(2, 24);
  EXPECT_EQ(vote({l1, l1, l2}, cands, VoteTieBreak::kEnumerationOrder), l1);
  EXPECT_EQ(vote({l2, l1, l2}, cands, VoteTieBreak::kEnumerationOrder), l2);
}

TEST(Vote, TieGoesToEarlierCandidate) {
  const Layout l1 = Layout::identity(2), l2 = Layout::reversed(2);
  auto cands = candidate_layouts(2, 24);
  EXPECT_EQ(vote({l1, l2}, cands, VoteTieBreak::kEnumerationOrder), l1);
  EXPECT_EQ(vote({l2, l1}, cands, VoteTieBreak::kEnumerationOrder), l1);
}

TEST(Vote, RandomTieBreakPicksATiedModeReproducibly) {
  auto cands = candidate_layouts(3, 24);
  std::vector<Layout> votes = {cands[4], cands[2], cands[4], cands[2], cands[1]};
  std::set<Layout> seen;
  for (uint64_t seed = 0; seed < 32; ++seed) {
    std::mt19937_64 a(seed), b(seed);
    Layout pa = vote(votes, cands, VoteTieBreak::kRandom, &a);
    EXPECT_EQ(pa, vote(votes, cands, VoteTieBreak::kRandom, &b));
    EXPECT_TRUE(pa == cands[2] || pa == cands[4]);
    seen.insert(pa);
  }
  EXPECT_EQ(seen.size(), 2u);
}

TEST(SearchLoopOrder, RowMajorMatchesSixWayArgmin) {
  Graph g = single_matmul(6, 7, 5);
  AnalyticCostModel cost;
  LayoutMap rm = {{"A", Layout::identity(2)}, {"B", Layout::identity(2)}, {"C", Layout::identity(2)}};
  LoopChoice choice = search_loop_order(g, g.nodes()[0], rm, cost);

  int argmin = 0;
  std::vector<double> costs;
  for (const LoopOrder& o : LoopOrder::all())
    costs.push_back(cost.cost(make_query(g, g.nodes()[0], [&](const std::string& n) -> const Layout& { return rm.at(n); }, o)));
  for (int i = 1; i < 6; ++i)
    if (costs[i] < costs[argmin]) argmin = i;
  EXPECT_EQ(choice.order, LoopOrder::all()[argmin]);
  EXPECT_EQ(choice.cost, costs[argmin]);
  EXPECT_NE(choice.order, LoopOrder());
}

TEST(SearchLoopOrder, ColumnMajorBMakesIjkOptimal) {
  Graph g = single_matmul(6, 7, 5);
  AnalyticCostModel cost;
  LayoutMap l = {{"A", Layout::identity(2)}, {"B", Layout::reversed(2)}, {"C", Layout::identity(2)}};
  EXPECT_EQ(search_loop_order(g, g.nodes()[0], l, cost).order, LoopOrder());
}

TEST(SearchLoopOrder, UnitGemmTiesResolveToIjk) {
  Graph g = GraphBuilder()
                .input("A", {1, 1})
                .constant("B", {1, 1})
                .constant("bias", {1})
                .output("C", {1, 1})
                .node("gemm", OpKind::kGemm, {"A", "B", "bias"}, "C")
                .build();
  AnalyticCostModel cost;
  LayoutMap l = {{"A", Layout::identity(2)}, {"B", Layout::identity(2)}, {"bias", Layout::identity(1)},
                 {"C", Layout::identity(2)}};
  EXPECT_EQ(search_loop_order(g, g.nodes()[0], l, cost).order, LoopOrder());
}

TEST(SearchLoopOrder, RejectsNonReorderableOps) {
  Graph g = two_node_chain();
  AnalyticCostModel cost;
  LayoutMap l = {{"h", Layout::identity(2)}, {"y", Layout::identity(2)}};
  EXPECT_THROW(search_loop_order(g, g.node("act"), l, cost), PlanningError);
}

TEST(PlanSchedule, ChainsAreExact) {
  std::mt19937_64 rng(1234);
  AnalyticCostModel cost;
  for (int t = 0; t < 60; ++t) {
    Graph g = bptest::random_chain(rng, 2 + t % 3, 2);
    Schedule s = plan_schedule(g, cost);
    auto best = bptest::exhaustive_optimum(g, cost);
    ASSERT_NEAR(s.predicted_cost, best.cost, 1e-9 * std::max(1.0, best.cost)) << serialize_model(g);
  }
}

TEST(PlanSchedule, PinsNeverLowerTheOptimum) {
  std::mt19937_64 rng(8);
  AnalyticCostModel cost;
  for (int t = 0; t < 40; ++t) {
    Graph g = bptest::random_chain(rng, 3, 3);
    const Sequence seq = decompose(g).sequences[0];
    const double free = dp_on_sequence(seq, g, cost, {}).cost;
    const std::string& pinned = seq.edges[rng() % seq.edges.size()];
    auto cands = candidate_layouts(g.tensor(pinned), 24);
    const Layout pin = cands[rng() % cands.size()];
    EXPECT_GE(dp_on_sequence(seq, g, cost, {{pinned, pin}}).cost, free - 1e-9);
  }
}

TEST(PlanSchedule, TotalityAndIndependentCostRecomputation) {
  std::mt19937_64 rng(21);
  AnalyticCostModel cost;
  for (int t = 0; t < 30; ++t) {
    Graph g = t % 2 ? bptest::random_chain(rng, 5, 3) : bptest::random_dag(rng, 10);
    Schedule s = plan_schedule(g, cost);
    EXPECT_NO_THROW(validate_schedule(g, s));
    for (const TensorDecl& td : g.tensors())
      if (td.rank() > 0) EXPECT_EQ(s.layout.count(td.name), 1u) << td.name;
    for (const NodeDecl& n : g.nodes()) EXPECT_EQ(s.loop_order.count(n.name), reorderable(n.op) ? 1u : 0u);
    EXPECT_DOUBLE_EQ(s.predicted_cost, bptest::recompute_cost(g, s, cost));
  }
}

TEST(PlanSchedule, CapOneGivesRowMajor) {
  std::mt19937_64 rng(4);
  AnalyticCostModel cost;
  Graph g = bptest::random_chain(rng, 5, 3);
  PlannerOptions opts;
  opts.layout_cap = 1;
  Schedule s = plan_schedule(g, cost, opts);
  for (const auto& [name, layout] : s.layout) EXPECT_TRUE(layout.is_identity()) << name;
}

TEST(PlanSchedule, Deterministic) {
  std::mt19937_64 rng(6);
  AnalyticCostModel cost;
  Graph g = bptest::random_dag(rng, 14);
  Schedule a = plan_schedule(g, cost), b = plan_schedule(g, cost);
  EXPECT_EQ(a.layout, b.layout);
  EXPECT_EQ(a.loop_order, b.loop_order);
  EXPECT_EQ(a.predicted_cost, b.predicted_cost);
}

TEST(ResolveAndMerge, ConflictedTensorTakesTheModeAndLosersReoptimize) {
  // Shared input x feeds three single-node sequences. Two prefer x
  // column-major (their outputs are column-major transposes), one prefers
  // row-major. Sequences are built by hand so the vote is visible.
  Graph g = GraphBuilder()
                .input("x", {3, 4})
                .output("a", {4, 3})
                .output("b", {4, 3})
                .output("c", {3, 4})
                .node("ta", OpKind::kTranspose, {"x"}, "a")
                .node("tb", OpKind::kTranspose, {"x"}, "b")
                .node("rc", OpKind::kReLU, {"x"}, "c")
                .build();
  AnalyticCostModel cost;
  Decomposition dec = decompose(g);
  ASSERT_EQ(dec.sequences.size(), 3u);
  std::vector<SequencePlan> plans;
  LayoutMap pin_a = {{"a", Layout::identity(2)}, {"x", Layout::reversed(2)}};
  LayoutMap pin_c = {{"c", Layout::identity(2)}, {"x", Layout::identity(2)}};
  for (const Sequence& s : dec.sequences)
    plans.push_back(dp_on_sequence(s, g, cost, s.nodes[0] == "rc" ? pin_c : pin_a));
  std::vector<Layout> votes;
  for (const auto& p : plans) votes.push_back(*p.layout("x"));
  Schedule merged = resolve_and_merge(plans, dec, g, cost);
  EXPECT_EQ(merged.layout.at("x"), Layout::reversed(2));
  EXPECT_EQ(merged.layout.at("x"), vote(votes, candidate_layouts(2, 24), VoteTieBreak::kEnumerationOrder));
  // rc lost the vote and was re-planned around the column-major x.
  EXPECT_EQ(merged.layout.at("c"), Layout::reversed(2));
  EXPECT_DOUBLE_EQ(merged.predicted_cost, bptest::recompute_cost(g, merged, cost));
}
