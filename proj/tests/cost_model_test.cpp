#include <gtest/gtest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <random>
#include <set>

#include "blueprint/cost_model.hpp"
#include "blueprint/error.hpp"
#include "test_support.hpp"

using namespace blueprint;
using bptest::all_layouts;
using bptest::enumerated_cost;

namespace {

CostQuery matmul_query(int64_t m, int64_t k, int64_t n, Layout la, Layout lb, Layout lc, LoopOrder order) {
  CostQuery q;
  q.op = OpKind::kMatMul;
  q.input_shapes = {{m, k}, {k, n}};
  q.output_shape = {m, n};
  q.input_layouts = {std::move(la), std::move(lb)};
  q.output_layout = std::move(lc);
  q.loop_order = order;
  return q;
}

// Same memory, axes relabelled: a rank-2 layout of X read as a layout of X^T.
Layout transposed(const Layout& l) { return Layout{{1 - l.perm[0], 1 - l.perm[1]}}; }

LoopOrder swap_ij(const LoopOrder& o) {
  auto f = [](LoopOrder::Axis a) {
    return a == LoopOrder::kI ? LoopOrder::kJ : a == LoopOrder::kJ ? LoopOrder::kI : a;
  };
  return LoopOrder(f(o[0]), f(o[1]), f(o[2]));
}

}  // namespace

TEST(AnalyticCost, MatMulRowMajorIjk) {
  const Layout rm = Layout::identity(2);
  CostQuery q = matmul_query(2, 2, 2, rm, rm, rm, LoopOrder());
  EXPECT_DOUBLE_EQ(enumerated_cost(q, 8.0), 80.0);
  EXPECT_DOUBLE_EQ(analytic_cost(q, 8.0), 80.0);
}

TEST(AnalyticCost, MatMulColumnMajorB) {
  const Layout rm = Layout::identity(2);
  CostQuery q = matmul_query(2, 2, 2, rm, Layout::reversed(2), rm, LoopOrder());
  EXPECT_DOUBLE_EQ(enumerated_cost(q, 8.0), 24.0);
  EXPECT_DOUBLE_EQ(analytic_cost(q, 8.0), 24.0);
}

TEST(AnalyticCost, ReluIsTwoAccessesPerElement) {
  for (const Layout& l : all_layouts(3)) {
    CostQuery q;
    q.op = OpKind::kReLU;
    q.input_shapes = {{3, 4, 5}};
    q.output_shape = {3, 4, 5};
    q.input_layouts = {l};
    q.output_layout = l;
    EXPECT_DOUBLE_EQ(analytic_cost(q), 2.0 * 60);
  }
}

TEST(AnalyticCost, MatchesLoopNestEnumerationForMatMulAndGemm) {
  const std::vector<std::array<int64_t, 3>> dims = {{2, 3, 4}, {5, 1, 3}, {1, 1, 1}, {4, 4, 2}};
  for (auto [m, k, n] : dims)
    for (const Layout& la : all_layouts(2))
      for (const Layout& lb : all_layouts(2))
        for (const Layout& lc : all_layouts(2))
          for (const LoopOrder& o : LoopOrder::all()) {
            CostQuery q = matmul_query(m, k, n, la, lb, lc, o);
            ASSERT_DOUBLE_EQ(analytic_cost(q, 8.0), enumerated_cost(q, 8.0)) << q.canonical();
            for (int ta = 0; ta < 2; ++ta)
              for (int tb = 0; tb < 2; ++tb)
                for (const Shape& bias : {Shape{n}, Shape{m, n}}) {
                  CostQuery g = q;
                  g.op = OpKind::kGemm;
                  g.attrs.trans_a = ta;
                  g.attrs.trans_b = tb;
                  g.input_shapes = {ta ? Shape{k, m} : Shape{m, k}, tb ? Shape{n, k} : Shape{k, n}, bias};
                  for (const Layout& lbias : all_layouts(static_cast<int>(bias.size()))) {
                    g.input_layouts = {la, lb, lbias};
                    ASSERT_DOUBLE_EQ(analytic_cost(g, 4.0), enumerated_cost(g, 4.0)) << g.canonical();
                  }
                }
          }
}

TEST(AnalyticCost, MatchesEnumerationForElementwiseSoftmaxTranspose) {
  const Shape shape = {2, 3, 4};
  for (const Layout& lx : all_layouts(3))
    for (const Layout& ly : all_layouts(3)) {
      CostQuery add;
      add.op = OpKind::kAdd;
      add.input_shapes = {shape, shape};
      add.output_shape = shape;
      add.output_layout = ly;
      for (const Layout& lz : all_layouts(3)) {
        add.input_layouts = {lx, lz};
        ASSERT_DOUBLE_EQ(analytic_cost(add), enumerated_cost(add, kDefaultSigma)) << add.canonical();
      }

      for (int axis = 0; axis < 3; ++axis) {
        CostQuery sm;
        sm.op = OpKind::kSoftmax;
        sm.attrs.axis = axis;
        sm.input_shapes = {shape};
        sm.output_shape = shape;
        sm.input_layouts = {lx};
        sm.output_layout = ly;
        ASSERT_DOUBLE_EQ(analytic_cost(sm), enumerated_cost(sm, kDefaultSigma)) << sm.canonical();
      }

      for (const Layout& perm : all_layouts(3)) {
        CostQuery tr;
        tr.op = OpKind::kTranspose;
        tr.attrs.perm = perm.perm;
        tr.input_shapes = {shape};
        tr.output_shape = {shape[perm.perm[0]], shape[perm.perm[1]], shape[perm.perm[2]]};
        tr.input_layouts = {lx};
        tr.output_layout = ly;
        ASSERT_DOUBLE_EQ(analytic_cost(tr), enumerated_cost(tr, kDefaultSigma)) << tr.canonical();
      }
    }
}

TEST(AnalyticCost, MatchesEnumerationForConv2D) {
  struct Case {
    Shape x, w, y;
    std::array<int64_t, 2> strides;
    std::array<int64_t, 4> pads;
  };
  const std::vector<Case> cases = {
      {{1, 2, 5, 5}, {3, 2, 3, 3}, {1, 3, 3, 3}, {1, 1}, {0, 0, 0, 0}},
      {{2, 1, 4, 6}, {2, 1, 3, 2}, {2, 2, 2, 4}, {2, 2}, {1, 1, 1, 1}},
      {{1, 3, 3, 3}, {2, 3, 1, 1}, {1, 2, 3, 3}, {1, 1}, {0, 0, 0, 0}},
  };
  for (const Case& c : cases)
    for (const Layout& lx : all_layouts(4))
      for (const Layout& lw : {Layout::identity(4), Layout::reversed(4), Layout{{0, 2, 3, 1}}}) {
        CostQuery q;
        q.op = OpKind::kConv2D;
        q.attrs.strides = c.strides;
        q.attrs.pads = c.pads;
        q.input_shapes = {c.x, c.w};
        q.output_shape = c.y;
        q.input_layouts = {lx, lw};
        q.output_layout = Layout::identity(4);
        ASSERT_DOUBLE_EQ(analytic_cost(q), enumerated_cost(q, kDefaultSigma)) << q.canonical();
      }
}

TEST(AnalyticCost, MatchesEnumerationForReshape) {
  const Shape in = {2, 3, 4};
  const Shape out = {6, 4};
  for (const Layout& li : all_layouts(3))
    for (const Layout& lo : all_layouts(2)) {
      CostQuery q;
      q.op = OpKind::kReshape;
      q.input_shapes = {in};
      q.output_shape = out;
      q.input_layouts = {li};
      q.output_layout = lo;
      ASSERT_DOUBLE_EQ(analytic_cost(q), enumerated_cost(q, kDefaultSigma)) << q.canonical();
    }
}

TEST(AnalyticCost, RowMajorReshapeIsFree) {
  CostQuery q;
  q.op = OpKind::kReshape;
  q.input_shapes = {{2, 6}};
  q.output_shape = {3, 4};
  q.input_layouts = {Layout::identity(2)};
  q.output_layout = Layout::identity(2);
  EXPECT_EQ(analytic_cost(q), 0.0);
}

TEST(AnalyticCost, LoopOrdersDifferUnderRowMajorOperands) {
  const Layout rm = Layout::identity(2);
  std::set<double> costs;
  int argmin = 0;
  std::vector<double> all;
  for (const LoopOrder& o : LoopOrder::all()) all.push_back(analytic_cost(matmul_query(8, 8, 8, rm, rm, rm, o)));
  for (int i = 0; i < 6; ++i) {
    costs.insert(all[i]);
    if (all[i] < all[argmin]) argmin = i;
  }
  EXPECT_GT(costs.size(), 1u);
  // k innermost strides B by a full row, so ijk is not the best order.
  EXPECT_GT(all[0], all[argmin]);
  EXPECT_EQ(LoopOrder::all()[argmin].innermost(), LoopOrder::kJ);
}

TEST(AnalyticCost, PermutationConsistency) {
  // C = A*B and C^T = B^T * A^T over the same three buffers walk identical
  // addresses once i and j are swapped in the loop order.
  for (const Layout& la : all_layouts(2))
    for (const Layout& lb : all_layouts(2))
      for (const Layout& lc : all_layouts(2))
        for (const LoopOrder& o : LoopOrder::all()) {
          double direct = analytic_cost(matmul_query(3, 5, 2, la, lb, lc, o));
          double flipped = analytic_cost(matmul_query(2, 5, 3, transposed(lb), transposed(la), transposed(lc), swap_ij(o)));
          ASSERT_DOUBLE_EQ(direct, flipped);
        }

  // Elementwise: permuting shape and every layout together.
  std::vector<int> p = {2, 0, 1};
  const Shape shape = {2, 3, 4};
  Shape permuted(3);
  for (int a = 0; a < 3; ++a) permuted[a] = shape[p[a]];
  std::vector<int> inv(3);
  for (int a = 0; a < 3; ++a) inv[p[a]] = a;
  auto relabel = [&](const Layout& l) {
    Layout r;
    for (int axis : l.perm) r.perm.push_back(inv[axis]);
    return r;
  };
  for (const Layout& lx : all_layouts(3))
    for (const Layout& ly : all_layouts(3)) {
      CostQuery a, b;
      a.op = b.op = OpKind::kReLU;
      a.input_shapes = {shape};
      a.output_shape = shape;
      a.input_layouts = {lx};
      a.output_layout = ly;
      b.input_shapes = {permuted};
      b.output_shape = permuted;
      b.input_layouts = {relabel(lx)};
      b.output_layout = relabel(ly);
      ASSERT_DOUBLE_EQ(analytic_cost(a), analytic_cost(b));
    }
}

TEST(CostQuery, ValidationRejectsMismatches) {
  const Layout rm = Layout::identity(2);
  CostQuery q = matmul_query(2, 2, 2, rm, rm, Layout::identity(3), LoopOrder());
  EXPECT_THROW(analytic_cost(q), PlanningError);

  CostQuery relu;
  relu.op = OpKind::kReLU;
  relu.input_shapes = {{4}};
  relu.output_shape = {4};
  relu.input_layouts = {Layout::identity(1)};
  relu.output_layout = Layout::identity(1);
  relu.loop_order = LoopOrder();
  EXPECT_THROW(analytic_cost(relu), PlanningError);
}

TEST(CostQuery, CanonicalFormSeparatesLoopOrdersAndLayouts) {
  const Layout rm = Layout::identity(2);
  std::set<std::string> keys;
  for (const LoopOrder& o : LoopOrder::all())
    for (const Layout& lb : all_layouts(2)) keys.insert(matmul_query(2, 3, 4, rm, lb, rm, o).canonical());
  EXPECT_EQ(keys.size(), 12u);
}

TEST(MeasuredCost, RepeatedQueryIsBitEqual) {
  MeasuredCostModel model(MeasureOptions{3, 1});
  const Layout rm = Layout::identity(2);
  CostQuery q = matmul_query(16, 16, 16, rm, rm, rm, LoopOrder());
  double first = model.cost(q);
  double second = model.cost(q);
  EXPECT_GT(first, 0.0);
  EXPECT_EQ(std::memcmp(&first, &second, sizeof(double)), 0);
  EXPECT_EQ(model.cache_size(), 1u);
}

TEST(MeasuredCost, CacheFileRoundTrip) {
  const std::string path = (std::filesystem::temp_directory_path() / "bp_cost_cache_test.json").string();
  const Layout rm = Layout::identity(2);
  CostQuery q = matmul_query(8, 8, 8, rm, rm, rm, LoopOrder());
  MeasuredCostModel a(MeasureOptions{2, 1});
  double cost = a.cost(q);
  a.save_cache(path);

  MeasuredCostModel b(MeasureOptions{2, 1});
  b.load_cache(path);
  EXPECT_EQ(b.cache_size(), 1u);
  EXPECT_EQ(b.cost(q), cost);
  std::remove(path.c_str());
}

TEST(MeasuredCost, MissingCacheFileStartsEmpty) {
  MeasuredCostModel m;
  m.load_cache("/nonexistent/cache.json");
  EXPECT_EQ(m.cache_size(), 0u);
}
