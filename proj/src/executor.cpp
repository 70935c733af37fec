#include "blueprint/executor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <new>

#include "blueprint/error.hpp"

namespace blueprint {

namespace {

using Clock = std::chrono::steady_clock;

int64_t elapsed_ns(Clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - since).count();
}

// Visits every logical index of `shape`, nesting loops in `order` (outermost
// first) so that a view's own order walks its storage contiguously.
template <typename F>
void for_each_index(const TensorView& v, const std::array<int, kMaxRank>& order, F&& f) {
  Index ext{1, 1, 1, 1};
  std::array<int, kMaxRank> axis{0, 0, 0, 0};
  const int pad = kMaxRank - v.rank;
  for (int l = 0; l < v.rank; ++l) {
    ext[pad + l] = v.shape[order[l]];
    axis[pad + l] = order[l];
  }
  Index idx{0, 0, 0, 0};
  for (int64_t a = 0; a < ext[0]; ++a) {
    if (pad <= 0) idx[axis[0]] = a;
    for (int64_t b = 0; b < ext[1]; ++b) {
      if (pad <= 1) idx[axis[1]] = b;
      for (int64_t c = 0; c < ext[2]; ++c) {
        if (pad <= 2) idx[axis[2]] = c;
        for (int64_t d = 0; d < ext[3]; ++d) {
          if (pad <= 3) idx[axis[3]] = d;
          f(idx);
        }
      }
    }
  }
}

template <typename F>
void for_each_index(const TensorView& v, F&& f) {
  for_each_index(v, v.order, std::forward<F>(f));
}

void matmul(const TensorView& a, const TensorView& b, const TensorView& c, bool trans_a, bool trans_b,
            LoopOrder order) {
  const int64_t m = c.shape[0], n = c.shape[1];
  const int64_t k = trans_a ? a.shape[0] : a.shape[1];
  // Element strides of each operand with respect to the i, j, k loop vars.
  const std::array<int64_t, 3> ext = {m, n, k};
  const std::array<int64_t, 3> sa = {trans_a ? a.strides[1] : a.strides[0], 0,
                                     trans_a ? a.strides[0] : a.strides[1]};
  const std::array<int64_t, 3> sb = {0, trans_b ? b.strides[0] : b.strides[1],
                                     trans_b ? b.strides[1] : b.strides[0]};
  const std::array<int64_t, 3> sc = {c.strides[0], c.strides[1], 0};

  for_each_index(c, [&](const Index& idx) { c.at(idx) = 0.0f; });

  const int x = order[0], y = order[1], z = order[2];
  const int64_t e0 = ext[x], e1 = ext[y], e2 = ext[z];
  const int64_t a0 = sa[x], a1 = sa[y], a2 = sa[z];
  const int64_t b0 = sb[x], b1 = sb[y], b2 = sb[z];
  const int64_t c0 = sc[x], c1 = sc[y], c2 = sc[z];
  for (int64_t p = 0; p < e0; ++p) {
    const float* pa = a.data + p * a0;
    const float* pb = b.data + p * b0;
    float* pc = c.data + p * c0;
    for (int64_t q = 0; q < e1; ++q) {
      const float* qa = pa + q * a1;
      const float* qb = pb + q * b1;
      float* qc = pc + q * c1;
      for (int64_t r = 0; r < e2; ++r) qc[r * c2] += qa[r * a2] * qb[r * b2];
    }
  }
}

void add_bias(const TensorView& bias, const TensorView& c) {
  if (bias.rank == 1) {
    for_each_index(c, [&](const Index& idx) { c.at(idx) += bias.data[idx[1] * bias.strides[0]]; });
  } else {
    for_each_index(c, [&](const Index& idx) { c.at(idx) += bias.at(idx); });
  }
}

void conv2d(const TensorView& x, const TensorView& w, const TensorView& y, const NodeAttrs& attrs) {
  const auto st = conv_strides(attrs);
  const auto pd = conv_pads(attrs);
  const int64_t batch = y.shape[0], out_ch = y.shape[1], oh_n = y.shape[2], ow_n = y.shape[3];
  const int64_t in_ch = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const int64_t kh_n = w.shape[2], kw_n = w.shape[3];
  for (int64_t n = 0; n < batch; ++n)
    for (int64_t o = 0; o < out_ch; ++o)
      for (int64_t oh = 0; oh < oh_n; ++oh)
        for (int64_t ow = 0; ow < ow_n; ++ow) {
          float& out = y.at({n, o, oh, ow});
          out = 0.0f;
          for (int64_t c = 0; c < in_ch; ++c)
            for (int64_t kh = 0; kh < kh_n; ++kh) {
              const int64_t ih = oh * st[0] + kh - pd[0];
              if (ih < 0 || ih >= h) continue;
              for (int64_t kw = 0; kw < kw_n; ++kw) {
                const int64_t iw = ow * st[1] + kw - pd[1];
                if (iw < 0 || iw >= wd) continue;
                out += x.at({n, c, ih, iw}) * w.at({o, c, kh, kw});
              }
            }
        }
}

void softmax(const TensorView& x, const TensorView& y, int axis) {
  // Outer loops over every other axis in the output's storage order.
  std::array<int, kMaxRank> outer{};
  int nouter = 0;
  for (int l = 0; l < y.rank; ++l)
    if (y.order[l] != axis) outer[nouter++] = y.order[l];
  TensorView frame = y;
  frame.shape[axis] = 1;
  std::array<int, kMaxRank> order = outer;
  order[nouter] = axis;
  const int64_t len = y.shape[axis];
  const int64_t sx = x.strides[axis], sy = y.strides[axis];
  for_each_index(frame, order, [&](const Index& idx) {
    const float* px = &x.at(idx);
    float* py = &y.at(idx);
    float peak = px[0];
    for (int64_t t = 1; t < len; ++t) peak = std::max(peak, px[t * sx]);
    double sum = 0.0;
    for (int64_t t = 0; t < len; ++t) {
      float e = std::exp(px[t * sx] - peak);
      py[t * sy] = e;
      sum += e;
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (int64_t t = 0; t < len; ++t) py[t * sy] *= inv;
  });
}

void transpose(const TensorView& x, const TensorView& y, const std::vector<int>& perm) {
  for_each_index(y, [&](const Index& o) {
    Index i{0, 0, 0, 0};
    for (int a = 0; a < y.rank; ++a) i[perm[a]] = o[a];
    y.at(o) = x.at(i);
  });
}

void reshape(const TensorView& x, const TensorView& y) {
  if (x.data == y.data) return;  // aliasing view
  Index rm_out{};
  int64_t running = 1;
  for (int a = y.rank - 1; a >= 0; --a) {
    rm_out[a] = running;
    running *= y.shape[a];
  }
  for_each_index(y, [&](const Index& o) {
    int64_t flat = 0;
    for (int a = 0; a < y.rank; ++a) flat += o[a] * rm_out[a];
    Index i{0, 0, 0, 0};
    for (int a = x.rank - 1; a >= 0; --a) {
      i[a] = flat % x.shape[a];
      flat /= x.shape[a];
    }
    y.at(o) = x.at(i);
  });
}

Index row_major_index(int64_t flat, const TensorView& v) {
  Index idx{0, 0, 0, 0};
  for (int a = v.rank - 1; a >= 0; --a) {
    idx[a] = flat % v.shape[a];
    flat /= v.shape[a];
  }
  return idx;
}

struct ArenaDeleter {
  std::align_val_t align;
  void operator()(std::byte* p) const { ::operator delete[](p, align); }
};

constexpr unsigned char kCanaryByte = 0xA5;

}  // namespace

TensorView TensorView::over(float* base, int64_t offset_bytes, const Shape& shape, const Layout& layout) {
  TensorView v;
  v.offset = offset_bytes;
  v.data = reinterpret_cast<float*>(reinterpret_cast<std::byte*>(base) + offset_bytes);
  v.rank = static_cast<int>(shape.size());
  Strides st = layout_strides(shape, layout);
  for (int a = 0; a < v.rank; ++a) {
    v.shape[a] = shape[a];
    v.strides[a] = st[a];
    v.order[a] = layout.perm[a];
  }
  return v;
}

int64_t TensorView::numel() const {
  int64_t n = 1;
  for (int a = 0; a < rank; ++a) n *= shape[a];
  return n;
}

void execute_node(const NodeDecl& node, std::span<const TensorView> in, const TensorView& out,
                  std::optional<LoopOrder> order) {
  switch (node.op) {
    case OpKind::kMatMul:
      matmul(in[0], in[1], out, false, false, order.value_or(LoopOrder()));
      break;
    case OpKind::kGemm:
      matmul(in[0], in[1], out, node.attrs.trans_a.value_or(0) != 0, node.attrs.trans_b.value_or(0) != 0,
             order.value_or(LoopOrder()));
      add_bias(in[2], out);
      break;
    case OpKind::kConv2D:
      conv2d(in[0], in[1], out, node.attrs);
      break;
    case OpKind::kAdd:
      for_each_index(out, [&](const Index& i) { out.at(i) = in[0].at(i) + in[1].at(i); });
      break;
    case OpKind::kMul:
      for_each_index(out, [&](const Index& i) { out.at(i) = in[0].at(i) * in[1].at(i); });
      break;
    case OpKind::kReLU:
      for_each_index(out, [&](const Index& i) { out.at(i) = std::max(in[0].at(i), 0.0f); });
      break;
    case OpKind::kSoftmax:
      softmax(in[0], out, softmax_axis(node.attrs, out.rank));
      break;
    case OpKind::kTranspose:
      transpose(in[0], out, transpose_perm(node.attrs, in[0].rank));
      break;
    case OpKind::kReshape:
      reshape(in[0], out);
      break;
  }
}

void copy_in(std::span<const float> row_major, const TensorView& dst) {
  for (int64_t f = 0; f < dst.numel(); ++f) dst.at(row_major_index(f, dst)) = row_major[f];
}

std::vector<float> copy_out(const TensorView& src) {
  std::vector<float> out(src.numel());
  for (int64_t f = 0; f < src.numel(); ++f) out[f] = src.at(row_major_index(f, src));
  return out;
}

Executor::Executor(const Graph& graph, Schedule schedule, MemoryPlan plan)
    : graph_(graph), schedule_(std::move(schedule)), plan_(std::move(plan)), order_(topo_order_indices(graph)) {
  validate_schedule(graph_, schedule_);

  for (const NodeDecl& n : graph_.nodes()) {
    if (!reshape_aliases(graph_, n, schedule_)) continue;
    if (!plan_.aliases.count(n.output()))
      throw ValidationError("memory plan does not account for aliasing reshape '" + n.name + "'");
  }
  for (const TensorDecl& t : graph_.tensors()) {
    if (t.kind == TensorKind::kConstant || plan_.aliases.count(t.name)) continue;
    auto it = plan_.offsets.find(t.name);
    if (it == plan_.offsets.end()) throw ValidationError("memory plan has no offset for tensor '" + t.name + "'");
    int64_t bytes = t.numel() * static_cast<int64_t>(sizeof(float));
    if (it->second < 0 || it->second + bytes > plan_.arena_size)
      throw ValidationError("tensor '" + t.name + "' does not fit inside the arena");
    if (it->second % static_cast<int64_t>(alignof(float)) != 0)
      throw ValidationError("tensor '" + t.name + "' has a misaligned offset");
  }

  // Constants live outside the arena, re-laid-out once.
  for (const TensorDecl& t : graph_.tensors()) {
    if (t.kind != TensorKind::kConstant) continue;
    std::vector<float> storage(t.numel());
    TensorView v = TensorView::over(storage.data(), 0, t.shape, layout_of(schedule_, t));
    copy_in(*t.data, v);
    constants_.emplace(t.name, std::move(storage));
  }
}

ExecutionReport Executor::run(const std::map<std::string, std::vector<float>>& inputs,
                              const ExecutionOptions& options) const {
  for (const TensorDecl& t : graph_.tensors()) {
    if (t.kind != TensorKind::kInput) continue;
    auto it = inputs.find(t.name);
    if (it == inputs.end()) throw ValidationError("missing input '" + t.name + "'");
    if (static_cast<int64_t>(it->second.size()) != t.numel())
      throw ValidationError("input '" + t.name + "' has " + std::to_string(it->second.size()) +
                            " values, expected " + std::to_string(t.numel()));
  }

  ExecutionReport report;
  const auto start = Clock::now();

  const auto align = std::align_val_t{static_cast<size_t>(std::max<int64_t>(plan_.alignment, alignof(float)))};
  const size_t arena_bytes = static_cast<size_t>(plan_.arena_size);
  std::unique_ptr<std::byte[], ArenaDeleter> arena(
      static_cast<std::byte*>(::operator new[](std::max<size_t>(arena_bytes, 1), align)), ArenaDeleter{align});
  report.alloc_count = 1;
  if (options.canary) std::memset(arena.get(), kCanaryByte, arena_bytes);
  float* base = reinterpret_cast<float*>(arena.get());

  std::map<std::string, TensorView, std::less<>> views;
  auto view_of = [&](const TensorDecl& t) -> TensorView {
    if (t.kind == TensorKind::kConstant) {
      auto& storage = const_cast<std::vector<float>&>(constants_.at(t.name));
      return TensorView::over(storage.data(), 0, t.shape, layout_of(schedule_, t));
    }
    return TensorView::over(base, plan_.offsets.at(t.name), t.shape, layout_of(schedule_, t));
  };
  for (const TensorDecl& t : graph_.tensors())
    if (!plan_.aliases.count(t.name)) views.emplace(t.name, view_of(t));
  // Alias owners are always declared upstream, so resolve in topological order.
  for (int idx : order_) {
    const NodeDecl& n = graph_.nodes()[idx];
    if (!plan_.aliases.count(n.output())) continue;
    TensorView src = views.at(n.inputs[0]);
    const TensorDecl& t = graph_.tensor(n.output());
    views.emplace(t.name, TensorView::over(src.data, 0, t.shape, layout_of(schedule_, t)));
    views.at(t.name).offset = src.offset;
  }

  for (const TensorDecl& t : graph_.tensors())
    if (t.kind == TensorKind::kInput) copy_in(inputs.at(t.name), views.at(t.name));

  std::vector<TensorView> in_views;
  for (int idx : order_) {
    const NodeDecl& n = graph_.nodes()[idx];
    in_views.clear();
    for (const auto& name : n.inputs) in_views.push_back(views.at(name));
    const TensorView& out = views.at(n.output());
    std::optional<LoopOrder> order;
    if (reorderable(n.op)) order = schedule_.loop_order.at(n.name);

    const auto node_start = Clock::now();
    execute_node(n, in_views, out, order);
    report.per_node_ns[n.name] = elapsed_ns(node_start);

    if (options.check_nan) {
      bool bad = false;
      for_each_index(out, [&](const Index& i) { bad = bad || !std::isfinite(out.at(i)); });
      if (bad) throw ExecutionError("non-finite value produced by node '" + n.name + "'");
    }
  }

  for (const TensorDecl& t : graph_.tensors())
    if (t.kind == TensorKind::kOutput) report.outputs[t.name] = {t.shape, copy_out(views.at(t.name))};

  if (options.canary) {
    std::vector<char> owned(arena_bytes, 0);
    for (const auto& [name, off] : plan_.offsets) {
      const TensorDecl& t = graph_.tensor(name);
      std::fill_n(owned.begin() + off, t.numel() * sizeof(float), 1);
    }
    for (size_t b = 0; b < arena_bytes; ++b)
      if (!owned[b] && static_cast<unsigned char>(arena[b]) != kCanaryByte) ++report.canary_violations;
  }

  report.wall_ns = elapsed_ns(start);
  return report;
}

ExecutionReport run(const Graph& graph, const Schedule& schedule, const MemoryPlan& plan,
                    const std::map<std::string, std::vector<float>>& inputs, const ExecutionOptions& options) {
  return Executor(graph, schedule, plan).run(inputs, options);
}

}  // namespace blueprint
