#include "blueprint/cost_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "blueprint/error.hpp"
#include "blueprint/executor.hpp"

namespace blueprint {

namespace {

std::string join(const std::vector<int64_t>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "x" : "") + std::to_string(v[i]);
  return s;
}

std::string perm_key(const Layout& l) {
  std::string s;
  for (int p : l.perm) s += std::to_string(p);
  return s;
}

double weight(int64_t stride, double sigma) { return std::abs(stride) <= 1 ? 1.0 : sigma; }

// Stride of a rank-2 operand with respect to loop variable `var`, given which
// loop variable drives each of its two axes.
int64_t stride_wrt(const Strides& s, int row_var, int col_var, int var) {
  return (row_var == var ? s[0] : 0) + (col_var == var ? s[1] : 0);
}

double matmul_like(const CostQuery& q, double sigma) {
  const bool ta = q.op == OpKind::kGemm && q.attrs.trans_a.value_or(0);
  const bool tb = q.op == OpKind::kGemm && q.attrs.trans_b.value_or(0);
  const Shape& out = q.output_shape;
  const int64_t m = out[0], n = out[1];
  const int64_t k = ta ? q.input_shapes[0][0] : q.input_shapes[0][1];
  const int inner = q.loop_order.value_or(LoopOrder()).innermost();
  constexpr int I = LoopOrder::kI, J = LoopOrder::kJ, K = LoopOrder::kK;

  const Strides sa = layout_strides(q.input_shapes[0], q.input_layouts[0]);
  const Strides sb = layout_strides(q.input_shapes[1], q.input_layouts[1]);
  const Strides sc = layout_strides(out, q.output_layout);
  const double iters = static_cast<double>(m * n * k);
  double total = iters * weight(ta ? stride_wrt(sa, K, I, inner) : stride_wrt(sa, I, K, inner), sigma);
  total += iters * weight(tb ? stride_wrt(sb, J, K, inner) : stride_wrt(sb, K, J, inner), sigma);
  total += iters * weight(stride_wrt(sc, I, J, inner), sigma);

  if (q.op == OpKind::kGemm) {
    // Bias pass walks C in storage order; C itself is contiguous there.
    const int c_inner_axis = q.output_layout.innermost();
    const Shape& bshape = q.input_shapes[2];
    int64_t bias_stride = 0;
    if (bshape.size() == 1) {
      bias_stride = c_inner_axis == 1 ? 1 : 0;
    } else {
      bias_stride = layout_strides(bshape, q.input_layouts[2])[c_inner_axis];
    }
    total += static_cast<double>(m * n) * (1.0 + weight(bias_stride, sigma));
  }
  return total;
}

double elementwise(const CostQuery& q, double sigma) {
  const double count = static_cast<double>(numel(q.output_shape));
  const int axis = q.output_layout.innermost();
  double total = count;  // the output write is contiguous in its own order
  for (size_t i = 0; i < q.input_shapes.size(); ++i) {
    int64_t s = axis < 0 ? 1 : layout_strides(q.input_shapes[i], q.input_layouts[i])[axis];
    total += count * weight(s, sigma);
  }
  return total;
}

double softmax_cost(const CostQuery& q, double sigma) {
  const int rank = static_cast<int>(q.output_shape.size());
  const int axis = softmax_axis(q.attrs, rank);
  const double count = static_cast<double>(numel(q.output_shape));
  const int64_t sx = layout_strides(q.input_shapes[0], q.input_layouts[0])[axis];
  const int64_t sy = layout_strides(q.output_shape, q.output_layout)[axis];
  // max pass + exp pass read X; exp pass writes Y, normalize pass updates Y.
  return 2.0 * count * weight(sx, sigma) + 2.0 * count * weight(sy, sigma);
}

double transpose_cost(const CostQuery& q, double sigma) {
  const int rank = static_cast<int>(q.output_shape.size());
  const double count = static_cast<double>(numel(q.output_shape));
  if (rank == 0) return 2.0 * count;
  const auto perm = transpose_perm(q.attrs, rank);
  const int axis = q.output_layout.innermost();
  const int64_t sx = layout_strides(q.input_shapes[0], q.input_layouts[0])[perm[axis]];
  return count + count * weight(sx, sigma);
}

double reshape_cost(const CostQuery& q, double sigma) {
  const Shape& in = q.input_shapes[0];
  const Shape& out = q.output_shape;
  if (q.input_layouts[0].is_identity() && q.output_layout.is_identity()) return 0.0;

  const int64_t total_elems = numel(out);
  const int out_rank = static_cast<int>(out.size());
  const int in_rank = static_cast<int>(in.size());
  const Strides in_strides = layout_strides(in, q.input_layouts[0]);
  std::vector<int64_t> rm_out(out_rank, 1);
  for (int a = out_rank - 2; a >= 0; --a) rm_out[a] = rm_out[a + 1] * out[a + 1];
  const int axis = q.output_layout.innermost();
  const int64_t step = axis < 0 ? 0 : rm_out[axis];

  auto address = [&](int64_t flat) {
    int64_t addr = 0;
    for (int a = in_rank - 1; a >= 0; --a) {
      addr += (flat % in[a]) * in_strides[a];
      flat /= in[a];
    }
    return addr;
  };

  // The source index is a non-affine function of the destination index, so
  // the read stride is evaluated per element.
  double total = static_cast<double>(total_elems);
  for (int64_t flat = 0; flat < total_elems; ++flat) {
    const int64_t pos = axis < 0 ? 0 : (flat / rm_out[axis]) % out[axis];
    int64_t other = -1;
    if (axis >= 0 && pos + 1 < out[axis]) other = flat + step;
    else if (axis >= 0 && pos > 0) other = flat - step;
    else if (flat + step < total_elems && step > 0) other = flat + step;
    else if (flat - step >= 0 && step > 0) other = flat - step;
    const int64_t stride = other < 0 ? 1 : address(other) - address(flat);
    total += weight(stride, sigma);
  }
  return total;
}

double conv_cost(const CostQuery& q, double sigma) {
  const Shape& x = q.input_shapes[0];
  const Shape& w = q.input_shapes[1];
  const Shape& y = q.output_shape;
  const auto st = conv_strides(q.attrs);
  const auto pd = conv_pads(q.attrs);
  auto valid_pairs = [](int64_t out_n, int64_t k_n, int64_t stride, int64_t pad, int64_t in_n) {
    int64_t count = 0;
    for (int64_t o = 0; o < out_n; ++o)
      for (int64_t kk = 0; kk < k_n; ++kk) {
        int64_t i = o * stride + kk - pad;
        if (i >= 0 && i < in_n) ++count;
      }
    return count;
  };
  const double iters = static_cast<double>(y[0] * y[1] * x[1]) *
                       static_cast<double>(valid_pairs(y[2], w[2], st[0], pd[0], x[2])) *
                       static_cast<double>(valid_pairs(y[3], w[3], st[1], pd[1], x[3]));
  // Innermost loop is kw: X moves along its width axis, W along its kw axis,
  // and the output element is loop-invariant.
  const int64_t sx = layout_strides(x, q.input_layouts[0])[3];
  const int64_t sw = layout_strides(w, q.input_layouts[1])[3];
  return iters * (weight(sx, sigma) + weight(sw, sigma) + 1.0);
}

std::vector<float> synthetic_data(int64_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace

std::string_view cost_model_name(CostModelKind kind) {
  return kind == CostModelKind::kAnalytic ? "analytic" : "measured";
}

std::string CostQuery::canonical() const {
  std::ostringstream os;
  os << op_name(op);
  if (attrs.strides) os << " s" << (*attrs.strides)[0] << ',' << (*attrs.strides)[1];
  if (attrs.pads) os << " p" << (*attrs.pads)[0] << ',' << (*attrs.pads)[1] << ',' << (*attrs.pads)[2] << ','
                     << (*attrs.pads)[3];
  if (attrs.perm) {
    os << " perm";
    for (int p : *attrs.perm) os << p;
  }
  if (attrs.axis) os << " axis" << *attrs.axis;
  if (attrs.trans_a) os << " tA" << *attrs.trans_a;
  if (attrs.trans_b) os << " tB" << *attrs.trans_b;
  os << " |";
  for (size_t i = 0; i < input_shapes.size(); ++i) os << ' ' << join(input_shapes[i]) << ':' << perm_key(input_layouts[i]);
  os << " -> " << join(output_shape) << ':' << perm_key(output_layout);
  if (loop_order) os << " @" << loop_order->str();
  return os.str();
}

void CostQuery::validate() const {
  if (input_shapes.size() != input_layouts.size()) throw PlanningError("cost query: layout count mismatch");
  for (size_t i = 0; i < input_shapes.size(); ++i)
    if (static_cast<int>(input_shapes[i].size()) != input_layouts[i].rank() || !input_layouts[i].is_valid())
      throw PlanningError("cost query: input layout does not match its shape");
  if (static_cast<int>(output_shape.size()) != output_layout.rank() || !output_layout.is_valid())
    throw PlanningError("cost query: output layout does not match its shape");
  if (loop_order && !reorderable(op))
    throw PlanningError("cost query: loop order given for " + std::string(op_name(op)));
}

CostQuery make_query(const Graph& g, const NodeDecl& node,
                     const std::function<const Layout&(const std::string&)>& layout_of,
                     std::optional<LoopOrder> loop_order) {
  CostQuery q;
  q.op = node.op;
  q.attrs = node.attrs;
  for (const auto& in : node.inputs) {
    q.input_shapes.push_back(g.tensor(in).shape);
    q.input_layouts.push_back(layout_of(in));
  }
  q.output_shape = g.tensor(node.output()).shape;
  q.output_layout = layout_of(node.output());
  if (reorderable(node.op)) q.loop_order = loop_order.value_or(LoopOrder());
  return q;
}

double analytic_cost(const CostQuery& q, double sigma) {
  q.validate();
  switch (q.op) {
    case OpKind::kMatMul:
    case OpKind::kGemm:
      return matmul_like(q, sigma);
    case OpKind::kConv2D:
      return conv_cost(q, sigma);
    case OpKind::kAdd:
    case OpKind::kMul:
    case OpKind::kReLU:
      return elementwise(q, sigma);
    case OpKind::kSoftmax:
      return softmax_cost(q, sigma);
    case OpKind::kTranspose:
      return transpose_cost(q, sigma);
    case OpKind::kReshape:
      return reshape_cost(q, sigma);
  }
  throw PlanningError("analytic cost: unsupported op");
}

double measure_kernel_ns(const CostQuery& q, const MeasureOptions& options) {
  q.validate();
  std::mt19937_64 rng(options.seed);
  NodeDecl node;
  node.name = "probe";
  node.op = q.op;
  node.attrs = q.attrs;

  std::vector<std::vector<float>> storage;
  std::vector<TensorView> inputs;
  for (size_t i = 0; i < q.input_shapes.size(); ++i) {
    node.inputs.push_back("in" + std::to_string(i));
    storage.push_back(synthetic_data(numel(q.input_shapes[i]), rng));
  }
  for (size_t i = 0; i < q.input_shapes.size(); ++i)
    inputs.push_back(TensorView::over(storage[i].data(), 0, q.input_shapes[i], q.input_layouts[i]));
  node.outputs.push_back("out");

  // A row-major reshape runs as an alias of its input.
  std::vector<float> out_storage;
  TensorView out;
  if (q.op == OpKind::kReshape && q.input_layouts[0].is_identity() && q.output_layout.is_identity()) {
    out = TensorView::over(storage[0].data(), 0, q.output_shape, q.output_layout);
  } else {
    out_storage.assign(numel(q.output_shape), 0.0f);
    out = TensorView::over(out_storage.data(), 0, q.output_shape, q.output_layout);
  }

  const int reps = std::max(options.reps, 1);
  for (int r = 0; r < reps; ++r) execute_node(node, inputs, out, q.loop_order);
  std::vector<double> samples;
  samples.reserve(reps);
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    execute_node(node, inputs, out, q.loop_order);
    auto t1 = std::chrono::steady_clock::now();
    samples.push_back(static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
  }
  std::sort(samples.begin(), samples.end());
  const size_t mid = samples.size() / 2;
  return samples.size() % 2 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
}

double MeasuredCostModel::cost(const CostQuery& q) const {
  const std::string key = q.canonical();
  {
    std::shared_lock lock(cache_mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  std::lock_guard bench(bench_mutex_);
  {
    std::shared_lock lock(cache_mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const double ns = measure_kernel_ns(q, options_);
  std::unique_lock lock(cache_mutex_);
  cache_.emplace(key, ns);
  return ns;
}

size_t MeasuredCostModel::cache_size() const {
  std::shared_lock lock(cache_mutex_);
  return cache_.size();
}

void MeasuredCostModel::load_cache(const std::string& path) {
  std::ifstream in(path);
  if (!in) return;  // first run: nothing cached yet
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("cost cache '" + path + "' is not valid JSON: " + e.what());
  }
  std::unique_lock lock(cache_mutex_);
  for (const auto& [key, value] : j.items()) cache_[key] = value.get<double>();
}

void MeasuredCostModel::save_cache(const std::string& path) const {
  nlohmann::json j = nlohmann::json::object();
  {
    std::shared_lock lock(cache_mutex_);
    for (const auto& [key, value] : cache_) j[key] = value;
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write cost cache '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace blueprint
