#include "blueprint/reference.hpp"

#include <algorithm>
#include <cmath>

namespace blueprint::reference {

Tensor matmul(const Tensor& a, const Tensor& b, int64_t m, int64_t k, int64_t n) {
  Tensor c(m * n, 0.0f);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (int64_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  return c;
}

Tensor gemm(const Tensor& a, const Tensor& b, const Tensor& bias, const Shape& as, const Shape& bs,
            const Shape& bias_shape, bool ta, bool tb) {
  const int64_t m = ta ? as[1] : as[0], k = ta ? as[0] : as[1];
  const int64_t n = tb ? bs[0] : bs[1];
  Tensor c(m * n, 0.0f);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (int64_t p = 0; p < k; ++p) {
        float av = ta ? a[p * as[1] + i] : a[i * as[1] + p];
        float bv = tb ? b[j * bs[1] + p] : b[p * bs[1] + j];
        acc += av * bv;
      }
      c[i * n + j] = acc + (bias_shape.size() == 1 ? bias[j] : bias[i * n + j]);
    }
  return c;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Shape& xs, const Shape& ws, const Shape& ys,
              const NodeAttrs& attrs) {
  const auto st = conv_strides(attrs);
  const auto pd = conv_pads(attrs);
  Tensor y(numel(ys), 0.0f);
  for (int64_t n = 0; n < ys[0]; ++n)
    for (int64_t o = 0; o < ys[1]; ++o)
      for (int64_t oh = 0; oh < ys[2]; ++oh)
        for (int64_t ow = 0; ow < ys[3]; ++ow) {
          float acc = 0.0f;
          for (int64_t c = 0; c < xs[1]; ++c)
            for (int64_t kh = 0; kh < ws[2]; ++kh)
              for (int64_t kw = 0; kw < ws[3]; ++kw) {
                int64_t ih = oh * st[0] + kh - pd[0], iw = ow * st[1] + kw - pd[1];
                if (ih < 0 || ih >= xs[2] || iw < 0 || iw >= xs[3]) continue;
                acc += x[((n * xs[1] + c) * xs[2] + ih) * xs[3] + iw] * w[((o * ws[1] + c) * ws[2] + kh) * ws[3] + kw];
              }
          y[((n * ys[1] + o) * ys[2] + oh) * ys[3] + ow] = acc;
        }
  return y;
}

Tensor softmax(const Tensor& x, const Shape& shape, int axis) {
  int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= shape[a];
  for (size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  const int64_t len = shape[axis];
  Tensor y(x.size());
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t in = 0; in < inner; ++in) {
      auto at = [&](int64_t t) { return (o * len + t) * inner + in; };
      float peak = x[at(0)];
      for (int64_t t = 1; t < len; ++t) peak = std::max(peak, x[at(t)]);
      double sum = 0.0;
      for (int64_t t = 0; t < len; ++t) sum += std::exp(x[at(t)] - peak);
      for (int64_t t = 0; t < len; ++t) y[at(t)] = static_cast<float>(std::exp(x[at(t)] - peak) / sum);
    }
  return y;
}

Tensor transpose(const Tensor& x, const Shape& shape, const std::vector<int>& perm) {
  const int r = static_cast<int>(shape.size());
  Shape out_shape(r);
  for (int a = 0; a < r; ++a) out_shape[a] = shape[perm[a]];
  std::vector<int64_t> in_stride(r, 1);
  for (int a = r - 2; a >= 0; --a) in_stride[a] = in_stride[a + 1] * shape[a + 1];
  Tensor y(x.size());
  std::vector<int64_t> o(r, 0);
  for (int64_t f = 0; f < static_cast<int64_t>(x.size()); ++f) {
    int64_t rest = f;
    for (int a = r - 1; a >= 0; --a) {
      o[a] = rest % out_shape[a];
      rest /= out_shape[a];
    }
    int64_t src = 0;
    for (int a = 0; a < r; ++a) src += o[a] * in_stride[perm[a]];
    y[f] = x[src];
  }
  return y;
}

std::map<std::string, Tensor> evaluate(const Graph& g, const std::map<std::string, Tensor>& inputs) {
  std::map<std::string, Tensor> vals = inputs;
  for (const TensorDecl& t : g.tensors())
    if (t.data) vals[t.name] = *t.data;
  for (int idx : topo_order_indices(g)) {
    const NodeDecl& n = g.nodes()[idx];
    auto in = [&](size_t i) -> const Tensor& { return vals.at(n.inputs[i]); };
    auto shape = [&](size_t i) -> const Shape& { return g.tensor(n.inputs[i]).shape; };
    const Shape& out_shape = g.tensor(n.output()).shape;
    Tensor out;
    switch (n.op) {
      case OpKind::kMatMul:
        out = matmul(in(0), in(1), shape(0)[0], shape(0)[1], shape(1)[1]);
        break;
      case OpKind::kGemm:
        out = gemm(in(0), in(1), in(2), shape(0), shape(1), shape(2), n.attrs.trans_a.value_or(0),
                   n.attrs.trans_b.value_or(0));
        break;
      case OpKind::kConv2D:
        out = conv2d(in(0), in(1), shape(0), shape(1), out_shape, n.attrs);
        break;
      case OpKind::kAdd:
      case OpKind::kMul:
      case OpKind::kReLU:
        out.resize(in(0).size());
        for (size_t i = 0; i < out.size(); ++i) {
          if (n.op == OpKind::kAdd) out[i] = in(0)[i] + in(1)[i];
          else if (n.op == OpKind::kMul) out[i] = in(0)[i] * in(1)[i];
          else out[i] = in(0)[i] > 0.0f ? in(0)[i] : 0.0f;
        }
        break;
      case OpKind::kSoftmax:
        out = softmax(in(0), shape(0), softmax_axis(n.attrs, static_cast<int>(shape(0).size())));
        break;
      case OpKind::kTranspose:
        out = transpose(in(0), shape(0), transpose_perm(n.attrs, static_cast<int>(shape(0).size())));
        break;
      case OpKind::kReshape:
        out = in(0);
        break;
    }
    vals[n.output()] = std::move(out);
  }
  return vals;
}

}  // namespace blueprint::reference
