#pragma once

#include <map>
#include <string>
#include <vector>

#include "blueprint/graph.hpp"

// Naive row-major kernels, written independently of the strided executor and
// used as the numerical ground truth in tests.
namespace blueprint::reference {

using Tensor = std::vector<float>;

Tensor matmul(const Tensor& a, const Tensor& b, int64_t m, int64_t k, int64_t n);
Tensor gemm(const Tensor& a, const Tensor& b, const Tensor& bias, const Shape& a_shape, const Shape& b_shape,
            const Shape& bias_shape, bool trans_a, bool trans_b);
Tensor conv2d(const Tensor& x, const Tensor& w, const Shape& x_shape, const Shape& w_shape, const Shape& y_shape,
              const NodeAttrs& attrs);
Tensor softmax(const Tensor& x, const Shape& shape, int axis);
Tensor transpose(const Tensor& x, const Shape& shape, const std::vector<int>& perm);

// Evaluates every node in topological order; returns all tensor values.
std::map<std::string, Tensor> evaluate(const Graph& graph, const std::map<std::string, Tensor>& inputs);

}  // namespace blueprint::reference
