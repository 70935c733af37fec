#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blueprint {

inline constexpr int kMaxRank = 4;

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);

enum class OpKind { kMatMul, kGemm, kConv2D, kAdd, kMul, kReLU, kSoftmax, kTranspose, kReshape };

std::string_view op_name(OpKind op);
std::optional<OpKind> parse_op(std::string_view name);

enum class TensorKind { kInput, kConstant, kIntermediate, kOutput };

std::string_view kind_name(TensorKind kind);

struct TensorDecl {
  std::string name;
  Shape shape;
  TensorKind kind = TensorKind::kIntermediate;
  // Row-major initializer, present iff kind == kConstant.
  std::optional<std::vector<float>> data;

  int rank() const { return static_cast<int>(shape.size()); }
  int64_t numel() const { return blueprint::numel(shape); }
};

// Only the keys that appeared in the source model are set, so serialization
// reproduces the original attribute map.
struct NodeAttrs {
  std::optional<std::array<int64_t, 2>> strides;
  std::optional<std::array<int64_t, 4>> pads;  // top, left, bottom, right
  std::optional<std::vector<int>> perm;
  std::optional<int> axis;
  std::optional<int> trans_a;
  std::optional<int> trans_b;

  bool operator==(const NodeAttrs&) const = default;
};

struct NodeDecl {
  std::string name;
  OpKind op = OpKind::kReLU;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  NodeAttrs attrs;

  const std::string& output() const { return outputs.front(); }
};

// Resolved per-op parameters with defaults filled in.
std::array<int64_t, 2> conv_strides(const NodeAttrs& attrs);
std::array<int64_t, 4> conv_pads(const NodeAttrs& attrs);
std::vector<int> transpose_perm(const NodeAttrs& attrs, int rank);
int softmax_axis(const NodeAttrs& attrs, int rank);

// Validated, immutable computation graph. Node indices refer to `nodes()`.
class Graph {
 public:
  // Validates every invariant and throws ValidationError naming the first
  // violation.
  Graph(std::vector<TensorDecl> tensors, std::vector<NodeDecl> nodes);

  const std::vector<TensorDecl>& tensors() const { return tensors_; }
  const std::vector<NodeDecl>& nodes() const { return nodes_; }

  const TensorDecl& tensor(std::string_view name) const;
  const TensorDecl* find_tensor(std::string_view name) const;
  const NodeDecl& node(std::string_view name) const;
  int node_index(std::string_view name) const;

  // Index of the producing node, or nullopt for inputs and constants.
  std::optional<int> producer(std::string_view tensor) const;
  // Indices of consuming nodes in node-list order, without duplicates.
  const std::vector<int>& consumers(std::string_view tensor) const;

  // Node-level adjacency: successors of node i (nodes consuming any of its
  // outputs), sorted by name and deduplicated.
  const std::vector<int>& successors(int node) const { return succ_[node]; }
  const std::vector<int>& predecessors(int node) const { return pred_[node]; }

 private:
  void validate();
  void validate_shapes(const NodeDecl& node) const;

  std::vector<TensorDecl> tensors_;
  std::vector<NodeDecl> nodes_;
  std::map<std::string, int, std::less<>> tensor_index_;
  std::map<std::string, int, std::less<>> node_index_;
  std::map<std::string, int, std::less<>> producer_;
  std::map<std::string, std::vector<int>, std::less<>> consumers_;
  std::vector<std::vector<int>> succ_;
  std::vector<std::vector<int>> pred_;
};

Graph load_model(std::string_view json_text);
Graph load_model_file(const std::string& path);
std::string serialize_model(const Graph& graph);

// Kahn's algorithm with ties broken by ascending node name.
std::vector<std::string> topo_order(const Graph& graph);
std::vector<int> topo_order_indices(const Graph& graph);

}  // namespace blueprint
