#pragma once

#include <map>
#include <string>

#include "blueprint/graph.hpp"
#include "blueprint/layout.hpp"

namespace blueprint {

using LayoutMap = std::map<std::string, Layout, std::less<>>;

// The optimized blueprint: a layout for every tensor of rank >= 1 and a loop
// order for every MatMul/Gemm node.
struct Schedule {
  LayoutMap layout;
  std::map<std::string, LoopOrder, std::less<>> loop_order;
  double predicted_cost = 0.0;
};

// Scheduled layout of `tensor`; rank-0 tensors always get the empty layout.
Layout layout_of(const Schedule& schedule, const TensorDecl& tensor);

// All row-major, ijk loop orders. The unoptimized baseline.
Schedule identity_schedule(const Graph& graph);

// Throws ValidationError if a layout is missing, has the wrong rank or is not
// a permutation, or if a reorderable node has no loop order.
void validate_schedule(const Graph& graph, const Schedule& schedule);

// A Reshape whose source and destination are both row-major is executed as
// an aliasing view instead of a copy.
bool reshape_aliases(const Graph& graph, const NodeDecl& node, const Schedule& schedule);

}  // namespace blueprint
