#pragma once

#include <string>
#include <vector>

#include "blueprint/graph.hpp"

namespace blueprint {

// A directed node path. edges[i] is the tensor linking nodes[i] to
// nodes[i+1]; the last entry is the terminal node's output.
struct Sequence {
  std::vector<std::string> nodes;
  std::vector<std::string> edges;

  bool operator==(const Sequence&) const = default;
};

struct Decomposition {
  std::vector<Sequence> sequences;  // extraction order, first = global longest

  bool operator==(const Decomposition&) const = default;
};

// Longest directed path (in node count) over the induced subgraph on
// `subset` (node indices). Equal-length candidates resolve to the
// lexicographically smallest node-name tuple. Throws PlanningError when
// `subset` is empty.
Sequence find_longest_sequence(const Graph& graph, const std::vector<int>& subset);
Sequence find_longest_sequence(const Graph& graph);

// Repeated longest-path extraction: pull the longest sequence, split what is
// left into weakly-connected components and recurse on each.
Decomposition decompose(const Graph& graph);

std::string decomposition_json(const Decomposition& dec);

}  // namespace blueprint
