#include "blueprint/sequencer.hpp"

#include <algorithm>
#include <functional>

#include <nlohmann/json.hpp>

#include "blueprint/error.hpp"

namespace blueprint {

namespace {

// The tensor through which `from` feeds `to`: the first input of `to` that
// `from` produces.
std::string linking_tensor(const Graph& g, int from, int to) {
  const NodeDecl& dst = g.nodes()[to];
  for (const auto& in : dst.inputs)
    if (g.producer(in) == from) return in;
  throw PlanningError("nodes '" + g.nodes()[from].name + "' and '" + dst.name + "' are not adjacent");
}

Sequence make_sequence(const Graph& g, const std::vector<int>& path) {
  Sequence s;
  for (size_t i = 0; i < path.size(); ++i) {
    s.nodes.push_back(g.nodes()[path[i]].name);
    if (i + 1 < path.size())
      s.edges.push_back(linking_tensor(g, path[i], path[i + 1]));
    else
      s.edges.push_back(g.nodes()[path[i]].output());
  }
  return s;
}

bool name_tuple_less(const Graph& g, const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                      [&](int x, int y) { return g.nodes()[x].name < g.nodes()[y].name; });
}

std::vector<int> longest_path(const Graph& g, const std::vector<int>& subset) {
  if (subset.empty()) throw PlanningError("cannot extract a sequence from an empty subgraph");
  std::vector<char> member(g.nodes().size(), 0);
  for (int n : subset) member[n] = 1;

  // Relax in reverse topological order: best[n] is the longest path starting
  // at n, lexicographically smallest among equals. Every candidate path from
  // n starts with n, so comparing the successors' best suffixes suffices.
  std::vector<int> order;
  for (int n : topo_order_indices(g))
    if (member[n]) order.push_back(n);
  std::vector<std::vector<int>> best(g.nodes().size());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int n = *it;
    const std::vector<int>* tail = nullptr;
    for (int s : g.successors(n)) {
      if (!member[s]) continue;
      const auto& cand = best[s];
      if (!tail || cand.size() > tail->size() ||
          (cand.size() == tail->size() && name_tuple_less(g, cand, *tail)))
        tail = &cand;
    }
    best[n].push_back(n);
    if (tail) best[n].insert(best[n].end(), tail->begin(), tail->end());
  }

  const std::vector<int>* winner = nullptr;
  for (int n : order) {
    const auto& cand = best[n];
    if (!winner || cand.size() > winner->size() ||
        (cand.size() == winner->size() && name_tuple_less(g, cand, *winner)))
      winner = &cand;
  }
  return *winner;
}

// Weakly-connected components of the induced subgraph, each sorted by node
// name, ordered by their smallest node name.
std::vector<std::vector<int>> components(const Graph& g, const std::vector<int>& subset) {
  std::vector<char> member(g.nodes().size(), 0);
  for (int n : subset) member[n] = 1;
  std::vector<int> comp(g.nodes().size(), -1);
  std::vector<std::vector<int>> out;
  for (int start : subset) {
    if (comp[start] != -1) continue;
    int id = static_cast<int>(out.size());
    out.emplace_back();
    std::vector<int> stack = {start};
    comp[start] = id;
    while (!stack.empty()) {
      int n = stack.back();
      stack.pop_back();
      out[id].push_back(n);
      for (const auto* adj : {&g.successors(n), &g.predecessors(n)})
        for (int m : *adj)
          if (member[m] && comp[m] == -1) {
            comp[m] = id;
            stack.push_back(m);
          }
    }
  }
  auto by_name = [&](int a, int b) { return g.nodes()[a].name < g.nodes()[b].name; };
  for (auto& c : out) std::sort(c.begin(), c.end(), by_name);
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) { return by_name(a.front(), b.front()); });
  return out;
}

void split(const Graph& g, const std::vector<int>& subset, std::vector<Sequence>& out) {
  std::vector<int> path = longest_path(g, subset);
  out.push_back(make_sequence(g, path));
  std::vector<char> taken(g.nodes().size(), 0);
  for (int n : path) taken[n] = 1;
  std::vector<int> rest;
  for (int n : subset)
    if (!taken[n]) rest.push_back(n);
  if (rest.empty()) return;
  for (const auto& comp : components(g, rest)) split(g, comp, out);
}

std::vector<int> all_nodes(const Graph& g) {
  std::vector<int> all(g.nodes().size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return all;
}

}  // namespace

Sequence find_longest_sequence(const Graph& g, const std::vector<int>& subset) {
  return make_sequence(g, longest_path(g, subset));
}

Sequence find_longest_sequence(const Graph& g) { return find_longest_sequence(g, all_nodes(g)); }

Decomposition decompose(const Graph& g) {
  Decomposition dec;
  if (!g.nodes().empty()) split(g, all_nodes(g), dec.sequences);
  return dec;
}

std::string decomposition_json(const Decomposition& dec) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : dec.sequences) j.push_back({{"nodes", s.nodes}, {"edges", s.edges}});
  return nlohmann::json{{"sequences", j}}.dump(2);
}

}  // namespace blueprint
