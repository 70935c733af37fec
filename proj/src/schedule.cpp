#include "blueprint/schedule.hpp"

#include "blueprint/error.hpp"

namespace blueprint {

Layout layout_of(const Schedule& schedule, const TensorDecl& tensor) {
  if (tensor.rank() == 0) return {};
  auto it = schedule.layout.find(tensor.name);
  if (it == schedule.layout.end()) throw ValidationError("schedule has no layout for tensor '" + tensor.name + "'");
  return it->second;
}

Schedule identity_schedule(const Graph& g) {
  Schedule s;
  for (const TensorDecl& t : g.tensors())
    if (t.rank() > 0) s.layout[t.name] = Layout::identity(t.rank());
  for (const NodeDecl& n : g.nodes())
    if (reorderable(n.op)) s.loop_order[n.name] = LoopOrder();
  return s;
}

void validate_schedule(const Graph& g, const Schedule& s) {
  for (const auto& [name, layout] : s.layout) {
    const TensorDecl* t = g.find_tensor(name);
    if (!t) throw ValidationError("plan names unknown tensor '" + name + "'");
    if (layout.rank() != t->rank())
      throw ValidationError("plan layout " + to_string(layout) + " for tensor '" + name + "' does not match rank " +
                            std::to_string(t->rank()));
    if (!layout.is_valid()) throw ValidationError("plan layout for '" + name + "' is not a permutation");
  }
  for (const TensorDecl& t : g.tensors())
    if (t.rank() > 0 && !s.layout.count(t.name))
      throw ValidationError("plan has no layout for tensor '" + t.name + "'");
  for (const auto& [name, order] : s.loop_order) {
    int idx = -1;
    try {
      idx = g.node_index(name);
    } catch (const ValidationError&) {
      throw ValidationError("plan names unknown node '" + name + "'");
    }
    if (!reorderable(g.nodes()[idx].op))
      throw ValidationError("plan gives a loop order to non-reorderable node '" + name + "'");
  }
  for (const NodeDecl& n : g.nodes())
    if (reorderable(n.op) && !s.loop_order.count(n.name))
      throw ValidationError("plan has no loop order for node '" + n.name + "'");
}

bool reshape_aliases(const Graph& g, const NodeDecl& node, const Schedule& s) {
  if (node.op != OpKind::kReshape) return false;
  return layout_of(s, g.tensor(node.inputs[0])).is_identity() && layout_of(s, g.tensor(node.output())).is_identity();
}

}  // namespace blueprint
