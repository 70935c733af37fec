#include "blueprint/layout.hpp"

#include <algorithm>
#include <numeric>

namespace blueprint {

Layout Layout::identity(int rank) {
  Layout l;
  l.perm.resize(rank);
  std::iota(l.perm.begin(), l.perm.end(), 0);
  return l;
}

Layout Layout::reversed(int rank) {
  Layout l = identity(rank);
  std::reverse(l.perm.begin(), l.perm.end());
  return l;
}

bool Layout::is_identity() const {
  for (int i = 0; i < rank(); ++i)
    if (perm[i] != i) return false;
  return true;
}

bool Layout::is_valid() const {
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < rank(); ++i)
    if (sorted[i] != i) return false;
  return true;
}

std::string to_string(const Layout& layout) {
  std::string s = "[";
  for (int i = 0; i < layout.rank(); ++i) {
    if (i) s += ",";
    s += std::to_string(layout.perm[i]);
  }
  return s + "]";
}

Strides layout_strides(const Shape& shape, const Layout& layout) {
  const int r = static_cast<int>(shape.size());
  Strides strides(r, 1);
  int64_t running = 1;
  for (int i = r - 1; i >= 0; --i) {
    strides[layout.perm[i]] = running;
    running *= shape[layout.perm[i]];
  }
  return strides;
}

std::vector<Layout> candidate_layouts(int rank, int cap) {
  cap = std::max(cap, 1);
  std::vector<Layout> out;
  Layout l = Layout::identity(rank);
  do {
    out.push_back(l);
    if (static_cast<int>(out.size()) == cap) break;
  } while (std::next_permutation(l.perm.begin(), l.perm.end()));
  return out;
}

std::vector<Layout> candidate_layouts(const TensorDecl& tensor, int cap) {
  return candidate_layouts(tensor.rank(), cap);
}

std::optional<LoopOrder> LoopOrder::parse(std::string_view text) {
  for (const LoopOrder& o : all())
    if (o.str() == text) return o;
  return std::nullopt;
}

const std::array<LoopOrder, 6>& LoopOrder::all() {
  static const std::array<LoopOrder, 6> orders = {
      LoopOrder(kI, kJ, kK), LoopOrder(kI, kK, kJ), LoopOrder(kJ, kI, kK),
      LoopOrder(kJ, kK, kI), LoopOrder(kK, kI, kJ), LoopOrder(kK, kJ, kI),
  };
  return orders;
}

std::string LoopOrder::str() const {
  static constexpr char kNames[] = {'i', 'j', 'k'};
  return {kNames[axes_[0]], kNames[axes_[1]], kNames[axes_[2]]};
}

}  // namespace blueprint
