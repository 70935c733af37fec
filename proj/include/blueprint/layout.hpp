#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blueprint/graph.hpp"

namespace blueprint {

// Axis permutation in physical order: perm[0] is outermost (largest stride),
// perm[rank-1] is contiguous. The identity is row-major.
struct Layout {
  std::vector<int> perm;

  static Layout identity(int rank);
  static Layout reversed(int rank);

  int rank() const { return static_cast<int>(perm.size()); }
  bool is_identity() const;
  bool is_valid() const;
  // Logical axis that varies fastest in memory; -1 for rank 0.
  int innermost() const { return perm.empty() ? -1 : perm.back(); }

  bool operator==(const Layout&) const = default;
  auto operator<=>(const Layout&) const = default;
};

std::string to_string(const Layout& layout);

using Strides = std::vector<int64_t>;

// Element strides per logical axis: stride[perm[r-1]] = 1 and
// stride[perm[i]] = stride[perm[i+1]] * shape[perm[i+1]].
Strides layout_strides(const Shape& shape, const Layout& layout);

// All rank! permutations in lexicographic order when rank! <= cap, otherwise
// the identity plus the cap-1 smallest non-identity permutations. The identity
// is always first.
std::vector<Layout> candidate_layouts(const TensorDecl& tensor, int cap);
std::vector<Layout> candidate_layouts(int rank, int cap);

inline constexpr int kDefaultLayoutCap = 24;

// Nesting order of a matmul-style i/j/k loop nest, outermost first.
class LoopOrder {
 public:
  enum Axis : uint8_t { kI = 0, kJ = 1, kK = 2 };

  constexpr LoopOrder() : axes_{kI, kJ, kK} {}
  constexpr LoopOrder(Axis outer, Axis middle, Axis inner) : axes_{outer, middle, inner} {}

  static std::optional<LoopOrder> parse(std::string_view text);
  // The six permutations of {i,j,k} in lexicographic order, ijk first.
  static const std::array<LoopOrder, 6>& all();

  Axis operator[](int level) const { return axes_[level]; }
  Axis innermost() const { return axes_[2]; }
  std::string str() const;

  bool operator==(const LoopOrder&) const = default;
  auto operator<=>(const LoopOrder&) const = default;

 private:
  std::array<Axis, 3> axes_;
};

inline bool reorderable(OpKind op) { return op == OpKind::kMatMul || op == OpKind::kGemm; }

}  // namespace blueprint
