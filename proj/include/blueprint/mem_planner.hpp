#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blueprint/graph.hpp"

namespace blueprint {

struct Schedule;

inline constexpr int64_t kDefaultAlignment = 64;

// Step interval [first, last] during which a tensor's buffer must stay valid.
struct Lifetime {
  std::string tensor;
  int64_t size = 0;  // bytes
  int first = 0;
  int last = 0;

  bool operator==(const Lifetime&) const = default;
};

inline bool lifetimes_overlap(const Lifetime& a, const Lifetime& b) {
  return a.first <= b.last && b.first <= a.last;
}

struct MemoryPlan {
  std::map<std::string, int64_t, std::less<>> offsets;
  int64_t arena_size = 0;
  int64_t alignment = kDefaultAlignment;
  // Tensors served as views of another tensor's storage (row-major Reshape),
  // mapped to the tensor that owns the bytes.
  std::map<std::string, std::string, std::less<>> aliases;
  int64_t naive_size = 0;
  int64_t lower_bound = 0;

  bool operator==(const MemoryPlan&) const = default;
};

enum class SlotPolicy { kFirstFit, kBestFit };

int64_t align_up(int64_t bytes, int64_t alignment);

// One lifetime per non-constant tensor in declaration order. `first` is the
// producing step (0 for inputs); `last` is the final consuming step, or the
// step count for graph outputs.
std::vector<Lifetime> compute_lifetimes(const Graph& graph, const std::vector<std::string>& order,
                                        int64_t alignment = kDefaultAlignment);

// Offline Greedy-by-Size: largest first (ties by name), each placed in the
// lowest-offset gap (or the smallest gap, for kBestFit) among the already
// placed tensors whose lifetimes overlap it, else at the end of them.
MemoryPlan greedy_by_size(std::span<const Lifetime> lifetimes, int64_t alignment = kDefaultAlignment,
                          SlotPolicy policy = SlotPolicy::kFirstFit);

// Sequential offsets in list order, no reuse.
MemoryPlan naive_alloc(std::span<const Lifetime> lifetimes, int64_t alignment = kDefaultAlignment);

// Max over steps of the total bytes live at that step.
int64_t liveness_lower_bound(std::span<const Lifetime> lifetimes, int64_t alignment = 1);

// First pair of lifetime-overlapping tensors whose byte ranges intersect, or
// a missing/misaligned offset, described as text.
std::optional<std::string> find_plan_violation(std::span<const Lifetime> lifetimes, const MemoryPlan& plan);

// Full planning pass for a scheduled graph: lifetimes over the topological
// order, row-major Reshape outputs folded into their source, Greedy-by-Size,
// plus naive and lower-bound yardsticks.
MemoryPlan plan_memory(const Graph& graph, const Schedule& schedule, int64_t alignment = kDefaultAlignment,
                       SlotPolicy policy = SlotPolicy::kFirstFit);

// The lifetimes plan_memory actually packs (after alias folding).
std::vector<Lifetime> planned_lifetimes(const Graph& graph, const Schedule& schedule,
                                        int64_t alignment = kDefaultAlignment,
                                        std::map<std::string, std::string, std::less<>>* aliases = nullptr);

// Per-step occupancy as CSV: step,tensor,offset,size.
std::string memory_map_csv(std::span<const Lifetime> lifetimes, const MemoryPlan& plan);

}  // namespace blueprint
