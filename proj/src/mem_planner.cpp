#include "blueprint/mem_planner.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "blueprint/schedule.hpp"

namespace blueprint {

int64_t align_up(int64_t bytes, int64_t alignment) {
  if (alignment <= 1) return bytes;
  int64_t rounded = (bytes + alignment - 1) / alignment * alignment;
  return std::max(rounded, alignment);
}

std::vector<Lifetime> compute_lifetimes(const Graph& g, const std::vector<std::string>& order, int64_t alignment) {
  const int steps = static_cast<int>(order.size());
  std::map<std::string, int, std::less<>> step_of;
  for (int i = 0; i < steps; ++i) step_of[order[i]] = i;

  std::vector<Lifetime> out;
  for (const TensorDecl& t : g.tensors()) {
    if (t.kind == TensorKind::kConstant) continue;
    Lifetime lt{t.name, align_up(t.numel() * static_cast<int64_t>(sizeof(float)), alignment), 0, 0};
    if (auto p = g.producer(t.name)) lt.first = step_of.at(g.nodes()[*p].name);
    lt.last = lt.first;
    for (int c : g.consumers(t.name)) lt.last = std::max(lt.last, step_of.at(g.nodes()[c].name));
    if (t.kind == TensorKind::kOutput) lt.last = steps;
    out.push_back(std::move(lt));
  }
  return out;
}

MemoryPlan greedy_by_size(std::span<const Lifetime> lifetimes, int64_t alignment, SlotPolicy policy) {
  std::vector<Lifetime> queue(lifetimes.begin(), lifetimes.end());
  for (auto& lt : queue) lt.size = align_up(lt.size, alignment);
  std::stable_sort(queue.begin(), queue.end(), [](const Lifetime& a, const Lifetime& b) {
    if (a.size != b.size) return a.size > b.size;
    return a.tensor < b.tensor;
  });

  struct Placed {
    const Lifetime* lt;
    int64_t offset;
  };
  std::vector<Placed> placed;
  MemoryPlan plan;
  plan.alignment = alignment;

  for (const Lifetime& lt : queue) {
    // Byte ranges already claimed during this tensor's lifetime.
    std::vector<std::pair<int64_t, int64_t>> busy;
    for (const Placed& p : placed)
      if (lifetimes_overlap(*p.lt, lt)) busy.emplace_back(p.offset, p.offset + p.lt->size);
    std::sort(busy.begin(), busy.end());

    std::optional<int64_t> chosen;
    int64_t chosen_gap = std::numeric_limits<int64_t>::max();
    int64_t cursor = 0;
    for (const auto& [lo, hi] : busy) {
      int64_t gap = lo - cursor;
      if (gap >= lt.size) {
        if (policy == SlotPolicy::kFirstFit) {
          chosen = cursor;
          break;
        }
        if (gap < chosen_gap) {
          chosen = cursor;
          chosen_gap = gap;
        }
      }
      cursor = std::max(cursor, hi);
    }
    int64_t offset = chosen.value_or(cursor);
    placed.push_back({&lt, offset});
    plan.offsets[lt.tensor] = offset;
    plan.arena_size = std::max(plan.arena_size, offset + lt.size);
  }
  return plan;
}

MemoryPlan naive_alloc(std::span<const Lifetime> lifetimes, int64_t alignment) {
  MemoryPlan plan;
  plan.alignment = alignment;
  for (const Lifetime& lt : lifetimes) {
    plan.offsets[lt.tensor] = plan.arena_size;
    plan.arena_size += align_up(lt.size, alignment);
  }
  return plan;
}

int64_t liveness_lower_bound(std::span<const Lifetime> lifetimes, int64_t alignment) {
  int last_step = 0;
  for (const Lifetime& lt : lifetimes) last_step = std::max(last_step, lt.last);
  std::vector<int64_t> live(static_cast<size_t>(last_step) + 2, 0);
  for (const Lifetime& lt : lifetimes) {
    int64_t s = align_up(lt.size, alignment);
    live[lt.first] += s;
    live[lt.last + 1] -= s;
  }
  int64_t best = 0, running = 0;
  for (int t = 0; t <= last_step; ++t) {
    running += live[t];
    best = std::max(best, running);
  }
  return best;
}

std::optional<std::string> find_plan_violation(std::span<const Lifetime> lifetimes, const MemoryPlan& plan) {
  std::vector<std::pair<int64_t, int64_t>> ranges;
  for (const Lifetime& lt : lifetimes) {
    auto it = plan.offsets.find(lt.tensor);
    if (it == plan.offsets.end()) return "tensor '" + lt.tensor + "' has no offset";
    if (plan.alignment > 1 && it->second % plan.alignment != 0) return "tensor '" + lt.tensor + "' is misaligned";
    int64_t size = align_up(lt.size, plan.alignment);
    if (it->second < 0 || it->second + size > plan.arena_size)
      return "tensor '" + lt.tensor + "' exceeds the arena";
    ranges.emplace_back(it->second, it->second + size);
  }
  for (size_t i = 0; i < lifetimes.size(); ++i)
    for (size_t j = i + 1; j < lifetimes.size(); ++j) {
      if (!lifetimes_overlap(lifetimes[i], lifetimes[j])) continue;
      if (ranges[i].first < ranges[j].second && ranges[j].first < ranges[i].second)
        return "tensors '" + lifetimes[i].tensor + "' and '" + lifetimes[j].tensor +
               "' are live together but share bytes";
    }
  return std::nullopt;
}

std::vector<Lifetime> planned_lifetimes(const Graph& g, const Schedule& schedule, int64_t alignment,
                                        std::map<std::string, std::string, std::less<>>* aliases_out) {
  std::vector<Lifetime> lifetimes = compute_lifetimes(g, topo_order(g), alignment);

  // Fold aliasing Reshape outputs into the tensor that owns their bytes; the
  // owner must then stay live until the alias's last use.
  std::map<std::string, std::string, std::less<>> aliases;
  for (int idx : topo_order_indices(g)) {
    const NodeDecl& n = g.nodes()[idx];
    if (!reshape_aliases(g, n, schedule)) continue;
    std::string root = n.inputs[0];
    if (auto it = aliases.find(root); it != aliases.end()) root = it->second;
    aliases[n.output()] = root;
  }
  if (!aliases.empty()) {
    std::map<std::string, size_t, std::less<>> pos;
    for (size_t i = 0; i < lifetimes.size(); ++i) pos[lifetimes[i].tensor] = i;
    std::vector<char> drop(lifetimes.size(), 0);
    for (const auto& [alias, root] : aliases) {
      size_t a = pos.at(alias);
      drop[a] = 1;
      if (auto r = pos.find(root); r != pos.end()) {
        Lifetime& owner = lifetimes[r->second];
        owner.first = std::min(owner.first, lifetimes[a].first);
        owner.last = std::max(owner.last, lifetimes[a].last);
      }
    }
    std::vector<Lifetime> kept;
    for (size_t i = 0; i < lifetimes.size(); ++i)
      if (!drop[i]) kept.push_back(std::move(lifetimes[i]));
    lifetimes = std::move(kept);
  }
  if (aliases_out) *aliases_out = std::move(aliases);
  return lifetimes;
}

MemoryPlan plan_memory(const Graph& g, const Schedule& schedule, int64_t alignment, SlotPolicy policy) {
  std::map<std::string, std::string, std::less<>> aliases;
  std::vector<Lifetime> lifetimes = planned_lifetimes(g, schedule, alignment, &aliases);
  MemoryPlan plan = greedy_by_size(lifetimes, alignment, policy);
  plan.aliases = std::move(aliases);
  plan.naive_size = naive_alloc(compute_lifetimes(g, topo_order(g), alignment), alignment).arena_size;
  plan.lower_bound = liveness_lower_bound(lifetimes, alignment);
  return plan;
}

std::string memory_map_csv(std::span<const Lifetime> lifetimes, const MemoryPlan& plan) {
  std::ostringstream os;
  os << "step,tensor,offset,size\n";
  int last_step = 0;
  for (const Lifetime& lt : lifetimes) last_step = std::max(last_step, lt.last);
  for (int t = 0; t <= last_step; ++t)
    for (const Lifetime& lt : lifetimes)
      if (lt.first <= t && t <= lt.last)
        os << t << ',' << lt.tensor << ',' << plan.offsets.at(lt.tensor) << ',' << align_up(lt.size, plan.alignment)
           << '\n';
  return os.str();
}

}  // namespace blueprint
