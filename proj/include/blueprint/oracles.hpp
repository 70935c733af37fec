#pragma once

#include <cstdint>
#include <string>

#include "blueprint/cost_model.hpp"
#include "blueprint/graph.hpp"
#include "blueprint/layout_dp.hpp"
#include "blueprint/schedule.hpp"

namespace blueprint {

inline constexpr uint64_t kDefaultBudget = 10'000'000;

enum class Parallelism { kSerial, kOpenMP };

struct BruteForceResult {
  Schedule schedule;  // predicted_cost == optimal cost
  double cost = 0.0;
  // Product of every tensor's candidate count and every reorderable node's
  // six loop orders (saturating).
  uint64_t nominal_configurations = 1;
  // Joint assignments actually enumerated: layouts of tensors that couple two
  // or more nodes. Everything else is minimized exactly per node beforehand.
  uint64_t enumerated_configurations = 1;
};

// Exhaustive global optimum over layouts and loop orders. Refuses with
// BudgetExceeded when the joint enumeration exceeds `budget`. Ties resolve to
// the lowest configuration index regardless of parallelism.
BruteForceResult brute_force_schedule(const Graph& graph, const CostModel& cost, uint64_t budget = kDefaultBudget,
                                      int cap = kDefaultLayoutCap, Parallelism parallelism = Parallelism::kOpenMP);

struct OracleReport {
  double optimal_cost = 0.0;
  double planner_cost = 0.0;
  double ratio = 1.0;  // planner / optimal
  Schedule optimal;
  Schedule planner;
  int node_count = 0;
  int tensor_count = 0;
  uint64_t nominal_configurations = 0;
  uint64_t enumerated_configurations = 0;
};

OracleReport compare(const Graph& graph, const CostModel& cost, const PlannerOptions& options = {},
                     uint64_t budget = kDefaultBudget);

std::string oracle_report_json(const OracleReport& report);

}  // namespace blueprint
