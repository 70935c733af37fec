#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "blueprint/mem_planner.hpp"
#include "blueprint/schedule.hpp"

namespace blueprint {

struct PlanMeta {
  std::string cost_model = "analytic";
  uint64_t seed = 0;
};

struct PlanFile {
  Schedule schedule;
  MemoryPlan memory;
  PlanMeta meta;
};

// {"layouts":{tensor:perm}, "loop_orders":{node:"ijk"}, "predicted_cost":num}
nlohmann::json schedule_json(const Schedule& schedule);
// {"arena_size", "alignment", "offsets", "naive_size", "lower_bound", "aliases"}
nlohmann::json memory_json(const MemoryPlan& plan);

std::string write_plan(const PlanFile& plan);
// Throws ParseError on malformed JSON and ValidationError on schema errors.
PlanFile read_plan(std::string_view text);
PlanFile read_plan_file(const std::string& path);

}  // namespace blueprint
