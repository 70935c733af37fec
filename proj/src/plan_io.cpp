#include "blueprint/plan_io.hpp"

#include <fstream>
#include <sstream>

#include "blueprint/error.hpp"

namespace blueprint {

using json = nlohmann::json;

json schedule_json(const Schedule& s) {
  json layouts = json::object();
  for (const auto& [name, layout] : s.layout) layouts[name] = layout.perm;
  json orders = json::object();
  for (const auto& [name, order] : s.loop_order) orders[name] = order.str();
  return {{"layouts", layouts}, {"loop_orders", orders}, {"predicted_cost", s.predicted_cost}};
}

json memory_json(const MemoryPlan& m) {
  json offsets = json::object();
  for (const auto& [name, off] : m.offsets) offsets[name] = off;
  json j = {{"arena_size", m.arena_size}, {"alignment", m.alignment}, {"offsets", offsets},
            {"naive_size", m.naive_size}, {"lower_bound", m.lower_bound}};
  if (!m.aliases.empty()) {
    json aliases = json::object();
    for (const auto& [alias, owner] : m.aliases) aliases[alias] = owner;
    j["aliases"] = aliases;
  }
  return j;
}

std::string write_plan(const PlanFile& plan) {
  json j = schedule_json(plan.schedule);
  j["memory"] = memory_json(plan.memory);
  j["meta"] = {{"cost_model", plan.meta.cost_model}, {"seed", plan.meta.seed}};
  return j.dump(2);
}

PlanFile read_plan(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed plan JSON: ") + e.what());
  }
  PlanFile plan;
  try {
    for (const auto& [name, perm] : j.at("layouts").items()) plan.schedule.layout[name] = Layout{perm.get<std::vector<int>>()};
    for (const auto& [name, text_order] : j.at("loop_orders").items()) {
      auto order = LoopOrder::parse(text_order.get<std::string>());
      if (!order) throw ValidationError("plan: bad loop order for node '" + name + "'");
      plan.schedule.loop_order[name] = *order;
    }
    plan.schedule.predicted_cost = j.value("predicted_cost", 0.0);
    if (j.contains("memory")) {
      const json& m = j.at("memory");
      plan.memory.arena_size = m.at("arena_size").get<int64_t>();
      plan.memory.alignment = m.value("alignment", kDefaultAlignment);
      for (const auto& [name, off] : m.at("offsets").items()) plan.memory.offsets[name] = off.get<int64_t>();
      plan.memory.naive_size = m.value("naive_size", int64_t{0});
      plan.memory.lower_bound = m.value("lower_bound", int64_t{0});
      if (m.contains("aliases"))
        for (const auto& [alias, owner] : m.at("aliases").items()) plan.memory.aliases[alias] = owner.get<std::string>();
    }
    if (j.contains("meta")) {
      plan.meta.cost_model = j["meta"].value("cost_model", std::string("analytic"));
      plan.meta.seed = j["meta"].value("seed", uint64_t{0});
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("plan does not match the schema: ") + e.what());
  }
  return plan;
}

PlanFile read_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("plan not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return read_plan(ss.str());
}

}  // namespace blueprint
