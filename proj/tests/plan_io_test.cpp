#include <gtest/gtest.h>

#include <random>

#include "blueprint/error.hpp"
#include "blueprint/layout_dp.hpp"
#include "blueprint/plan_io.hpp"
#include "test_support.hpp"

using namespace blueprint;

TEST(PlanIo, RoundTripsPlannerOutput) {
  AnalyticCostModel cost;
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g = bptest::random_chain(rng, 2 + trial % 5, 3);
    PlanFile plan;
    plan.schedule = plan_schedule(g, cost);
    plan.memory = plan_memory(g, plan.schedule);
    plan.meta = {"measured", 77};
    PlanFile back = read_plan(write_plan(plan));
    EXPECT_EQ(back.schedule.layout, plan.schedule.layout);
    EXPECT_EQ(back.schedule.loop_order, plan.schedule.loop_order);
    EXPECT_EQ(back.schedule.predicted_cost, plan.schedule.predicted_cost);
    EXPECT_EQ(back.memory.offsets, plan.memory.offsets);
    EXPECT_EQ(back.memory.aliases, plan.memory.aliases);
    EXPECT_EQ(back.memory.arena_size, plan.memory.arena_size);
    EXPECT_EQ(back.memory.alignment, plan.memory.alignment);
    EXPECT_EQ(back.memory.naive_size, plan.memory.naive_size);
    EXPECT_EQ(back.memory.lower_bound, plan.memory.lower_bound);
    EXPECT_EQ(back.meta.cost_model, "measured");
    EXPECT_EQ(back.meta.seed, 77u);
    EXPECT_EQ(write_plan(back), write_plan(plan));
  }
}

TEST(PlanIo, MemorySectionIsOptional) {
  PlanFile p = read_plan(R"({"layouts":{"x":[1,0]},"loop_orders":{"mm":"kij"}})");
  EXPECT_EQ(p.schedule.layout.at("x"), Layout::reversed(2));
  EXPECT_EQ(p.schedule.loop_order.at("mm").str(), "kij");
  EXPECT_TRUE(p.memory.offsets.empty());
}

TEST(PlanIo, MalformedJsonIsAParseError) {
  EXPECT_THROW(read_plan("{\"layouts\": "), ParseError);
  EXPECT_THROW(read_plan(""), ParseError);
}

TEST(PlanIo, SchemaViolationsAreValidationErrors) {
  EXPECT_THROW(read_plan("{}"), ValidationError);
  EXPECT_THROW(read_plan(R"({"layouts":{"x":"row"},"loop_orders":{}})"), ValidationError);
  EXPECT_THROW(read_plan(R"({"layouts":{},"loop_orders":{"mm":"iij"}})"), ValidationError);
  EXPECT_THROW(read_plan(R"({"layouts":{},"loop_orders":{},"memory":{"offsets":{}}})"), ValidationError);
}

TEST(PlanIo, MissingFile) {
  try {
    read_plan_file("/nonexistent/plan.json");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("plan not found"), std::string::npos);
  }
}
