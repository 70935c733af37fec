#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blueprint/graph.hpp"
#include "blueprint/layout.hpp"
#include "blueprint/mem_planner.hpp"
#include "blueprint/schedule.hpp"

namespace blueprint {

using Index = std::array<int64_t, kMaxRank>;

// Strided window onto f32 storage. `data` already includes `offset`.
struct TensorView {
  float* data = nullptr;
  int64_t offset = 0;  // bytes into the owning buffer
  int rank = 0;
  Index shape{1, 1, 1, 1};
  Index strides{0, 0, 0, 0};
  // Physical axis order, outermost first (the layout permutation).
  std::array<int, kMaxRank> order{0, 1, 2, 3};

  static TensorView over(float* base, int64_t offset_bytes, const Shape& shape, const Layout& layout);

  int64_t numel() const;
  float& at(const Index& idx) const {
    int64_t off = 0;
    for (int a = 0; a < rank; ++a) off += idx[a] * strides[a];
    return data[off];
  }
};

// Runs one kernel on prepared views. MatMul/Gemm honor `order`; every other
// op uses its canonical loop nest. Output views may alias the input only for
// a row-major Reshape, in which case this is a no-op.
void execute_node(const NodeDecl& node, std::span<const TensorView> inputs, const TensorView& output,
                  std::optional<LoopOrder> order);

// Row-major scatter/gather between a dense buffer and a strided view.
void copy_in(std::span<const float> row_major, const TensorView& dst);
std::vector<float> copy_out(const TensorView& src);

struct ExecutionOptions {
  bool check_nan = false;
  // Fill the arena with a sentinel before running and count sentinel bytes
  // that were overwritten outside every tensor's planned footprint.
  bool canary = false;
};

struct TensorData {
  Shape shape;
  std::vector<float> data;  // row-major
};

struct ExecutionReport {
  std::map<std::string, TensorData> outputs;
  int64_t wall_ns = 0;
  std::map<std::string, int64_t> per_node_ns;
  int alloc_count = 0;
  int64_t canary_violations = 0;
};

// A prepared program: constants are laid out once here, and every run()
// acquires exactly one arena.
class Executor {
 public:
  Executor(const Graph& graph, Schedule schedule, MemoryPlan plan);

  ExecutionReport run(const std::map<std::string, std::vector<float>>& inputs,
                      const ExecutionOptions& options = {}) const;

  const Graph& graph() const { return graph_; }

 private:
  const Graph& graph_;
  Schedule schedule_;
  MemoryPlan plan_;
  std::vector<int> order_;
  std::map<std::string, std::vector<float>> constants_;
};

ExecutionReport run(const Graph& graph, const Schedule& schedule, const MemoryPlan& plan,
                    const std::map<std::string, std::vector<float>>& inputs, const ExecutionOptions& options = {});

}  // namespace blueprint
