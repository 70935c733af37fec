#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "blueprint/graph.hpp"
#include "blueprint/layout.hpp"

namespace blueprint {

// Everything a kernel's cost depends on.
struct CostQuery {
  OpKind op = OpKind::kReLU;
  NodeAttrs attrs;
  std::vector<Shape> input_shapes;
  Shape output_shape;
  std::vector<Layout> input_layouts;
  Layout output_layout;
  std::optional<LoopOrder> loop_order;

  // Stable textual key, used for the measurement cache and its JSON file.
  std::string canonical() const;
  // Throws PlanningError on rank/layout mismatches or a misplaced loop order.
  void validate() const;
};

CostQuery make_query(const Graph& graph, const NodeDecl& node,
                     const std::function<const Layout&(const std::string&)>& layout_of,
                     std::optional<LoopOrder> loop_order);

enum class CostModelKind { kAnalytic, kMeasured };

std::string_view cost_model_name(CostModelKind kind);

// The `eval` oracle of the layout search. Implementations must be safe to
// call concurrently.
class CostModel {
 public:
  virtual ~CostModel() = default;
  virtual double cost(const CostQuery& query) const = 0;
  virtual CostModelKind kind() const = 0;
};

inline constexpr double kDefaultSigma = 8.0;

// Stride-penalty access count: every element access in the kernel's loop nest
// weighs 1 when its stride along the innermost loop variable is 0 or 1
// element, else sigma.
double analytic_cost(const CostQuery& query, double sigma = kDefaultSigma);

class AnalyticCostModel final : public CostModel {
 public:
  explicit AnalyticCostModel(double sigma = kDefaultSigma) : sigma_(sigma) {}
  double cost(const CostQuery& query) const override { return analytic_cost(query, sigma_); }
  CostModelKind kind() const override { return CostModelKind::kAnalytic; }
  double sigma() const { return sigma_; }

 private:
  double sigma_;
};

struct MeasureOptions {
  int reps = 10;  // timed repetitions; warmup runs the same number
  uint64_t seed = 0x5eed;
};

// Median wall-clock nanoseconds of the executor's kernel. Results are cached
// per canonical query; measurements are serialized.
class MeasuredCostModel final : public CostModel {
 public:
  explicit MeasuredCostModel(MeasureOptions options = {}) : options_(options) {}

  double cost(const CostQuery& query) const override;
  CostModelKind kind() const override { return CostModelKind::kMeasured; }

  size_t cache_size() const;
  void load_cache(const std::string& path);
  void save_cache(const std::string& path) const;

 private:
  MeasureOptions options_;
  mutable std::shared_mutex cache_mutex_;
  mutable std::mutex bench_mutex_;
  mutable std::map<std::string, double> cache_;
};

// One-off measurement, uncached.
double measure_kernel_ns(const CostQuery& query, const MeasureOptions& options);

}  // namespace blueprint
