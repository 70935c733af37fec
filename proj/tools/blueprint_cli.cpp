// blueprint: plan, execute and evaluate layout/memory schedules for JSON models.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "blueprint/cost_model.hpp"
#include "blueprint/error.hpp"
#include "blueprint/executor.hpp"
#include "blueprint/graph.hpp"
#include "blueprint/layout_dp.hpp"
#include "blueprint/mem_planner.hpp"
#include "blueprint/oracles.hpp"
#include "blueprint/plan_io.hpp"
#include "blueprint/sequencer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace blueprint;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

// A failure attributed to one pipeline stage.
struct StageError {
  std::string stage;
  std::string message;
  int code;
};

template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw StageError{stage, e.what(), kExitUsage};
  } catch (const ValidationError& e) {
    throw StageError{stage, e.what(), kExitUsage};
  } catch (const PlanningError& e) {
    throw StageError{stage, e.what(), kExitUsage};
  } catch (const ExecutionError& e) {
    throw StageError{stage, e.what(), kExitInternal};
  } catch (const json::exception& e) {
    throw StageError{stage, e.what(), kExitUsage};
  }
}

struct GlobalOptions {
  std::string cost_model = "analytic";
  double sigma = kDefaultSigma;
  int reps = 10;
  uint64_t seed = 0;
  int layout_cap = kDefaultLayoutCap;
  std::string cost_cache;
  int64_t alignment = kDefaultAlignment;
  bool sigma_given = false;
};

void check_globals(const GlobalOptions& g) {
  if (g.cost_model != "analytic" && g.cost_model != "measured")
    throw StageError{"config", "--cost-model must be 'analytic' or 'measured'", kExitUsage};
  if (g.sigma_given && g.cost_model != "analytic")
    throw StageError{"config", "--sigma applies only to the analytic cost model", kExitUsage};
  if (!g.cost_cache.empty() && g.cost_model != "measured")
    throw StageError{"config", "--cost-cache applies only to the measured cost model", kExitUsage};
  if (g.sigma <= 0) throw StageError{"config", "--sigma must be positive", kExitUsage};
  if (g.reps < 1) throw StageError{"config", "--reps must be at least 1", kExitUsage};
  if (g.layout_cap < 1) throw StageError{"config", "--layout-cap must be at least 1", kExitUsage};
  if (g.alignment < 1) throw StageError{"config", "--alignment must be at least 1", kExitUsage};
}

// Owns the cost model and persists the measured cache on scope exit.
class CostContext {
 public:
  explicit CostContext(const GlobalOptions& g) : cache_path_(g.cost_cache) {
    if (g.cost_model == "measured") {
      auto m = std::make_unique<MeasuredCostModel>(MeasureOptions{g.reps, g.seed ? g.seed : 0x5eed});
      if (!cache_path_.empty() && fs::exists(cache_path_)) in_stage("cost-cache", [&] { m->load_cache(cache_path_); });
      measured_ = m.get();
      model_ = std::move(m);
    } else {
      model_ = std::make_unique<AnalyticCostModel>(g.sigma);
    }
  }
  void save() const {
    if (measured_ && !cache_path_.empty()) measured_->save_cache(cache_path_);
  }
  const CostModel& model() const { return *model_; }

 private:
  std::string cache_path_;
  std::unique_ptr<CostModel> model_;
  MeasuredCostModel* measured_ = nullptr;
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw StageError{"output", "cannot write " + path, kExitUsage};
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

std::string read_text(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ParseError(std::string(what) + " not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Graph load(const std::string& path) {
  return in_stage("load", [&] { return load_model_file(path); });
}

std::map<std::string, std::vector<float>> read_inputs(const Graph& g, const std::string& path, uint64_t seed) {
  std::map<std::string, std::vector<float>> inputs;
  if (!path.empty()) {
    json j = json::parse(read_text(path, "inputs"));
    for (const auto& [name, value] : j.items())
      inputs[name] = value.is_object() ? value.at("data").get<std::vector<float>>() : value.get<std::vector<float>>();
  }
  // Inputs not provided are drawn deterministically from the seed.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (const TensorDecl& t : g.tensors()) {
    if (t.kind != TensorKind::kInput || inputs.count(t.name)) continue;
    std::vector<float> v(t.numel());
    for (float& x : v) x = dist(rng);
    inputs[t.name] = std::move(v);
  }
  return inputs;
}

// A schedule plus its memory plan, from a plan file or the identity baseline.
struct Program {
  std::string label;
  Schedule schedule;
  MemoryPlan memory;
};

Program identity_program(const Graph& g, int64_t alignment) {
  Program p{"identity", identity_schedule(g), {}};
  p.memory = in_stage("memory", [&] { return plan_memory(g, p.schedule, alignment); });
  return p;
}

Program load_program(const Graph& g, const std::string& path, int64_t alignment) {
  PlanFile file = in_stage("plan", [&] { return read_plan_file(path); });
  Program p{fs::path(path).stem().string(), file.schedule, file.memory};
  in_stage("plan", [&] { validate_schedule(g, p.schedule); });
  if (p.memory.offsets.empty() && p.memory.arena_size == 0)
    p.memory = in_stage("memory", [&] { return plan_memory(g, p.schedule, alignment); });
  return p;
}

int64_t median(std::vector<int64_t> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0 : v[v.size() / 2];
}

// ---------------------------------------------------------------- plan

struct PlanArgs {
  std::string model, output, dump_sequences, dump_memmap;
  std::string tie_break = "first";
  std::string slot = "first-fit";
};

int cmd_plan(const GlobalOptions& go, const PlanArgs& a) {
  Graph g = load(a.model);
  CostContext cost(go);
  PlannerOptions opts{go.layout_cap,
                      a.tie_break == "random" ? VoteTieBreak::kRandom : VoteTieBreak::kEnumerationOrder, go.seed};
  if (!a.dump_sequences.empty())
    write_text(a.dump_sequences, in_stage("decompose", [&] { return decomposition_json(decompose(g)); }));
  Schedule s = in_stage("schedule", [&] { return plan_schedule(g, cost.model(), opts); });
  SlotPolicy policy = a.slot == "best-fit" ? SlotPolicy::kBestFit : SlotPolicy::kFirstFit;
  MemoryPlan mem = in_stage("memory", [&] { return plan_memory(g, s, go.alignment, policy); });
  if (!a.dump_memmap.empty())
    write_text(a.dump_memmap, memory_map_csv(planned_lifetimes(g, s, go.alignment), mem));
  write_text(a.output, write_plan({s, mem, {go.cost_model, go.seed}}));
  cost.save();
  return kExitOk;
}

// ---------------------------------------------------------------- run

struct RunArgs {
  std::string model, plan, input;
  std::string output = "outputs.json";
  std::string report = "report.json";
  bool check_nan = false, canary = false;
};

int cmd_run(const GlobalOptions& go, const RunArgs& a) {
  Graph g = load(a.model);
  Program p = a.plan.empty() ? identity_program(g, go.alignment) : load_program(g, a.plan, go.alignment);
  auto inputs = in_stage("inputs", [&] { return read_inputs(g, a.input, go.seed); });
  ExecutionReport r = in_stage("execute", [&] {
    Executor ex(g, p.schedule, p.memory);
    return ex.run(inputs, {a.check_nan, a.canary});
  });
  json outputs = json::object();
  for (const auto& [name, t] : r.outputs) outputs[name] = {{"shape", t.shape}, {"data", t.data}};
  write_text(a.output, outputs.dump());
  json report = {{"wall_ns", r.wall_ns},
                 {"per_node_ns", r.per_node_ns},
                 {"alloc_count", r.alloc_count},
                 {"canary_violations", r.canary_violations},
                 {"arena_size", p.memory.arena_size}};
  write_text(a.report, report.dump(2));
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string model, out_dir;
  std::vector<std::string> plans;
  bool baseline_identity = false;
};

struct NodeTiming {
  std::string node, op;
  int64_t ns;
};

std::vector<NodeTiming> bench_program(const Graph& g, const Program& p,
                                      const std::map<std::string, std::vector<float>>& inputs, int reps) {
  Executor ex = in_stage("execute", [&] { return Executor(g, p.schedule, p.memory); });
  std::map<std::string, std::vector<int64_t>> samples;
  for (int i = 0; i < 2 * reps; ++i) {
    ExecutionReport r = in_stage("execute", [&] { return ex.run(inputs); });
    if (i < reps) continue;  // warmup
    for (const auto& [node, ns] : r.per_node_ns) samples[node].push_back(ns);
  }
  std::vector<NodeTiming> rows;
  for (int idx : topo_order_indices(g)) {
    const NodeDecl& n = g.nodes()[idx];
    rows.push_back({n.name, std::string(op_name(n.op)), median(samples[n.name])});
  }
  return rows;
}

std::string timings_csv(const std::vector<NodeTiming>& rows) {
  std::string out = "node,op,ns\n";
  for (const auto& r : rows) out += r.node + "," + r.op + "," + std::to_string(r.ns) + "\n";
  return out;
}

int cmd_bench(const GlobalOptions& go, const BenchArgs& a) {
  Graph g = load(a.model);
  std::vector<Program> programs;
  if (a.baseline_identity || a.plans.empty()) programs.push_back(identity_program(g, go.alignment));
  for (const auto& path : a.plans) programs.push_back(load_program(g, path, go.alignment));
  auto inputs = in_stage("inputs", [&] { return read_inputs(g, "", go.seed); });

  std::vector<std::vector<NodeTiming>> timings;
  for (const Program& p : programs) timings.push_back(bench_program(g, p, inputs, go.reps));

  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    for (size_t i = 0; i < programs.size(); ++i)
      write_text((fs::path(a.out_dir) / ("bench_" + programs[i].label + ".csv")).string(), timings_csv(timings[i]));
  }
  if (programs.size() == 1) {
    if (a.out_dir.empty()) write_text("", timings_csv(timings[0]));
    return kExitOk;
  }

  // Side-by-side medians, each column normalized to the first program.
  std::string cmp = "node,op";
  for (const Program& p : programs) cmp += "," + p.label + "_ns";
  for (size_t i = 1; i < programs.size(); ++i) cmp += "," + programs[i].label + "_normalized";
  cmp += "\n";
  std::vector<int64_t> totals(programs.size(), 0);
  auto ratio = [](int64_t x, int64_t base) { return base > 0 ? static_cast<double>(x) / base : 0.0; };
  for (size_t row = 0; row < timings[0].size(); ++row) {
    cmp += timings[0][row].node + "," + timings[0][row].op;
    for (size_t i = 0; i < programs.size(); ++i) {
      cmp += "," + std::to_string(timings[i][row].ns);
      totals[i] += timings[i][row].ns;
    }
    for (size_t i = 1; i < programs.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, ",%.4f", ratio(timings[i][row].ns, timings[0][row].ns));
      cmp += buf;
    }
    cmp += "\n";
  }
  cmp += "total,";
  for (int64_t t : totals) cmp += "," + std::to_string(t);
  for (size_t i = 1; i < programs.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ",%.4f", ratio(totals[i], totals[0]));
    cmp += buf;
  }
  cmp += "\n";
  if (!a.out_dir.empty()) write_text((fs::path(a.out_dir) / "comparison.csv").string(), cmp);
  write_text("", cmp);
  return kExitOk;
}

// ---------------------------------------------------------------- oracle

struct OracleArgs {
  std::string model, output;
  uint64_t budget = kDefaultBudget;
};

int cmd_oracle(const GlobalOptions& go, const OracleArgs& a) {
  Graph g = load(a.model);
  CostContext cost(go);
  OracleReport r = in_stage("oracle", [&] {
    return compare(g, cost.model(), {go.layout_cap, VoteTieBreak::kEnumerationOrder, go.seed}, a.budget);
  });
  write_text(a.output, oracle_report_json(r));
  cost.save();
  return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::vector<std::string> bench, plans;
  std::string latency_output, memory_output;
};

int64_t bench_total(const std::string& path) {
  std::istringstream in(read_text(path, "bench CSV"));
  std::string line;
  if (!std::getline(in, line) || line.rfind("node,op,ns", 0) != 0)
    throw ValidationError(path + ": expected header node,op,ns");
  int64_t total = 0;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ValidationError(path + ": malformed row '" + line + "'");
    try {
      total += std::stoll(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ValidationError(path + ": malformed row '" + line + "'");
    }
    ++rows;
  }
  if (rows == 0) throw ValidationError(path + ": no rows");
  return total;
}

int cmd_report(const ReportArgs& a) {
  if (a.bench.empty() && a.plans.empty()) throw StageError{"report", "no inputs", kExitUsage};
  std::string latency, memory;
  if (!a.bench.empty()) {
    latency = "run,total_ns,normalized_latency\n";
    int64_t base = 0;
    for (size_t i = 0; i < a.bench.size(); ++i) {
      int64_t total = in_stage("report", [&] { return bench_total(a.bench[i]); });
      if (i == 0) base = total;
      char buf[64];
      std::snprintf(buf, sizeof buf, ",%lld,%.4f\n", static_cast<long long>(total),
                    base > 0 ? static_cast<double>(total) / base : 0.0);
      latency += fs::path(a.bench[i]).stem().string() + buf;
    }
  }
  if (!a.plans.empty()) {
    memory = "plan,arena_size,naive_size,lower_bound,reduction_pct\n";
    for (const auto& path : a.plans) {
      PlanFile p = in_stage("report", [&] { return read_plan_file(path); });
      const MemoryPlan& m = p.memory;
      char buf[128];
      std::snprintf(buf, sizeof buf, ",%lld,%lld,%lld,%.2f\n", static_cast<long long>(m.arena_size),
                    static_cast<long long>(m.naive_size), static_cast<long long>(m.lower_bound),
                    m.naive_size > 0 ? 100.0 * (1.0 - static_cast<double>(m.arena_size) / m.naive_size) : 0.0);
      memory += fs::path(path).stem().string() + buf;
    }
  }
  if (a.latency_output.empty() && a.memory_output.empty()) {
    write_text("", latency + (!latency.empty() && !memory.empty() ? "\n" : "") + memory);
  } else {
    if (!latency.empty()) write_text(a.latency_output, latency);
    if (!memory.empty()) write_text(a.memory_output, memory);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layout and memory planner for tensor computation graphs"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions go;
  app.add_option("--cost-model", go.cost_model, "analytic or measured")->capture_default_str();
  auto* sigma = app.add_option("--sigma", go.sigma, "strided-access penalty (analytic model)")->capture_default_str();
  app.add_option("--reps", go.reps, "timed repetitions per measurement")->capture_default_str();
  app.add_option("--seed", go.seed, "seed for random tie-breaks and generated inputs")->capture_default_str();
  app.add_option("--layout-cap", go.layout_cap, "max candidate layouts per tensor")->capture_default_str();
  app.add_option("--cost-cache", go.cost_cache, "JSON file persisting measured costs");
  app.add_option("--alignment", go.alignment, "arena offset alignment in bytes")->capture_default_str();

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "compute layouts, loop orders and the memory plan");
  plan_cmd->add_option("--model", plan.model)->required();
  plan_cmd->add_option("-o,--output", plan.output, "plan JSON path (default stdout)");
  plan_cmd->add_option("--dump-sequences", plan.dump_sequences, "write the decomposition JSON here");
  plan_cmd->add_option("--dump-memmap", plan.dump_memmap, "write per-step occupancy CSV here");
  plan_cmd->add_option("--tie-break", plan.tie_break)->check(CLI::IsMember({"first", "random"}));
  plan_cmd->add_option("--slot-policy", plan.slot)->check(CLI::IsMember({"first-fit", "best-fit"}));

  RunArgs runa;
  auto* run_cmd = app.add_subcommand("run", "execute a model under a plan");
  run_cmd->add_option("--model", runa.model)->required();
  run_cmd->add_option("--plan", runa.plan, "plan JSON (default: row-major identity)");
  run_cmd->add_option("--input", runa.input, "JSON object of input name -> row-major values");
  run_cmd->add_option("--output", runa.output)->capture_default_str();
  run_cmd->add_option("--report", runa.report)->capture_default_str();
  run_cmd->add_flag("--check-nan", runa.check_nan);
  run_cmd->add_flag("--canary", runa.canary);

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "per-node median latencies for one or more plans");
  bench_cmd->add_option("--model", bench.model)->required();
  bench_cmd->add_option("--plan", bench.plans, "plan JSON; repeat to compare");
  bench_cmd->add_flag("--baseline-identity", bench.baseline_identity, "prepend the row-major identity schedule");
  bench_cmd->add_option("--out-dir", bench.out_dir, "write bench_<label>.csv files here");

  OracleArgs oracle;
  auto* oracle_cmd = app.add_subcommand("oracle", "compare the planner against exhaustive search");
  oracle_cmd->add_option("--model", oracle.model)->required();
  oracle_cmd->add_option("--budget", oracle.budget)->capture_default_str();
  oracle_cmd->add_option("-o,--output", oracle.output);

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "summarize bench CSVs and plan files");
  report_cmd->add_option("--bench", report.bench, "bench CSVs; the first is the baseline");
  report_cmd->add_option("--plan", report.plans, "plan JSON files for the memory table");
  report_cmd->add_option("--latency-output", report.latency_output);
  report_cmd->add_option("--memory-output", report.memory_output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  go.sigma_given = sigma->count() > 0;

  try {
    check_globals(go);
    if (*plan_cmd) return cmd_plan(go, plan);
    if (*run_cmd) return cmd_run(go, runa);
    if (*bench_cmd) return cmd_bench(go, bench);
    if (*oracle_cmd) return cmd_oracle(go, oracle);
    if (*report_cmd) return cmd_report(report);
  } catch (const StageError& e) {
    std::cerr << "error [" << e.stage << "]: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
