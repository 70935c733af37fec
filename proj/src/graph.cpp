#include "blueprint/graph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "blueprint/error.hpp"

namespace blueprint {

using json = nlohmann::json;

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

namespace {

constexpr std::array<std::pair<OpKind, std::string_view>, 9> kOps = {{
    {OpKind::kMatMul, "MatMul"},
    {OpKind::kGemm, "Gemm"},
    {OpKind::kConv2D, "Conv2D"},
    {OpKind::kAdd, "Add"},
    {OpKind::kMul, "Mul"},
    {OpKind::kReLU, "ReLU"},
    {OpKind::kSoftmax, "Softmax"},
    {OpKind::kTranspose, "Transpose"},
    {OpKind::kReshape, "Reshape"},
}};

struct Arity {
  size_t inputs;
  size_t outputs;
};

Arity arity(OpKind op) {
  switch (op) {
    case OpKind::kGemm:
      return {3, 1};
    case OpKind::kMatMul:
    case OpKind::kConv2D:
    case OpKind::kAdd:
    case OpKind::kMul:
      return {2, 1};
    default:
      return {1, 1};
  }
}

std::vector<std::string_view> allowed_attrs(OpKind op) {
  switch (op) {
    case OpKind::kConv2D:
      return {"strides", "pads"};
    case OpKind::kTranspose:
      return {"perm"};
    case OpKind::kSoftmax:
      return {"axis"};
    case OpKind::kGemm:
      return {"transA", "transB"};
    default:
      return {};
  }
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

const std::vector<int> kNoConsumers;

}  // namespace

std::string_view op_name(OpKind op) {
  for (const auto& [k, n] : kOps)
    if (k == op) return n;
  return "?";
}

std::optional<OpKind> parse_op(std::string_view name) {
  for (const auto& [k, n] : kOps)
    if (n == name) return k;
  return std::nullopt;
}

std::string_view kind_name(TensorKind kind) {
  switch (kind) {
    case TensorKind::kInput:
      return "input";
    case TensorKind::kConstant:
      return "constant";
    case TensorKind::kIntermediate:
      return "intermediate";
    case TensorKind::kOutput:
      return "output";
  }
  return "?";
}

std::array<int64_t, 2> conv_strides(const NodeAttrs& attrs) {
  return attrs.strides.value_or(std::array<int64_t, 2>{1, 1});
}

std::array<int64_t, 4> conv_pads(const NodeAttrs& attrs) {
  return attrs.pads.value_or(std::array<int64_t, 4>{0, 0, 0, 0});
}

std::vector<int> transpose_perm(const NodeAttrs& attrs, int rank) {
  if (attrs.perm) return *attrs.perm;
  std::vector<int> rev(rank);
  for (int i = 0; i < rank; ++i) rev[i] = rank - 1 - i;
  return rev;
}

int softmax_axis(const NodeAttrs& attrs, int rank) {
  int axis = attrs.axis.value_or(-1);
  return axis < 0 ? axis + rank : axis;
}

Graph::Graph(std::vector<TensorDecl> tensors, std::vector<NodeDecl> nodes)
    : tensors_(std::move(tensors)), nodes_(std::move(nodes)) {
  validate();
}

const TensorDecl* Graph::find_tensor(std::string_view name) const {
  auto it = tensor_index_.find(name);
  return it == tensor_index_.end() ? nullptr : &tensors_[it->second];
}

const TensorDecl& Graph::tensor(std::string_view name) const {
  const TensorDecl* t = find_tensor(name);
  if (!t) throw ValidationError("unknown tensor '" + std::string(name) + "'");
  return *t;
}

int Graph::node_index(std::string_view name) const {
  auto it = node_index_.find(name);
  if (it == node_index_.end()) throw ValidationError("unknown node '" + std::string(name) + "'");
  return it->second;
}

const NodeDecl& Graph::node(std::string_view name) const { return nodes_[node_index(name)]; }

std::optional<int> Graph::producer(std::string_view tensor) const {
  auto it = producer_.find(tensor);
  if (it == producer_.end()) return std::nullopt;
  return it->second;
}

const std::vector<int>& Graph::consumers(std::string_view tensor) const {
  auto it = consumers_.find(tensor);
  return it == consumers_.end() ? kNoConsumers : it->second;
}

void Graph::validate() {
  for (size_t i = 0; i < tensors_.size(); ++i) {
    const TensorDecl& t = tensors_[i];
    if (t.name.empty()) fail("tensor with empty name");
    if (!tensor_index_.emplace(t.name, static_cast<int>(i)).second)
      fail("duplicate tensor name '" + t.name + "'");
    if (t.rank() > kMaxRank) fail("tensor '" + t.name + "' has rank > 4");
    for (int64_t e : t.shape)
      if (e < 1) fail("tensor '" + t.name + "' has non-positive extent");
    if (t.kind == TensorKind::kConstant) {
      if (!t.data) fail("constant '" + t.name + "' without data");
      if (static_cast<int64_t>(t.data->size()) != t.numel())
        fail("constant '" + t.name + "': data length mismatch (" + std::to_string(t.data->size()) +
             " values for shape " + shape_str(t.shape) + ")");
    } else if (t.data) {
      fail("non-constant tensor '" + t.name + "' carries data");
    }
  }

  for (size_t i = 0; i < nodes_.size(); ++i) {
    const NodeDecl& n = nodes_[i];
    if (n.name.empty()) fail("node with empty name");
    if (!node_index_.emplace(n.name, static_cast<int>(i)).second)
      fail("duplicate node name '" + n.name + "'");
    Arity a = arity(n.op);
    if (n.inputs.size() != a.inputs || n.outputs.size() != a.outputs)
      fail("node '" + n.name + "': bad arity for " + std::string(op_name(n.op)) + " (expected " +
           std::to_string(a.inputs) + " in / " + std::to_string(a.outputs) + " out)");
    for (const auto& in : n.inputs)
      if (!tensor_index_.count(in)) fail("node '" + n.name + "' references unknown tensor '" + in + "'");
    for (const auto& out : n.outputs) {
      auto it = tensor_index_.find(out);
      if (it == tensor_index_.end()) fail("node '" + n.name + "' references unknown tensor '" + out + "'");
      TensorKind k = tensors_[it->second].kind;
      if (k == TensorKind::kInput || k == TensorKind::kConstant)
        fail("node '" + n.name + "' produces " + std::string(kind_name(k)) + " tensor '" + out + "'");
      if (!producer_.emplace(out, static_cast<int>(i)).second)
        fail("tensor '" + out + "' has more than one producer");
    }
    for (const auto& in : n.inputs) {
      auto& list = consumers_[in];
      if (std::find(list.begin(), list.end(), static_cast<int>(i)) == list.end())
        list.push_back(static_cast<int>(i));
    }
  }

  for (const TensorDecl& t : tensors_) {
    bool produced = producer_.count(t.name) > 0;
    if ((t.kind == TensorKind::kIntermediate || t.kind == TensorKind::kOutput) && !produced)
      fail(std::string(kind_name(t.kind)) + " tensor '" + t.name + "' has no producer");
    if (t.kind == TensorKind::kIntermediate && consumers(t.name).empty())
      fail("intermediate tensor '" + t.name + "' has no consumer");
  }

  succ_.assign(nodes_.size(), {});
  pred_.assign(nodes_.size(), {});
  for (size_t i = 0; i < nodes_.size(); ++i) {
    for (const auto& out : nodes_[i].outputs)
      for (int c : consumers(out)) succ_[i].push_back(c);
    for (const auto& in : nodes_[i].inputs)
      if (auto p = producer(in)) pred_[i].push_back(*p);
  }
  auto by_name = [this](int a, int b) { return nodes_[a].name < nodes_[b].name; };
  for (auto* adj : {&succ_, &pred_}) {
    for (auto& list : *adj) {
      std::sort(list.begin(), list.end(), by_name);
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
  }

  // Cycle check: Kahn over node adjacency must visit every node.
  std::vector<int> indeg(nodes_.size(), 0);
  for (const auto& list : succ_)
    for (int s : list) ++indeg[s];
  std::vector<int> ready;
  for (size_t i = 0; i < nodes_.size(); ++i)
    if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
  size_t visited = 0;
  while (!ready.empty()) {
    int n = ready.back();
    ready.pop_back();
    ++visited;
    for (int s : succ_[n])
      if (--indeg[s] == 0) ready.push_back(s);
  }
  if (visited != nodes_.size()) fail("graph contains a cycle");

  for (const NodeDecl& n : nodes_) validate_shapes(n);
}

void Graph::validate_shapes(const NodeDecl& n) const {
  auto in = [&](size_t i) -> const Shape& { return tensor(n.inputs[i]).shape; };
  const Shape& out = tensor(n.output()).shape;
  auto bad = [&](const std::string& why) {
    fail("node '" + n.name + "' (" + std::string(op_name(n.op)) + "): " + why);
  };

  // Attribute keys present must be legal for the op.
  auto allowed = allowed_attrs(n.op);
  auto allow = [&](std::string_view key, bool present) {
    if (present && std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      bad("unknown attribute '" + std::string(key) + "'");
  };
  allow("strides", n.attrs.strides.has_value());
  allow("pads", n.attrs.pads.has_value());
  allow("perm", n.attrs.perm.has_value());
  allow("axis", n.attrs.axis.has_value());
  allow("transA", n.attrs.trans_a.has_value());
  allow("transB", n.attrs.trans_b.has_value());

  switch (n.op) {
    case OpKind::kMatMul: {
      const Shape &a = in(0), &b = in(1);
      if (a.size() != 2 || b.size() != 2 || out.size() != 2) bad("operands must be rank 2");
      if (a[1] != b[0] || out[0] != a[0] || out[1] != b[1])
        bad("shape mismatch " + shape_str(a) + " x " + shape_str(b) + " -> " + shape_str(out));
      break;
    }
    case OpKind::kGemm: {
      const Shape &a = in(0), &b = in(1), &bias = in(2);
      if (a.size() != 2 || b.size() != 2 || out.size() != 2) bad("operands must be rank 2");
      int ta = n.attrs.trans_a.value_or(0), tb = n.attrs.trans_b.value_or(0);
      if ((ta != 0 && ta != 1) || (tb != 0 && tb != 1)) bad("transA/transB must be 0 or 1");
      int64_t m = ta ? a[1] : a[0], k = ta ? a[0] : a[1];
      int64_t kb = tb ? b[1] : b[0], nn = tb ? b[0] : b[1];
      if (k != kb || out[0] != m || out[1] != nn)
        bad("shape mismatch " + shape_str(a) + " x " + shape_str(b) + " -> " + shape_str(out));
      bool bias_ok = (bias.size() == 1 && bias[0] == nn) || (bias.size() == 2 && bias == out);
      if (!bias_ok) bad("bias must be [N] or [M,N]");
      break;
    }
    case OpKind::kConv2D: {
      const Shape &x = in(0), &w = in(1);
      if (x.size() != 4 || w.size() != 4 || out.size() != 4) bad("operands must be rank 4 (NCHW/OIHW)");
      auto st = conv_strides(n.attrs);
      auto pd = conv_pads(n.attrs);
      if (st[0] < 1 || st[1] < 1) bad("strides must be positive");
      for (int64_t p : pd)
        if (p < 0) bad("pads must be non-negative");
      if (x[1] != w[1]) bad("channel mismatch");
      int64_t oh_span = x[2] + pd[0] + pd[2] - w[2];
      int64_t ow_span = x[3] + pd[1] + pd[3] - w[3];
      if (oh_span < 0 || ow_span < 0) bad("kernel larger than padded input");
      Shape expect = {x[0], w[0], oh_span / st[0] + 1, ow_span / st[1] + 1};
      if (out != expect) bad("output shape " + shape_str(out) + " != " + shape_str(expect));
      break;
    }
    case OpKind::kAdd:
    case OpKind::kMul:
      if (in(0) != in(1) || in(0) != out) bad("elementwise operands must share one shape");
      break;
    case OpKind::kReLU:
      if (in(0) != out) bad("output shape must equal input shape");
      break;
    case OpKind::kSoftmax: {
      if (in(0) != out) bad("output shape must equal input shape");
      int r = static_cast<int>(out.size());
      int axis = n.attrs.axis.value_or(-1);
      if (r == 0 || axis < -r || axis >= r) bad("axis out of range");
      break;
    }
    case OpKind::kTranspose: {
      int r = static_cast<int>(in(0).size());
      auto perm = transpose_perm(n.attrs, r);
      std::vector<int> sorted = perm;
      std::sort(sorted.begin(), sorted.end());
      if (static_cast<int>(sorted.size()) != r) bad("perm is not a permutation");
      for (int i = 0; i < r; ++i)
        if (sorted[i] != i) bad("perm is not a permutation");
      Shape expect(r);
      for (int i = 0; i < r; ++i) expect[i] = in(0)[perm[i]];
      if (out != expect) bad("output shape " + shape_str(out) + " != " + shape_str(expect));
      break;
    }
    case OpKind::kReshape:
      if (numel(in(0)) != numel(out)) bad("element count changes");
      break;
  }
}

// --- JSON -----------------------------------------------------------------

namespace {

template <typename T>
T get_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

NodeAttrs parse_attrs(const json& j, const std::string& where) {
  NodeAttrs a;
  if (j.is_null()) return a;
  if (!j.is_object()) throw ValidationError(where + ": attrs must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "strides") {
        auto v = value.get<std::vector<int64_t>>();
        if (v.size() != 2) throw ValidationError(where + ": strides needs 2 values");
        a.strides = std::array<int64_t, 2>{v[0], v[1]};
      } else if (key == "pads") {
        auto v = value.get<std::vector<int64_t>>();
        if (v.size() != 4) throw ValidationError(where + ": pads needs 4 values");
        a.pads = std::array<int64_t, 4>{v[0], v[1], v[2], v[3]};
      } else if (key == "perm") {
        a.perm = value.get<std::vector<int>>();
      } else if (key == "axis") {
        a.axis = value.get<int>();
      } else if (key == "transA") {
        a.trans_a = value.get<int>();
      } else if (key == "transB") {
        a.trans_b = value.get<int>();
      } else {
        throw ValidationError(where + ": unknown attribute '" + key + "'");
      }
    }
  } catch (const json::exception&) {
    throw ValidationError(where + ": malformed attribute value");
  }
  return a;
}

json attrs_json(const NodeAttrs& a) {
  json j = json::object();
  if (a.strides) j["strides"] = *a.strides;
  if (a.pads) j["pads"] = *a.pads;
  if (a.perm) j["perm"] = *a.perm;
  if (a.axis) j["axis"] = *a.axis;
  if (a.trans_a) j["transA"] = *a.trans_a;
  if (a.trans_b) j["transB"] = *a.trans_b;
  return j;
}

}  // namespace

Graph load_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed model JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("model must be a JSON object");
  for (const auto& [key, _] : doc.items())
    if (key != "tensors" && key != "nodes") throw ValidationError("unknown top-level key '" + key + "'");

  std::vector<TensorDecl> tensors;
  const json empty = json::array();
  const json& jt = doc.contains("tensors") ? doc["tensors"] : empty;
  if (!jt.is_array()) throw ValidationError("'tensors' must be an array");
  for (size_t i = 0; i < jt.size(); ++i) {
    const json& t = jt[i];
    std::string where = "tensors[" + std::to_string(i) + "]";
    if (!t.is_object()) throw ValidationError(where + " must be an object");
    TensorDecl d;
    d.name = get_field<std::string>(t, "name", where);
    d.shape = get_field<Shape>(t, "shape", where);
    std::string dtype = t.contains("dtype") ? get_field<std::string>(t, "dtype", where) : "f32";
    if (dtype != "f32") throw ValidationError(where + ": unsupported dtype '" + dtype + "'");
    std::string kind = get_field<std::string>(t, "kind", where);
    if (kind == "input") d.kind = TensorKind::kInput;
    else if (kind == "constant") d.kind = TensorKind::kConstant;
    else if (kind == "intermediate") d.kind = TensorKind::kIntermediate;
    else if (kind == "output") d.kind = TensorKind::kOutput;
    else throw ValidationError(where + ": unknown kind '" + kind + "'");
    if (t.contains("data")) d.data = get_field<std::vector<float>>(t, "data", where);
    tensors.push_back(std::move(d));
  }

  std::vector<NodeDecl> nodes;
  const json& jn = doc.contains("nodes") ? doc["nodes"] : empty;
  if (!jn.is_array()) throw ValidationError("'nodes' must be an array");
  for (size_t i = 0; i < jn.size(); ++i) {
    const json& n = jn[i];
    std::string where = "nodes[" + std::to_string(i) + "]";
    if (!n.is_object()) throw ValidationError(where + " must be an object");
    NodeDecl d;
    d.name = get_field<std::string>(n, "name", where);
    std::string op = get_field<std::string>(n, "op", where);
    auto kind = parse_op(op);
    if (!kind) throw ValidationError(where + ": unsupported op '" + op + "'");
    d.op = *kind;
    d.inputs = get_field<std::vector<std::string>>(n, "inputs", where);
    d.outputs = get_field<std::vector<std::string>>(n, "outputs", where);
    d.attrs = parse_attrs(n.contains("attrs") ? n["attrs"] : json(), where);
    nodes.push_back(std::move(d));
  }
  return Graph(std::move(tensors), std::move(nodes));
}

Graph load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("model not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

std::string serialize_model(const Graph& g) {
  json doc;
  doc["tensors"] = json::array();
  for (const TensorDecl& t : g.tensors()) {
    json jt = {{"name", t.name}, {"shape", t.shape}, {"dtype", "f32"}, {"kind", kind_name(t.kind)}};
    if (t.data) jt["data"] = *t.data;
    doc["tensors"].push_back(std::move(jt));
  }
  doc["nodes"] = json::array();
  for (const NodeDecl& n : g.nodes()) {
    doc["nodes"].push_back({{"name", n.name},
                            {"op", op_name(n.op)},
                            {"inputs", n.inputs},
                            {"outputs", n.outputs},
                            {"attrs", attrs_json(n.attrs)}});
  }
  return doc.dump(2);
}

std::vector<int> topo_order_indices(const Graph& g) {
  const auto& nodes = g.nodes();
  std::vector<int> indeg(nodes.size(), 0);
  for (size_t i = 0; i < nodes.size(); ++i) indeg[i] = static_cast<int>(g.predecessors(static_cast<int>(i)).size());
  auto later = [&](int a, int b) { return nodes[a].name > nodes[b].name; };
  std::priority_queue<int, std::vector<int>, decltype(later)> ready(later);
  for (size_t i = 0; i < nodes.size(); ++i)
    if (indeg[i] == 0) ready.push(static_cast<int>(i));
  std::vector<int> order;
  order.reserve(nodes.size());
  while (!ready.empty()) {
    int n = ready.top();
    ready.pop();
    order.push_back(n);
    for (int s : g.successors(n))
      if (--indeg[s] == 0) ready.push(s);
  }
  return order;
}

std::vector<std::string> topo_order(const Graph& g) {
  std::vector<std::string> names;
  for (int i : topo_order_indices(g)) names.push_back(g.nodes()[i].name);
  return names;
}

}  // namespace blueprint
