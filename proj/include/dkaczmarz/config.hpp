#pragma once

// JSON run configuration: system, network, subnetworks, relaxation, solver
// and output settings. Parsing resolves every default, so a dumped config
// parses back to an identical structure.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dkaczmarz/core.hpp"
#include "dkaczmarz/experiments.hpp"
#include "dkaczmarz/solver.hpp"
#include "dkaczmarz/topology.hpp"

namespace dkaczmarz {

/// Schema violation; `pointer()` is the JSON pointer of the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : Error("config error at " + (pointer.empty() ? std::string("/") : pointer) + ": " + message),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

enum class NetworkKind { Tree, Dag };

struct NetworkSpec {
  NetworkKind kind = NetworkKind::Tree;
  std::size_t nodes = 0;
  NodeId root = 0;                   // trees only
  std::vector<TreeEdge> tree_edges;  // weights always present after parsing
  std::vector<DagEdge> dag_edges;    // likewise

  bool operator==(const NetworkSpec& o) const {
    auto same_tree = [](const TreeEdge& a, const TreeEdge& b) {
      return a.parent == b.parent && a.child == b.child && a.w == b.w;
    };
    auto same_dag = [](const DagEdge& a, const DagEdge& b) {
      return a.from == b.from && a.to == b.to && a.wd == b.wd && a.wp == b.wp;
    };
    return kind == o.kind && nodes == o.nodes && root == o.root &&
           std::equal(tree_edges.begin(), tree_edges.end(), o.tree_edges.begin(), o.tree_edges.end(), same_tree) &&
           std::equal(dag_edges.begin(), dag_edges.end(), o.dag_edges.begin(), o.dag_edges.end(), same_dag);
  }
};

struct SystemSpec {
  std::optional<Matrix> matrix;
  std::optional<Vector> rhs;
  std::optional<GeneratorSpec> generator;

  bool operator==(const SystemSpec& o) const {
    return matrix.has_value() == o.matrix.has_value() && (!matrix || *matrix == *o.matrix) &&
           rhs.has_value() == o.rhs.has_value() && (!rhs || *rhs == *o.rhs) && generator == o.generator;
  }
};

struct SweepSpec {
  std::vector<std::vector<NodeId>> parameters;
  double base = kBaselineOmega;
  std::vector<std::string> grid;  // "start:stop:step" per parameter

  bool operator==(const SweepSpec&) const = default;
};

struct RunConfig {
  SystemSpec system;
  NetworkSpec network;
  std::vector<std::vector<NodeId>> subnetworks;
  std::vector<double> omega;  // per node, unscaled
  double scale = 1.0;
  std::size_t max_iterations = 10000;
  double step_tolerance = 1e-12;
  std::optional<Vector> initial_estimate;
  std::string output_dir = ".";
  std::string output_format = "json";
  std::optional<SweepSpec> sweep;

  bool operator==(const RunConfig& o) const {
    return system == o.system && network == o.network && subnetworks == o.subnetworks &&
           omega == o.omega && scale == o.scale && max_iterations == o.max_iterations &&
           step_tolerance == o.step_tolerance &&
           initial_estimate.has_value() == o.initial_estimate.has_value() &&
           (!initial_estimate || *initial_estimate == *o.initial_estimate) &&
           output_dir == o.output_dir && output_format == o.output_format && sweep == o.sweep;
  }

  RelaxationAssignment relaxation() const { return {omega, scale}; }
  SolverConfig solver() const { return {max_iterations, step_tolerance, initial_estimate}; }
};

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {

using nlohmann::json;

inline const json& field(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(ptr + "/" + key, "missing required field");
  return *it;
}

inline const json* optional_field(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

inline double as_real(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw ConfigError(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(ptr, "expected a finite number");
  return v;
}

inline std::size_t as_index(const json& j, const std::string& ptr) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ConfigError(ptr, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

inline bool as_bool(const json& j, const std::string& ptr) {
  if (!j.is_boolean()) throw ConfigError(ptr, "expected true or false");
  return j.get<bool>();
}

inline std::string as_string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw ConfigError(ptr, "expected a string");
  return j.get<std::string>();
}

inline const json& as_array(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw ConfigError(ptr, "expected an array");
  return j;
}

/// A real number, or [re, im].
inline Scalar as_scalar(const json& j, const std::string& ptr) {
  if (j.is_number()) return {as_real(j, ptr), 0.0};
  if (j.is_array() && j.size() == 2) return {as_real(j[0], ptr + "/0"), as_real(j[1], ptr + "/1")};
  throw ConfigError(ptr, "expected a number or a [re, im] pair");
}

inline Vector as_vector(const json& j, const std::string& ptr) {
  as_array(j, ptr);
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = as_scalar(j[i], ptr + "/" + std::to_string(i));
  return v;
}

inline Matrix as_matrix(const json& j, const std::string& ptr) {
  as_array(j, ptr);
  if (j.empty()) throw ConfigError(ptr, "matrix needs at least one row");
  const std::size_t cols = as_array(j[0], ptr + "/0").size();
  if (cols == 0) throw ConfigError(ptr + "/0", "matrix rows must be nonempty");
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string rp = ptr + "/" + std::to_string(r);
    if (as_array(j[r], rp).size() != cols) throw ConfigError(rp, "all rows must have the same length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = as_scalar(j[r][c], rp + "/" + std::to_string(c));
  }
  return m;
}

inline json scalar_json(Scalar z) {
  if (z.imag() == 0.0) return z.real();
  return json::array({z.real(), z.imag()});
}

inline json vector_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(scalar_json(v(i)));
  return out;
}

inline json matrix_json(const Matrix& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(scalar_json(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

inline std::vector<NodeId> node_list(const json& j, const std::string& ptr, std::size_t nodes) {
  as_array(j, ptr);
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = ptr + "/" + std::to_string(i);
    const NodeId v = as_index(j[i], p);
    if (v >= nodes) throw ConfigError(p, "node " + std::to_string(v) + " does not exist");
    out.push_back(v);
  }
  return out;
}

inline SystemSpec parse_system(const json& j, const std::string& ptr) {
  SystemSpec s;
  const json* gen = optional_field(j, "generator", ptr);
  const json* mat = optional_field(j, "matrix", ptr);
  if ((gen != nullptr) == (mat != nullptr))
    throw ConfigError(ptr, "give exactly one of \"matrix\" (with \"rhs\") or \"generator\"");
  if (mat) {
    s.matrix = as_matrix(*mat, ptr + "/matrix");
    s.rhs = as_vector(field(j, "rhs", ptr), ptr + "/rhs");
    if (s.rhs->size() != s.matrix->rows())
      throw ConfigError(ptr + "/rhs", "expected " + std::to_string(s.matrix->rows()) + " entries");
    return s;
  }
  const std::string gp = ptr + "/generator";
  GeneratorSpec g;
  try {
    g.kind = generator_kind_from(as_string(field(*gen, "kind", gp), gp + "/kind"));
  } catch (const ArgumentError& e) {
    throw ConfigError(gp + "/kind", e.what());
  }
  g.k = static_cast<Index>(as_index(field(*gen, "k", gp), gp + "/k"));
  g.d = static_cast<Index>(as_index(field(*gen, "d", gp), gp + "/d"));
  if (g.k == 0 || g.d == 0) throw ConfigError(gp, "k and d must be positive");
  g.seed = as_index(field(*gen, "seed", gp), gp + "/seed");
  if (const json* e = optional_field(*gen, "epsilon", gp)) g.epsilon = as_real(*e, gp + "/epsilon");
  if (const json* r = optional_field(*gen, "rank", gp)) g.rank = static_cast<Index>(as_index(*r, gp + "/rank"));
  if (const json* c = optional_field(*gen, "consistent", gp)) g.consistent = as_bool(*c, gp + "/consistent");
  if (const json* c = optional_field(*gen, "complex", gp)) g.complex_entries = as_bool(*c, gp + "/complex");
  if (const json* r = optional_field(*gen, "rng", gp)) g.rng_name = as_string(*r, gp + "/rng");
  if (g.rng_name != kRngName) throw ConfigError(gp + "/rng", std::string("only \"") + kRngName + "\" is supported");
  s.generator = g;
  return s;
}

inline NetworkSpec parse_network(const json& j, const std::string& ptr) {
  NetworkSpec n;
  const std::string type = as_string(field(j, "type", ptr), ptr + "/type");
  n.nodes = as_index(field(j, "nodes", ptr), ptr + "/nodes");
  if (n.nodes == 0) throw ConfigError(ptr + "/nodes", "need at least one node");

  if (type == "tree") {
    n.kind = NetworkKind::Tree;
    n.root = as_index(field(j, "root", ptr), ptr + "/root");
    if (n.root >= n.nodes) throw ConfigError(ptr + "/root", "root does not exist");
    std::vector<TreeEdge> raw;
    const std::string ep = ptr + "/edges";
    const json& edges = as_array(field(j, "edges", ptr), ep);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string p = ep + "/" + std::to_string(i);
      TreeEdge e;
      e.parent = as_index(field(edges[i], "parent", p), p + "/parent");
      e.child = as_index(field(edges[i], "child", p), p + "/child");
      if (const json* w = optional_field(edges[i], "w", p)) e.w = as_real(*w, p + "/w");
      raw.push_back(e);
    }
    try {
      n.tree_edges = TreeNetwork::from_edges(n.nodes, n.root, raw).edges();
    } catch (const ValidationError& e) {
      throw ConfigError(ep, e.what());
    }
    return n;
  }
  if (type == "dag") {
    n.kind = NetworkKind::Dag;
    std::vector<DagEdge> raw;
    if (const json* rel = optional_field(j, "relation", ptr)) {
      if (optional_field(j, "edges", ptr)) throw ConfigError(ptr, "give \"edges\" or \"relation\", not both");
      std::vector<std::pair<NodeId, NodeId>> pairs;
      const std::string rp = ptr + "/relation";
      for (std::size_t i = 0; i < as_array(*rel, rp).size(); ++i) {
        const auto pr = node_list((*rel)[i], rp + "/" + std::to_string(i), n.nodes);
        if (pr.size() != 2) throw ConfigError(rp + "/" + std::to_string(i), "expected a [from, to] pair");
        pairs.emplace_back(pr[0], pr[1]);
      }
      try {
        for (const auto& [u, v] : hasse_reduce(pairs)) raw.push_back({u, v, {}, {}});
      } catch (const OrderError& e) {
        throw ConfigError(rp, e.what());
      }
    } else {
      const std::string ep = ptr + "/edges";
      const json& edges = as_array(field(j, "edges", ptr), ep);
      for (std::size_t i = 0; i < edges.size(); ++i) {
        const std::string p = ep + "/" + std::to_string(i);
        DagEdge e;
        e.from = as_index(field(edges[i], "from", p), p + "/from");
        e.to = as_index(field(edges[i], "to", p), p + "/to");
        if (const json* w = optional_field(edges[i], "wd", p)) e.wd = as_real(*w, p + "/wd");
        if (const json* w = optional_field(edges[i], "wp", p)) e.wp = as_real(*w, p + "/wp");
        raw.push_back(e);
      }
    }
    try {
      const DagNetwork dag = DagNetwork::from_edges(n.nodes, raw);
      for (const auto& e : dag.edges()) n.dag_edges.push_back({e.from, e.to, e.wd, e.wp});
    } catch (const ValidationError& e) {
      throw ConfigError(ptr + "/edges", e.what());
    }
    return n;
  }
  throw ConfigError(ptr + "/type", "expected \"tree\" or \"dag\"");
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  RunConfig c;
  c.system = parse_system(field(j, "system", ""), "/system");
  c.network = parse_network(field(j, "network", ""), "/network");
  const std::size_t n = c.network.nodes;
  const Index rows = c.system.matrix ? c.system.matrix->rows() : c.system.generator->k;
  if (static_cast<std::size_t>(rows) != n)
    throw ConfigError("/system", "the system has " + std::to_string(rows) + " equations but the network has " +
                                     std::to_string(n) + " nodes");
  const Index dim = c.system.matrix ? c.system.matrix->cols() : c.system.generator->d;

  if (const json* subs = optional_field(j, "subnetworks", "")) {
    if (c.network.kind != NetworkKind::Tree) throw ConfigError("/subnetworks", "subnetworks need a tree network");
    for (std::size_t i = 0; i < as_array(*subs, "/subnetworks").size(); ++i)
      c.subnetworks.push_back(node_list((*subs)[i], "/subnetworks/" + std::to_string(i), n));
  }

  c.omega.assign(n, 1.0);
  if (const json* rel = optional_field(j, "relaxation", "")) {
    const std::string rp = "/relaxation";
    if (const json* d = optional_field(*rel, "default", rp)) c.omega.assign(n, as_real(*d, rp + "/default"));
    if (const json* om = optional_field(*rel, "omega", rp)) {
      if (om->is_array()) {
        if (om->size() != n) throw ConfigError(rp + "/omega", "expected " + std::to_string(n) + " entries");
        for (std::size_t v = 0; v < n; ++v) c.omega[v] = as_real((*om)[v], rp + "/omega/" + std::to_string(v));
      } else if (om->is_object()) {
        for (const auto& [key, val] : om->items()) {
          const std::string p = rp + "/omega/" + key;
          std::size_t v = 0;
          const auto res = std::from_chars(key.data(), key.data() + key.size(), v);
          if (res.ec != std::errc() || res.ptr != key.data() + key.size() || v >= n)
            throw ConfigError(p, "keys must be existing node ids");
          c.omega[v] = as_real(val, p);
        }
      } else {
        throw ConfigError(rp + "/omega", "expected an array or an object keyed by node id");
      }
    }
    if (const json* groups = optional_field(*rel, "groups", rp)) {
      for (std::size_t i = 0; i < as_array(*groups, rp + "/groups").size(); ++i) {
        const std::string p = rp + "/groups/" + std::to_string(i);
        const double w = as_real(field((*groups)[i], "omega", p), p + "/omega");
        for (NodeId v : node_list(field((*groups)[i], "nodes", p), p + "/nodes", n)) c.omega[v] = w;
      }
    }
    if (const json* s = optional_field(*rel, "scale", rp)) c.scale = as_real(*s, rp + "/scale");
  }
  for (std::size_t v = 0; v < n; ++v)
    if (c.omega[v] < 0.0) throw ConfigError("/relaxation/omega/" + std::to_string(v), "omega must be nonnegative");
  if (!(c.scale > 0.0 && c.scale <= 1.0)) throw ConfigError("/relaxation/scale", "scale must lie in (0, 1]");

  if (const json* s = optional_field(j, "solver", "")) {
    if (const json* m = optional_field(*s, "max_iterations", "/solver")) {
      c.max_iterations = as_index(*m, "/solver/max_iterations");
      if (c.max_iterations == 0) throw ConfigError("/solver/max_iterations", "must be positive");
    }
    if (const json* t = optional_field(*s, "step_tolerance", "/solver")) {
      c.step_tolerance = as_real(*t, "/solver/step_tolerance");
      if (!(c.step_tolerance > 0.0)) throw ConfigError("/solver/step_tolerance", "must be positive");
    }
    if (const json* x = optional_field(*s, "initial_estimate", "/solver")) {
      c.initial_estimate = as_vector(*x, "/solver/initial_estimate");
      if (c.initial_estimate->size() != dim)
        throw ConfigError("/solver/initial_estimate", "expected " + std::to_string(dim) + " entries");
    }
  }

  if (const json* o = optional_field(j, "output", "")) {
    if (const json* d = optional_field(*o, "dir", "/output")) c.output_dir = as_string(*d, "/output/dir");
    if (const json* f = optional_field(*o, "format", "/output")) {
      c.output_format = as_string(*f, "/output/format");
      if (c.output_format != "json" && c.output_format != "csv")
        throw ConfigError("/output/format", "expected \"json\" or \"csv\"");
    }
  }

  if (const json* sw = optional_field(j, "sweep", "")) {
    SweepSpec s;
    if (const json* ps = optional_field(*sw, "parameters", "/sweep"))
      for (std::size_t i = 0; i < as_array(*ps, "/sweep/parameters").size(); ++i)
        s.parameters.push_back(node_list((*ps)[i], "/sweep/parameters/" + std::to_string(i), n));
    if (const json* b = optional_field(*sw, "base", "/sweep")) s.base = as_real(*b, "/sweep/base");
    if (const json* g = optional_field(*sw, "grid", "/sweep"))
      for (std::size_t i = 0; i < as_array(*g, "/sweep/grid").size(); ++i) {
        const std::string p = "/sweep/grid/" + std::to_string(i);
        s.grid.push_back(as_string((*g)[i], p));
        try {
          GridAxis::parse(s.grid.back());
        } catch (const ArgumentError& e) {
          throw ConfigError(p, e.what());
        }
      }
    c.sweep = s;
  }
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Fully resolved form: every weight, ω and solver setting explicit.
inline nlohmann::json dump_config(const RunConfig& c) {
  using nlohmann::json;
  using namespace detail;
  json j;
  if (c.system.matrix) {
    j["system"] = {{"matrix", matrix_json(*c.system.matrix)}, {"rhs", vector_json(*c.system.rhs)}};
  } else {
    const auto& g = *c.system.generator;
    json gj = {{"kind", to_string(g.kind)}, {"k", g.k},         {"d", g.d},
               {"seed", g.seed},            {"epsilon", g.epsilon}, {"consistent", g.consistent},
               {"complex", g.complex_entries}, {"rng", g.rng_name}};
    if (g.rank) gj["rank"] = *g.rank;
    j["system"] = {{"generator", gj}};
  }
  json net = {{"nodes", c.network.nodes}};
  json edges = json::array();
  if (c.network.kind == NetworkKind::Tree) {
    net["type"] = "tree";
    net["root"] = c.network.root;
    for (const auto& e : c.network.tree_edges) edges.push_back({{"parent", e.parent}, {"child", e.child}, {"w", *e.w}});
  } else {
    net["type"] = "dag";
    for (const auto& e : c.network.dag_edges)
      edges.push_back({{"from", e.from}, {"to", e.to}, {"wd", *e.wd}, {"wp", *e.wp}});
  }
  net["edges"] = edges;
  j["network"] = net;
  if (c.network.kind == NetworkKind::Tree) j["subnetworks"] = c.subnetworks;
  j["relaxation"] = {{"omega", c.omega}, {"scale", c.scale}};
  j["solver"] = {{"max_iterations", c.max_iterations}, {"step_tolerance", c.step_tolerance}};
  if (c.initial_estimate) j["solver"]["initial_estimate"] = vector_json(*c.initial_estimate);
  j["output"] = {{"dir", c.output_dir}, {"format", c.output_format}};
  if (c.sweep)
    j["sweep"] = {{"parameters", c.sweep->parameters}, {"base", c.sweep->base}, {"grid", c.sweep->grid}};
  return j;
}

inline LinearSystem build_system(const RunConfig& c) {
  if (c.system.matrix) return LinearSystem(*c.system.matrix, *c.system.rhs);
  return generate_system(*c.system.generator).system;
}

inline TreeNetwork build_tree(const RunConfig& c) {
  if (c.network.kind != NetworkKind::Tree) throw ConfigError("/network/type", "this command needs a tree network");
  return TreeNetwork::from_edges(c.network.nodes, c.network.root, c.network.tree_edges);
}

inline DagNetwork build_dag(const RunConfig& c) {
  if (c.network.kind != NetworkKind::Dag) throw ConfigError("/network/type", "this command needs a DAG network");
  return DagNetwork::from_edges(c.network.nodes, c.network.dag_edges);
}

}  // namespace dkaczmarz
