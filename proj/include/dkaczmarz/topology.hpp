#pragma once

// Rooted trees with subnetwork partitions, and DAGs with dispersion/pooling
// weights, plus the path enumerations the closed-form analysis is built on.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dkaczmarz/core.hpp"

namespace dkaczmarz {

inline constexpr double kWeightSumTol = 1e-12;

namespace detail {

inline std::string id_str(NodeId v) { return std::to_string(v); }

inline bool positive_finite(double w) { return std::isfinite(w) && w > 0.0; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Trees

struct TreeEdge {
  NodeId parent = 0;
  NodeId child = 0;
  std::optional<double> w;  // uniform over the parent's children when absent
};

class TreeNetwork {
 public:
  TreeNetwork() = default;

  /// Builds the adjacency. Structural errors that cannot even be stored
  /// (unknown ids, self loops, a node with two parents) throw
  /// ValidationError; everything else is left for validate_tree.
  static TreeNetwork from_edges(std::size_t node_count, NodeId root,
                                const std::vector<TreeEdge>& edges) {
    if (node_count == 0) throw ValidationError("node-count", "a tree needs at least one node");
    if (root >= node_count)
      throw ValidationError("unknown-node", "root " + detail::id_str(root) + " out of range");
    TreeNetwork t;
    t.root_ = root;
    t.parent_.assign(node_count, std::nullopt);
    t.children_.assign(node_count, {});
    t.weight_.assign(node_count, 1.0);
    for (const auto& e : edges) {
      if (e.parent >= node_count || e.child >= node_count)
        throw ValidationError("unknown-node", "edge " + detail::id_str(e.parent) + "->" +
                                                  detail::id_str(e.child) + " references a missing node");
      if (e.parent == e.child)
        throw ValidationError("self-loop", "self loop at node " + detail::id_str(e.child));
      if (t.parent_[e.child])
        throw ValidationError("multiple-parents",
                              "node " + detail::id_str(e.child) + " has more than one parent");
      t.parent_[e.child] = e.parent;
      t.children_[e.parent].push_back(e.child);
    }
    for (auto& c : t.children_) std::sort(c.begin(), c.end());
    for (const auto& e : edges)
      t.weight_[e.child] =
          e.w ? *e.w : 1.0 / static_cast<double>(t.children_[e.parent].size());
    return t;
  }

  std::size_t size() const noexcept { return parent_.size(); }
  NodeId root() const noexcept { return root_; }
  std::optional<NodeId> parent(NodeId v) const { return parent_.at(v); }
  const std::vector<NodeId>& children(NodeId v) const { return children_.at(v); }
  bool is_leaf(NodeId v) const { return children_.at(v).empty(); }

  /// Weight of the edge (parent(v), v); 1 for the root.
  double edge_weight(NodeId v) const { return weight_.at(v); }

  /// Resolved edge list (defaults applied), sorted by (parent, child).
  std::vector<TreeEdge> edges() const {
    std::vector<TreeEdge> out;
    for (NodeId u = 0; u < size(); ++u)
      for (NodeId c : children_[u]) out.push_back({u, c, weight_[c]});
    return out;
  }

  /// Depth-first preorder from the root, children in ascending id order.
  std::vector<NodeId> preorder() const {
    std::vector<NodeId> out;
    std::vector<bool> seen(size(), false);
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      if (seen[v]) continue;
      seen[v] = true;
      out.push_back(v);
      for (auto it = children_[v].rbegin(); it != children_[v].rend(); ++it) stack.push_back(*it);
    }
    return out;
  }

  /// Leaves reachable from the root, in preorder.
  std::vector<NodeId> leaves() const {
    std::vector<NodeId> out;
    for (NodeId v : preorder())
      if (is_leaf(v)) out.push_back(v);
    return out;
  }

  /// Root, ..., v. Throws RelationError if v does not hang below the root.
  std::vector<NodeId> path_from_root(NodeId v) const {
    std::vector<NodeId> path{v};
    NodeId cur = v;
    while (cur != root_) {
      const auto p = parent_.at(cur);
      if (!p || path.size() > size())
        throw RelationError("node " + detail::id_str(v) + " is not connected to the root");
      cur = *p;
      path.push_back(cur);
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  /// u ⪯ v: u lies on the path from the root to v (u == v allowed).
  bool is_ancestor(NodeId u, NodeId v) const {
    NodeId cur = v;
    for (std::size_t steps = 0; steps <= size(); ++steps) {
      if (cur == u) return true;
      const auto p = parent_.at(cur);
      if (!p) return false;
      cur = *p;
    }
    return false;
  }

 private:
  NodeId root_ = 0;
  std::vector<std::optional<NodeId>> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<double> weight_;
};

inline ValidationReport validate_tree(const TreeNetwork& net) {
  ValidationReport r;
  const std::size_t n = net.size();
  if (n == 0) {
    r.add("node-count", "empty tree");
    return r;
  }
  if (net.parent(net.root()))
    r.add("root-parent", "root " + detail::id_str(net.root()) + " has a parent", {net.root()});

  for (NodeId v = 0; v < n; ++v) {
    if (v == net.root()) continue;
    // Parent pointers either reach the root, stop at an orphan, or loop.
    NodeId cur = v;
    std::size_t steps = 0;
    bool reached = false;
    while (steps <= n) {
      if (cur == net.root()) {
        reached = true;
        break;
      }
      const auto p = net.parent(cur);
      if (!p) break;
      cur = *p;
      ++steps;
    }
    if (!reached) {
      if (steps > n)
        r.add("cycle", "node " + detail::id_str(v) + " lies on or below a cycle", {v});
      else
        r.add("disconnected", "node " + detail::id_str(v) + " is not connected to the root", {v});
    }
  }

  for (NodeId u = 0; u < n; ++u) {
    const auto& ch = net.children(u);
    if (ch.empty()) continue;
    double sum = 0.0;
    for (NodeId c : ch) {
      const double w = net.edge_weight(c);
      if (!detail::positive_finite(w))
        r.add("weight-positive",
              "edge " + detail::id_str(u) + "->" + detail::id_str(c) + " has non-positive weight",
              {u, c});
      sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightSumTol)
      r.add("weight-sum",
            "children of node " + detail::id_str(u) + " have weights summing to " +
                std::to_string(sum) + ", not 1",
            {u});
  }
  return r;
}

inline void require_valid(const TreeNetwork& net) {
  auto r = validate_tree(net);
  if (!r.ok()) throw ValidationError(std::move(r));
}

/// w(u, v): product of edge weights along the path u -> v; 1 when u == v.
inline double path_weight(const TreeNetwork& net, NodeId u, NodeId v) {
  if (u >= net.size() || v >= net.size()) throw ArgumentError("path_weight: node out of range");
  double w = 1.0;
  NodeId cur = v;
  for (std::size_t steps = 0; cur != u; ++steps) {
    const auto p = net.parent(cur);
    if (!p || steps > net.size())
      throw RelationError("node " + detail::id_str(u) + " is not an ancestor of " +
                          detail::id_str(v));
    w *= net.edge_weight(cur);
    cur = *p;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Subnetworks

namespace detail {

inline NodeId lowest_common_ancestor(const TreeNetwork& net, NodeId u, NodeId v) {
  const auto pu = net.path_from_root(u);
  const auto pv = net.path_from_root(v);
  NodeId lca = pu.front();
  for (std::size_t i = 0; i < std::min(pu.size(), pv.size()) && pu[i] == pv[i]; ++i) lca = pu[i];
  return lca;
}

inline std::vector<NodeId> top_nodes(const TreeNetwork& net, const std::set<NodeId>& g) {
  std::vector<NodeId> out;
  for (NodeId u : g) {
    const auto p = net.parent(u);
    if (!p || !g.count(*p)) out.push_back(u);
  }
  return out;
}

}  // namespace detail

/// Checks each group against the subnetwork conditions, plus disjointness and
/// leaf coverage. Sibling closure is not demanded below the root itself:
/// there it would contradict root avoidance for any group holding a child of
/// a root with several children.
inline ValidationReport validate_subnetworks(const TreeNetwork& net,
                                             const std::vector<std::vector<NodeId>>& groups) {
  ValidationReport r;
  auto tree_report = validate_tree(net);
  if (!tree_report.ok()) {
    for (auto& v : tree_report.violations) r.violations.push_back(std::move(v));
    return r;
  }
  const std::size_t n = net.size();
  std::vector<int> owner(n, -1);

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const std::string tag = "group " + std::to_string(gi);
    if (groups[gi].empty()) {
      r.add("empty-group", tag + " is empty");
      continue;
    }
    std::set<NodeId> g;
    bool in_range = true;
    for (NodeId u : groups[gi]) {
      if (u >= n) {
        r.add("unknown-node", tag + " references node " + detail::id_str(u), {u});
        in_range = false;
        continue;
      }
      if (!g.insert(u).second) continue;
      if (owner[u] >= 0 && owner[u] != static_cast<int>(gi))
        r.add("disjoint",
              "node " + detail::id_str(u) + " belongs to groups " + std::to_string(owner[u]) +
                  " and " + std::to_string(gi),
              {u});
      else
        owner[u] = static_cast<int>(gi);
    }
    if (!in_range) continue;

    if (g.count(net.root()))
      r.add("root-avoidance", tag + " contains the root", {net.root()});

    for (NodeId u : g) {
      const auto p = net.parent(u);
      if (p && *p != net.root())
        for (NodeId sib : net.children(*p))
          if (!g.count(sib))
            r.add("sibling-closure",
                  tag + " contains " + detail::id_str(u) + " but not its sibling " +
                      detail::id_str(sib),
                  {u, sib});
      for (NodeId c : net.children(u))
        if (!g.count(c))
          r.add("downward-closure",
                tag + " contains " + detail::id_str(u) + " but not its child " + detail::id_str(c),
                {u, c});
    }

    if (!g.count(net.root())) {
      const std::vector<NodeId> members(g.begin(), g.end());
      for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b)
          if (detail::lowest_common_ancestor(net, members[a], members[b]) == net.root())
            r.add("root-avoidance",
                  tag + ": the path between " + detail::id_str(members[a]) + " and " +
                      detail::id_str(members[b]) + " passes through the root",
                  {members[a], members[b]});
    }

    std::set<NodeId> gateways;
    for (NodeId t : detail::top_nodes(net, g))
      if (const auto p = net.parent(t)) gateways.insert(*p);
    if (gateways.size() > 1)
      r.add("gateway", tag + " has top nodes with different parents",
            std::vector<NodeId>(gateways.begin(), gateways.end()));
  }

  for (NodeId l : net.leaves())
    if (owner[l] < 0)
      r.add("leaf-coverage", "leaf " + detail::id_str(l) + " is not in any group", {l});
  return r;
}

/// A validated partition with the derived quantities the analysis needs.
/// Leaves outside every group are allowed; they behave as plain nodes.
struct SubnetworkPartition {
  std::vector<std::vector<NodeId>> groups;        // each sorted ascending
  std::vector<NodeId> gateway;                    // g_i
  std::vector<std::vector<NodeId>> group_leaves;  // ℓ_{i,j}, preorder
  std::vector<std::vector<NodeId>> group_roots;   // r_{i,j}, one per leaf
  std::vector<bool> leaf_only;

  std::size_t size() const noexcept { return groups.size(); }

  static SubnetworkPartition build(const TreeNetwork& net,
                                   std::vector<std::vector<NodeId>> groups) {
    ValidationReport report = validate_subnetworks(net, groups);
    std::erase_if(report.violations, [](const Violation& v) { return v.rule == "leaf-coverage"; });
    if (!report.ok()) throw ValidationError(std::move(report));

    SubnetworkPartition p;
    const auto leaves = net.leaves();
    for (auto& grp : groups) {
      std::sort(grp.begin(), grp.end());
      grp.erase(std::unique(grp.begin(), grp.end()), grp.end());
      const std::set<NodeId> g(grp.begin(), grp.end());
      const auto tops = detail::top_nodes(net, g);
      p.gateway.push_back(*net.parent(tops.front()));
      std::vector<NodeId> gl, gr;
      for (NodeId l : leaves) {
        if (!g.count(l)) continue;
        gl.push_back(l);
        for (NodeId t : tops)
          if (net.is_ancestor(t, l)) gr.push_back(t);
      }
      bool only = true;
      for (NodeId u : grp) only = only && net.is_leaf(u);
      p.group_leaves.push_back(std::move(gl));
      p.group_roots.push_back(std::move(gr));
      p.leaf_only.push_back(only);
      p.groups.push_back(std::move(grp));
    }
    return p;
  }

  /// Index of the group containing v, if any.
  std::optional<std::size_t> group_of(NodeId v) const {
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (std::binary_search(groups[i].begin(), groups[i].end(), v)) return i;
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// DAGs

struct DagEdge {
  NodeId from = 0;
  NodeId to = 0;
  std::optional<double> wd;  // dispersion weight w_d(from, to)
  std::optional<double> wp;  // pooling weight w_p(from, to)
};

struct ResolvedDagEdge {
  NodeId from = 0;
  NodeId to = 0;
  double wd = 0.0;
  double wp = 0.0;
};

class DagNetwork {
 public:
  DagNetwork() = default;

  /// Defaults: w_d uniform over the in-edges of `to`, w_p uniform over the
  /// out-edges of `from`. Unknown ids, self loops and repeated edges throw.
  static DagNetwork from_edges(std::size_t node_count, const std::vector<DagEdge>& edges) {
    if (node_count == 0) throw ValidationError("node-count", "a DAG needs at least one node");
    DagNetwork g;
    g.in_.assign(node_count, {});
    g.out_.assign(node_count, {});
    std::vector<DagEdge> sorted = edges;
    std::sort(sorted.begin(), sorted.end(), [](const DagEdge& a, const DagEdge& b) {
      return std::pair(a.from, a.to) < std::pair(b.from, b.to);
    });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const auto& e = sorted[i];
      if (e.from >= node_count || e.to >= node_count)
        throw ValidationError("unknown-node", "edge " + detail::id_str(e.from) + "->" +
                                                  detail::id_str(e.to) + " references a missing node");
      if (e.from == e.to)
        throw ValidationError("self-loop", "self loop at node " + detail::id_str(e.from));
      if (i > 0 && sorted[i - 1].from == e.from && sorted[i - 1].to == e.to)
        throw ValidationError("duplicate-edge", "edge " + detail::id_str(e.from) + "->" +
                                                    detail::id_str(e.to) + " given twice");
      g.in_[e.to].push_back(i);
      g.out_[e.from].push_back(i);
    }
    for (const auto& e : sorted)
      g.edges_.push_back({e.from, e.to,
                          e.wd ? *e.wd : 1.0 / static_cast<double>(g.in_[e.to].size()),
                          e.wp ? *e.wp : 1.0 / static_cast<double>(g.out_[e.from].size())});
    // in_ lists are ordered by `from`, out_ lists by `to`, since edges are sorted.
    for (auto& l : g.in_)
      std::sort(l.begin(), l.end(),
                [&](std::size_t a, std::size_t b) { return g.edges_[a].from < g.edges_[b].from; });
    return g;
  }

  std::size_t size() const noexcept { return in_.size(); }
  const std::vector<ResolvedDagEdge>& edges() const noexcept { return edges_; }
  const ResolvedDagEdge& edge(std::size_t i) const { return edges_.at(i); }

  /// Edge indices into v, by ascending source id.
  const std::vector<std::size_t>& in_edges(NodeId v) const { return in_.at(v); }
  /// Edge indices out of u, by ascending target id.
  const std::vector<std::size_t>& out_edges(NodeId u) const { return out_.at(u); }

  bool is_minimal(NodeId v) const { return in_.at(v).empty(); }
  bool is_maximal(NodeId v) const { return out_.at(v).empty(); }

  std::vector<NodeId> minimal_nodes() const {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < size(); ++v)
      if (is_minimal(v)) out.push_back(v);
    return out;
  }

  std::vector<NodeId> maximal_nodes() const {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < size(); ++v)
      if (is_maximal(v)) out.push_back(v);
    return out;
  }

 private:
  std::vector<ResolvedDagEdge> edges_;
  std::vector<std::vector<std::size_t>> in_, out_;
};

/// Kahn's algorithm; ties go to the smallest id.
inline std::vector<NodeId> topological_order(const DagNetwork& net) {
  const std::size_t n = net.size();
  std::vector<std::size_t> indeg(n);
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (NodeId v = 0; v < n; ++v) {
    indeg[v] = net.in_edges(v).size();
    if (indeg[v] == 0) ready.push(v);
  }
  std::vector<NodeId> order;
  order.reserve(n);
  while (!ready.empty()) {
    const NodeId u = ready.top();
    ready.pop();
    order.push_back(u);
    for (std::size_t e : net.out_edges(u))
      if (--indeg[net.edge(e).to] == 0) ready.push(net.edge(e).to);
  }
  if (order.size() != n) throw OrderError("the graph contains a directed cycle");
  return order;
}

namespace detail {

/// reach[u][v]: a directed path of length >= 1 leads from u to v.
inline std::vector<std::vector<bool>> reachability(const DagNetwork& net,
                                                   const std::vector<NodeId>& topo) {
  const std::size_t n = net.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const NodeId u = *it;
    for (std::size_t e : net.out_edges(u)) {
      const NodeId v = net.edge(e).to;
      reach[u][v] = true;
      for (NodeId w = 0; w < n; ++w)
        if (reach[v][w]) reach[u][w] = true;
    }
  }
  return reach;
}

}  // namespace detail

inline ValidationReport validate_dag(const DagNetwork& net) {
  ValidationReport r;
  const std::size_t n = net.size();
  if (n == 0) {
    r.add("node-count", "empty graph");
    return r;
  }
  std::vector<NodeId> topo;
  try {
    topo = topological_order(net);
  } catch (const OrderError& e) {
    r.add("cycle", e.what());
  }

  // Weak connectivity through an undirected flood fill.
  std::vector<bool> seen(n, false);
  std::vector<NodeId> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    auto visit = [&](NodeId v) {
      if (!seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
    };
    for (std::size_t e : net.out_edges(u)) visit(net.edge(e).to);
    for (std::size_t e : net.in_edges(u)) visit(net.edge(e).from);
  }
  for (NodeId v = 0; v < n; ++v)
    if (!seen[v]) r.add("disconnected", "node " + detail::id_str(v) + " is not weakly connected to node 0", {v});

  if (!topo.empty()) {
    const auto reach = detail::reachability(net, topo);
    for (const auto& e : net.edges())
      for (std::size_t f : net.out_edges(e.from)) {
        const NodeId w = net.edge(f).to;
        if (w != e.to && reach[w][e.to]) {
          r.add("cover", "edge " + detail::id_str(e.from) + "->" + detail::id_str(e.to) +
                             " is implied by the path through " + detail::id_str(w),
                {e.from, e.to});
          break;
        }
      }
  }

  for (const auto& e : net.edges())
    if (!detail::positive_finite(e.wd) || !detail::positive_finite(e.wp))
      r.add("weight-positive",
            "edge " + detail::id_str(e.from) + "->" + detail::id_str(e.to) + " has a non-positive weight",
            {e.from, e.to});
  for (NodeId v = 0; v < n; ++v) {
    if (!net.is_maximal(v)) {
      double s = 0.0;
      for (std::size_t e : net.out_edges(v)) s += net.edge(e).wp;
      if (std::abs(s - 1.0) > kWeightSumTol)
        r.add("pooling-sum", "pooling weights out of node " + detail::id_str(v) + " sum to " +
                                 std::to_string(s),
              {v});
    }
    if (!net.is_minimal(v)) {
      double s = 0.0;
      for (std::size_t e : net.in_edges(v)) s += net.edge(e).wd;
      if (std::abs(s - 1.0) > kWeightSumTol)
        r.add("dispersion-sum", "dispersion weights into node " + detail::id_str(v) + " sum to " +
                                    std::to_string(s),
              {v});
    }
  }
  return r;
}

inline void require_valid(const DagNetwork& net) {
  auto r = validate_dag(net);
  if (!r.ok()) throw ValidationError(std::move(r));
}

/// Cover pairs of a strict partial order given by any generating relation.
inline std::vector<std::pair<NodeId, NodeId>> hasse_reduce(
    const std::vector<std::pair<NodeId, NodeId>>& relation) {
  std::map<NodeId, std::size_t> dense;
  for (const auto& [u, v] : relation) {
    if (u == v) throw OrderError("relation is not irreflexive at " + detail::id_str(u));
    dense.emplace(u, 0);
    dense.emplace(v, 0);
  }
  std::vector<NodeId> ids;
  for (auto& [id, k] : dense) {
    k = ids.size();
    ids.push_back(id);
  }
  const std::size_t n = ids.size();
  std::vector<std::vector<bool>> lt(n, std::vector<bool>(n, false));
  for (const auto& [u, v] : relation) lt[dense[u]][dense[v]] = true;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (lt[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (lt[k][j]) lt[i][j] = true;
  for (std::size_t i = 0; i < n; ++i)
    if (lt[i][i]) throw OrderError("relation is cyclic through " + detail::id_str(ids[i]));

  std::vector<std::pair<NodeId, NodeId>> covers;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!lt[i][j]) continue;
      bool cover = true;
      for (std::size_t k = 0; k < n && cover; ++k)
        if (lt[i][k] && lt[k][j]) cover = false;
      if (cover) covers.emplace_back(ids[i], ids[j]);
    }
  std::sort(covers.begin(), covers.end());
  return covers;
}

struct UpDownPath {
  std::vector<NodeId> nodes;  // v_1 < ... < peak > ... > v_k
  std::size_t peak = 0;       // index of the maximal node in `nodes`
  double weight = 1.0;
};

/// All up-down paths from minimal node m1 to minimal node m2, in
/// lexicographic order of their node sequences.
inline std::vector<UpDownPath> enumerate_updown_paths(const DagNetwork& net, NodeId m1, NodeId m2) {
  if (m1 >= net.size() || m2 >= net.size())
    throw ArgumentError("enumerate_updown_paths: node out of range");
  if (!net.is_minimal(m1) || !net.is_minimal(m2))
    throw ArgumentError("enumerate_updown_paths: both endpoints must be minimal nodes");

  std::vector<UpDownPath> out;
  std::vector<NodeId> nodes{m1};

  std::function<void(NodeId, double)> descend = [&](NodeId v, double w) {
    if (v == m2) {
      out.push_back({nodes, 0, w});
      return;
    }
    for (std::size_t e : net.in_edges(v)) {
      const auto& ed = net.edge(e);
      nodes.push_back(ed.from);
      descend(ed.from, w * ed.wp);
      nodes.pop_back();
    }
  };
  std::function<void(NodeId, double)> ascend = [&](NodeId v, double w) {
    if (net.is_maximal(v)) {
      const std::size_t before = out.size();
      descend(v, w);
      for (std::size_t i = before; i < out.size(); ++i) out[i].peak = nodes.size() - 1;
      return;
    }
    for (std::size_t e : net.out_edges(v)) {
      const auto& ed = net.edge(e);
      nodes.push_back(ed.to);
      ascend(ed.to, w * ed.wd);
      nodes.pop_back();
    }
  };
  ascend(m1, 1.0);
  std::sort(out.begin(), out.end(),
            [](const UpDownPath& a, const UpDownPath& b) { return a.nodes < b.nodes; });
  return out;
}

/// Diameter of the graph on minimal nodes joined when some up-down path
/// connects them; 1 for a single minimal node.
inline std::size_t minimal_distance_diameter(const DagNetwork& net) {
  const auto mins = net.minimal_nodes();
  const std::size_t s = mins.size();
  if (s <= 1) return 1;
  const auto reach = detail::reachability(net, topological_order(net));
  auto reaches_max = [&](NodeId m, NodeId top) { return m == top || reach[m][top]; };
  const auto maxs = net.maximal_nodes();

  std::vector<std::vector<std::size_t>> adj(s);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = i + 1; j < s; ++j)
      for (NodeId top : maxs)
        if (reaches_max(mins[i], top) && reaches_max(mins[j], top)) {
          adj[i].push_back(j);
          adj[j].push_back(i);
          break;
        }

  std::size_t diameter = 1;
  for (std::size_t src = 0; src < s; ++src) {
    std::vector<long> dist(s, -1);
    std::queue<std::size_t> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v : adj[u])
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
    }
    for (std::size_t v = 0; v < s; ++v) {
      if (dist[v] < 0)
        throw ConnectivityError("minimal nodes " + detail::id_str(mins[src]) + " and " +
                                detail::id_str(mins[v]) + " never communicate");
      diameter = std::max(diameter, static_cast<std::size_t>(dist[v]));
    }
  }
  return diameter;
}

struct DispersionPath {
  std::vector<NodeId> nodes;  // minimal node first, maximal node last
  double dispersion_weight = 1.0;  // product of w_d along the chain
};

struct DispersionPaths {
  std::vector<NodeId> minimal;       // r_1..r_s
  std::vector<DispersionPath> paths;  // P_1..P_p
  Eigen::MatrixXd weights;           // s x p pooled weights w_{i,j}
  std::vector<std::size_t> start;    // index into `minimal` of each path's first node
};

/// Maximal ascending chains (by minimal node, then lexicographically) and
/// pooled weights w_{i,j} = (w_d mass of P_j) x (w_p mass of all descents
/// from the top of P_j back to r_i).
inline DispersionPaths enumerate_dispersion_paths(const DagNetwork& net) {
  DispersionPaths out;
  out.minimal = net.minimal_nodes();
  const auto topo = topological_order(net);
  const std::size_t n = net.size();

  std::vector<NodeId> chain;
  std::function<void(NodeId, double, std::size_t)> ascend = [&](NodeId v, double w, std::size_t i) {
    chain.push_back(v);
    if (net.is_maximal(v)) {
      out.paths.push_back({chain, w});
      out.start.push_back(i);
    }
    for (std::size_t e : net.out_edges(v)) ascend(net.edge(e).to, w * net.edge(e).wd, i);
    chain.pop_back();
  };
  for (std::size_t i = 0; i < out.minimal.size(); ++i) ascend(out.minimal[i], 1.0, i);

  const std::size_t s = out.minimal.size(), p = out.paths.size();
  out.weights = Eigen::MatrixXd::Zero(static_cast<Index>(s), static_cast<Index>(p));
  for (std::size_t i = 0; i < s; ++i) {
    // mass[v]: total w_p product over ascending chains from r_i up to v.
    std::vector<double> mass(n, 0.0);
    mass[out.minimal[i]] = 1.0;
    for (NodeId u : topo)
      if (mass[u] != 0.0)
        for (std::size_t e : net.out_edges(u)) mass[net.edge(e).to] += mass[u] * net.edge(e).wp;
    for (std::size_t j = 0; j < p; ++j)
      out.weights(static_cast<Index>(i), static_cast<Index>(j)) =
          out.paths[j].dispersion_weight * mass[out.paths[j].nodes.back()];
  }
  return out;
}

}  // namespace dkaczmarz
