#pragma once

// Relaxed Kaczmarz updates and the dispersion/pooling iteration engines for
// trees and DAGs.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dkaczmarz/core.hpp"
#include "dkaczmarz/numerics.hpp"
#include "dkaczmarz/topology.hpp"

namespace dkaczmarz {

/// One equation a_v^* x = b_v per node. Row v of `matrix()` is a_v^*.
class LinearSystem {
 public:
  LinearSystem() = default;

  LinearSystem(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() == 0 || a_.cols() == 0) throw DimensionError("linear system must be nonempty");
    if (a_.rows() != b_.size())
      throw DimensionError("system has " + std::to_string(a_.rows()) + " rows but " +
                           std::to_string(b_.size()) + " right-hand sides");
    if (!a_.allFinite() || !b_.allFinite())
      throw ValidationError("non-finite", "system contains NaN or infinite entries");
    norms2_.resize(static_cast<std::size_t>(a_.rows()));
    for (Index v = 0; v < a_.rows(); ++v) {
      norms2_[static_cast<std::size_t>(v)] = a_.row(v).squaredNorm();
      if (norms2_[static_cast<std::size_t>(v)] == 0.0)
        throw DegenerateEquation("equation " + std::to_string(v) + " has a zero row");
    }
  }

  std::size_t node_count() const noexcept { return static_cast<std::size_t>(a_.rows()); }
  Index dim() const noexcept { return a_.cols(); }
  const Matrix& matrix() const noexcept { return a_; }
  const Vector& rhs() const noexcept { return b_; }

  /// The vector a_v (so that the equation reads <x, a_v> = b_v).
  Vector row(NodeId v) const { return a_.row(static_cast<Index>(v)).adjoint(); }
  Scalar rhs(NodeId v) const { return b_(static_cast<Index>(v)); }
  double row_norm2(NodeId v) const { return norms2_.at(v); }

  double residual_norm(const Vector& x) const { return (a_ * x - b_).norm(); }

 private:
  Matrix a_;
  Vector b_;
  std::vector<double> norms2_;
};

/// Per-node ω_v together with the uniform scale s, so node v runs with s·ω_v.
struct RelaxationAssignment {
  std::vector<double> omega;
  double scale = 1.0;

  static RelaxationAssignment uniform(std::size_t nodes, double w) {
    return {std::vector<double>(nodes, w), 1.0};
  }

  double effective(NodeId v) const { return scale * omega.at(v); }

  RelaxationAssignment scaled(double s) const { return {omega, scale * s}; }

  void validate(std::size_t nodes) const {
    if (omega.size() != nodes)
      throw DimensionError("relaxation has " + std::to_string(omega.size()) +
                           " parameters for " + std::to_string(nodes) + " nodes");
    for (std::size_t v = 0; v < omega.size(); ++v)
      if (!std::isfinite(omega[v]) || omega[v] < 0.0)
        throw ValidationError("omega", "omega at node " + std::to_string(v) +
                                           " must be finite and nonnegative");
    if (!(scale > 0.0 && scale <= 1.0))
      throw ValidationError("scale", "scale must lie in (0, 1]");
  }
};

struct SolverConfig {
  std::size_t max_iterations = 10000;
  double step_tolerance = 1e-12;
  std::optional<Vector> initial_estimate;  // zero when absent

  void validate() const {
    if (max_iterations == 0) throw ValidationError("max_iterations", "must be positive");
    if (!(step_tolerance > 0.0) || !std::isfinite(step_tolerance))
      throw ValidationError("step_tolerance", "must be positive");
  }
};

struct SolveReport {
  std::vector<Vector> final_estimates;  // one per minimal node; a single entry for trees
  std::size_t iterations_used = 0;
  std::vector<double> step_norms;
  std::vector<double> residual_norms;
  bool converged = false;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<Vector> last, std::size_t iteration)
      : Error(what), last_(std::move(last)), iteration_(iteration) {}
  const std::vector<Vector>& last_finite() const noexcept { return last_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::vector<Vector> last_;
  std::size_t iteration_;
};

// ---------------------------------------------------------------------------
// Single-equation operators

namespace detail {

inline double checked_norm2(const Vector& x, const Vector& a) {
  if (x.size() != a.size()) throw DimensionError("vector and row have different dimensions");
  const double n2 = a.squaredNorm();
  if (n2 == 0.0) throw DegenerateEquation("zero row");
  return n2;
}

}  // namespace detail

/// x + ω (b − a^*x)/‖a‖² a.
inline Vector kaczmarz_update(const Vector& x, const Vector& a, Scalar b, double omega) {
  const double n2 = detail::checked_norm2(x, a);
  return x + (omega * (b - a.dot(x)) / n2) * a;
}

inline Vector project_null(const Vector& x, const Vector& a) {
  const double n2 = detail::checked_norm2(x, a);
  return x - (a.dot(x) / n2) * a;
}

inline Vector project_affine(const Vector& x, const Vector& a, Scalar b) {
  return kaczmarz_update(x, a, b, 1.0);
}

inline Vector relaxed_p(const Vector& x, const Vector& a, double omega) {
  return (1.0 - omega) * x + omega * project_null(x, a);
}

inline Vector relaxed_q(const Vector& x, const Vector& a, Scalar b, double omega) {
  return (1.0 - omega) * x + omega * project_affine(x, a, b);
}

/// Matrix of relaxed_p: I − ω a a^*/‖a‖².
inline Matrix relaxed_projection_matrix(const Vector& a, double omega) {
  const double n2 = a.squaredNorm();
  if (n2 == 0.0) throw DegenerateEquation("zero row");
  return Matrix::Identity(a.size(), a.size()) - (omega / n2) * a * a.adjoint();
}

// ---------------------------------------------------------------------------
// Engines

namespace detail {

inline void check_sizes(const LinearSystem& sys, std::size_t nodes, const RelaxationAssignment& relax) {
  if (sys.node_count() != nodes)
    throw DimensionError("network has " + std::to_string(nodes) + " nodes but the system has " +
                         std::to_string(sys.node_count()) + " equations");
  relax.validate(nodes);
}

inline Vector tree_iterate_unchecked(const LinearSystem& sys, const TreeNetwork& net,
                                     const RelaxationAssignment& relax, const Vector& x) {
  // Recursive dispersion; pooling folds children back in ascending id order.
  auto visit = [&](auto&& self, NodeId v, const Vector& incoming) -> Vector {
    const Vector here =
        kaczmarz_update(incoming, sys.row(v), sys.rhs(v), relax.effective(v));
    if (net.is_leaf(v)) return here;
    Vector pooled = Vector::Zero(x.size());
    for (NodeId c : net.children(v)) pooled += net.edge_weight(c) * self(self, c, here);
    return pooled;
  };
  return visit(visit, net.root(), x);
}

inline std::vector<Vector> dag_iterate_unchecked(const LinearSystem& sys, const DagNetwork& net,
                                                 const RelaxationAssignment& relax,
                                                 const std::vector<NodeId>& topo,
                                                 const std::vector<Vector>& x) {
  const std::size_t n = net.size();
  const auto mins = net.minimal_nodes();
  std::vector<Vector> est(n), pooled(n);
  std::vector<std::size_t> slot(n, 0);
  for (std::size_t i = 0; i < mins.size(); ++i) slot[mins[i]] = i;

  for (NodeId v : topo) {
    Vector z;
    if (net.is_minimal(v)) {
      z = x[slot[v]];
    } else {
      z = Vector::Zero(sys.dim());
      for (std::size_t e : net.in_edges(v)) z += net.edge(e).wd * est[net.edge(e).from];
    }
    est[v] = kaczmarz_update(z, sys.row(v), sys.rhs(v), relax.effective(v));
  }
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const NodeId u = *it;
    if (net.is_maximal(u)) {
      pooled[u] = est[u];
      continue;
    }
    pooled[u] = Vector::Zero(sys.dim());
    for (std::size_t e : net.out_edges(u)) pooled[u] += net.edge(e).wp * pooled[net.edge(e).to];
  }
  std::vector<Vector> out;
  out.reserve(mins.size());
  for (NodeId r : mins) out.push_back(std::move(pooled[r]));
  return out;
}

}  // namespace detail

/// One dispersion + pooling pass over a tree.
inline Vector tree_iterate(const LinearSystem& sys, const TreeNetwork& net,
                           const RelaxationAssignment& relax, const Vector& x) {
  detail::check_sizes(sys, net.size(), relax);
  require_valid(net);
  if (x.size() != sys.dim()) throw DimensionError("estimate has the wrong dimension");
  return detail::tree_iterate_unchecked(sys, net, relax, x);
}

/// One dispersion + pooling pass over a DAG; one estimate per minimal node
/// (ascending id order) in and out.
inline std::vector<Vector> dag_iterate(const LinearSystem& sys, const DagNetwork& net,
                                       const RelaxationAssignment& relax,
                                       const std::vector<Vector>& x) {
  detail::check_sizes(sys, net.size(), relax);
  require_valid(net);
  if (x.size() != net.minimal_nodes().size())
    throw DimensionError("expected one estimate per minimal node");
  for (const auto& xi : x)
    if (xi.size() != sys.dim()) throw DimensionError("estimate has the wrong dimension");
  return detail::dag_iterate_unchecked(sys, net, relax, topological_order(net), x);
}

namespace detail {

inline bool all_finite(const std::vector<Vector>& xs) {
  for (const auto& x : xs)
    if (!x.allFinite()) return false;
  return true;
}

inline double max_norm(const std::vector<Vector>& xs) {
  double m = 0.0;
  for (const auto& x : xs) m = std::max(m, x.norm());
  return m;
}

/// Shared driver: `step` maps the current estimate list to the next one.
template <class Step>
SolveReport run_solve(const LinearSystem& sys, const SolverConfig& config,
                      std::vector<Vector> x, Step&& step) {
  SolveReport rep;
  const double limit = 1e12 * (1.0 + max_norm(x));
  for (std::size_t n = 0; n < config.max_iterations; ++n) {
    std::vector<Vector> next = step(x);
    if (!all_finite(next) || max_norm(next) > limit)
      throw DivergenceError("iteration diverged at step " + std::to_string(n + 1), std::move(x), n);
    double step_norm = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) step_norm = std::max(step_norm, (next[i] - x[i]).norm());
    if (step_norm < config.step_tolerance) {
      rep.converged = true;
      rep.iterations_used = n;
      rep.final_estimates = std::move(next);
      return rep;
    }
    double residual = 0.0;
    for (const auto& xi : next) residual = std::max(residual, sys.residual_norm(xi));
    rep.step_norms.push_back(step_norm);
    rep.residual_norms.push_back(residual);
    x = std::move(next);
  }
  rep.iterations_used = config.max_iterations;
  rep.final_estimates = std::move(x);
  return rep;
}

inline Vector initial_or_zero(const SolverConfig& config, Index dim) {
  if (!config.initial_estimate) return Vector::Zero(dim);
  if (config.initial_estimate->size() != dim)
    throw DimensionError("initial estimate has the wrong dimension");
  return *config.initial_estimate;
}

}  // namespace detail

/// Iterates until ‖x⁽ⁿ⁺¹⁾ − x⁽ⁿ⁾‖ < tol or the budget runs out. When the
/// step test passes, the confirming iterate becomes the result but is not
/// counted, so a start that is already a fixed point reports 0 iterations.
inline SolveReport solve(const LinearSystem& sys, const TreeNetwork& net,
                         const RelaxationAssignment& relax, const SolverConfig& config) {
  config.validate();
  detail::check_sizes(sys, net.size(), relax);
  require_valid(net);
  std::vector<Vector> x{detail::initial_or_zero(config, sys.dim())};
  return detail::run_solve(sys, config, std::move(x), [&](const std::vector<Vector>& cur) {
    return std::vector<Vector>{detail::tree_iterate_unchecked(sys, net, relax, cur.front())};
  });
}

/// DAG version: every minimal node starts from the same initial estimate;
/// step and residual norms are maxima over the minimal-node blocks.
inline SolveReport solve(const LinearSystem& sys, const DagNetwork& net,
                         const RelaxationAssignment& relax, const SolverConfig& config) {
  config.validate();
  detail::check_sizes(sys, net.size(), relax);
  require_valid(net);
  const auto topo = topological_order(net);
  std::vector<Vector> x(net.minimal_nodes().size(), detail::initial_or_zero(config, sys.dim()));
  return detail::run_solve(sys, config, std::move(x), [&](const std::vector<Vector>& cur) {
    return detail::dag_iterate_unchecked(sys, net, relax, topo, cur);
  });
}

}  // namespace dkaczmarz
