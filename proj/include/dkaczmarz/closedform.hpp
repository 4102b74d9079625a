#pragma once

// Closed-form one-iteration maps and the analysis built on them: SOR
// factors, B^ω and P^ω for trees, subnetwork norms and admissibility,
// weighted least-squares limits, and the DAG block machinery.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dkaczmarz/core.hpp"
#include "dkaczmarz/numerics.hpp"
#include "dkaczmarz/solver.hpp"
#include "dkaczmarz/topology.hpp"

namespace dkaczmarz {

/// x ↦ B x + c. For DAGs the vectors are minimal-node blocks stacked in
/// ascending id order, each of size block_size.
struct AffineIteration {
  Matrix B;
  Vector c;
  Index block_size = 0;

  Vector apply(const Vector& x) const { return B * x + c; }
};

// ---------------------------------------------------------------------------
// SOR factors of one chain of equations

struct PathSorFactors {
  std::vector<NodeId> nodes;
  Matrix D;       // diag ‖a_u‖²
  Matrix Omega;   // diag ω_u (effective)
  Matrix L;       // L(j,k) = a_{u_j}^* a_{u_k} for j > k
  Matrix A_path;  // row j is a_{u_j}^*
  Vector b_path;

  /// (D + ΩL)^{-1} Ω, the map from residuals to chain coefficients.
  Matrix gain() const {
    return (D + Omega * L).triangularView<Eigen::Lower>().solve(Omega);
  }

  /// Result of running the relaxed updates down the chain from x.
  Vector apply(const Vector& x) const { return x + A_path.adjoint() * (gain() * (b_path - A_path * x)); }

  AffineIteration affine() const {
    const Matrix k = gain();
    const Index d = A_path.cols();
    return {Matrix::Identity(d, d) - A_path.adjoint() * k * A_path, A_path.adjoint() * (k * b_path), d};
  }
};

inline PathSorFactors path_sor_factors(const LinearSystem& sys, const std::vector<NodeId>& path,
                                       const RelaxationAssignment& relax) {
  if (path.empty()) throw ArgumentError("path_sor_factors: empty path");
  const Index m = static_cast<Index>(path.size());
  PathSorFactors f;
  f.nodes = path;
  f.A_path.resize(m, sys.dim());
  f.b_path.resize(m);
  f.D = Matrix::Zero(m, m);
  f.Omega = Matrix::Zero(m, m);
  for (Index j = 0; j < m; ++j) {
    const NodeId u = path[static_cast<std::size_t>(j)];
    if (u >= sys.node_count()) throw ArgumentError("path_sor_factors: node out of range");
    f.A_path.row(j) = sys.matrix().row(static_cast<Index>(u));
    f.b_path(j) = sys.rhs(u);
    f.D(j, j) = sys.row_norm2(u);
    f.Omega(j, j) = relax.effective(u);
  }
  f.L = (f.A_path * f.A_path.adjoint()).triangularView<Eigen::StrictlyLower>();
  return f;
}

// ---------------------------------------------------------------------------
// Trees

/// The stacked per-leaf quantities 𝒜, 𝖇, D, Ω, L, W (block diagonal over
/// root-to-leaf paths in preorder leaf order).
struct TreeSorAggregate {
  std::vector<PathSorFactors> paths;
  std::vector<double> leaf_weights;  // w(r, ℓ)
  Matrix A, D, Omega, L, W;
  Vector b;
};

inline TreeSorAggregate tree_sor_aggregate(const LinearSystem& sys, const TreeNetwork& net,
                                           const RelaxationAssignment& relax) {
  detail::check_sizes(sys, net.size(), relax);
  require_valid(net);
  TreeSorAggregate agg;
  Index rows = 0;
  for (NodeId l : net.leaves()) {
    agg.paths.push_back(path_sor_factors(sys, net.path_from_root(l), relax));
    agg.leaf_weights.push_back(path_weight(net, net.root(), l));
    rows += agg.paths.back().A_path.rows();
  }
  const Index d = sys.dim();
  agg.A = Matrix::Zero(rows, d);
  agg.b = Vector::Zero(rows);
  agg.D = agg.Omega = agg.L = agg.W = Matrix::Zero(rows, rows);
  Index at = 0;
  for (std::size_t k = 0; k < agg.paths.size(); ++k) {
    const auto& f = agg.paths[k];
    const Index m = f.A_path.rows();
    agg.A.middleRows(at, m) = f.A_path;
    agg.b.segment(at, m) = f.b_path;
    agg.D.block(at, at, m, m) = f.D;
    agg.Omega.block(at, at, m, m) = f.Omega;
    agg.L.block(at, at, m, m) = f.L;
    agg.W.block(at, at, m, m) = agg.leaf_weights[k] * Matrix::Identity(m, m);
    at += m;
  }
  return agg;
}

/// B = I − 𝒜^*(D+ΩL)^{-1}WΩ𝒜, c = 𝒜^*(D+ΩL)^{-1}WΩ𝖇.
inline AffineIteration tree_affine(const LinearSystem& sys, const TreeNetwork& net,
                                   const RelaxationAssignment& relax) {
  const auto agg = tree_sor_aggregate(sys, net, relax);
  const Matrix k =
      (agg.D + agg.Omega * agg.L).triangularView<Eigen::Lower>().solve(agg.W * agg.Omega);
  const Index d = sys.dim();
  return {Matrix::Identity(d, d) - agg.A.adjoint() * k * agg.A, agg.A.adjoint() * (k * agg.b), d};
}

namespace detail {

/// P_{last} ... P_{first} for the relaxed projections along `chain`.
inline Matrix chain_product(const LinearSystem& sys, const RelaxationAssignment& relax,
                            std::span<const NodeId> chain) {
  Matrix m = Matrix::Identity(sys.dim(), sys.dim());
  for (NodeId u : chain) m = relaxed_projection_matrix(sys.row(u), relax.effective(u)) * m;
  return m;
}

}  // namespace detail

/// A group of chains r_{i,j} → ℓ_{i,j} hanging below a common gateway,
/// weighted by w(g_i, ℓ_{i,j}) renormalized to sum to 1.
struct GroupChains {
  std::vector<std::vector<NodeId>> chains;
  std::vector<double> weights;
  double mass = 1.0;  // sum of the raw weights before renormalization
};

inline GroupChains group_chains(const TreeNetwork& net, const SubnetworkPartition& part,
                                std::size_t i) {
  if (i >= part.size()) throw ArgumentError("group index out of range");
  GroupChains g;
  g.mass = 0.0;
  for (std::size_t j = 0; j < part.group_leaves[i].size(); ++j) {
    const NodeId l = part.group_leaves[i][j];
    const NodeId top = part.group_roots[i][j];
    auto full = net.path_from_root(l);
    const auto from = std::find(full.begin(), full.end(), top);
    g.chains.emplace_back(from, full.end());
    g.weights.push_back(path_weight(net, part.gateway[i], l));
    g.mass += g.weights.back();
  }
  for (double& w : g.weights) w /= g.mass;
  return g;
}

/// P^ω_{G} = Σ_j w_j P_{ℓ_j} ... P_{r_j}.
inline Matrix group_operator(const LinearSystem& sys, const GroupChains& g,
                             const RelaxationAssignment& relax) {
  Matrix m = Matrix::Zero(sys.dim(), sys.dim());
  for (std::size_t j = 0; j < g.chains.size(); ++j)
    m += g.weights[j] * detail::chain_product(sys, relax, g.chains[j]);
  return m;
}

/// Σ_i w(r,g_i) P_{G_i} P_{g_i} ... P_r, plus the plain root-to-leaf product
/// for any leaf left outside the partition.
inline Matrix build_p_omega(const LinearSystem& sys, const TreeNetwork& net,
                            const SubnetworkPartition& part, const RelaxationAssignment& relax) {
  detail::check_sizes(sys, net.size(), relax);
  require_valid(net);
  Matrix p = Matrix::Zero(sys.dim(), sys.dim());
  std::vector<bool> covered(net.size(), false);
  for (std::size_t i = 0; i < part.size(); ++i) {
    const auto g = group_chains(net, part, i);
    const auto head = net.path_from_root(part.gateway[i]);
    p += path_weight(net, net.root(), part.gateway[i]) * g.mass * group_operator(sys, g, relax) *
         detail::chain_product(sys, relax, head);
    for (NodeId u : part.groups[i]) covered[u] = true;
  }
  for (NodeId l : net.leaves())
    if (!covered[l])
      p += path_weight(net, net.root(), l) *
           detail::chain_product(sys, relax, net.path_from_root(l));
  return p;
}

namespace detail {

inline std::vector<Vector> group_span(const LinearSystem& sys, const GroupChains& g) {
  std::vector<Vector> rows;
  for (const auto& ch : g.chains)
    for (NodeId u : ch) rows.push_back(sys.row(u));
  return orthonormal_basis(rows);
}

}  // namespace detail

/// ‖P^ω_G restricted to span{a_u : u in G}‖.
inline double subnetwork_norm(const LinearSystem& sys, const GroupChains& g,
                              const RelaxationAssignment& relax) {
  return operator_norm_on_span(group_operator(sys, g, relax), detail::group_span(sys, g));
}

inline double subnetwork_norm(const LinearSystem& sys, const TreeNetwork& net,
                              const SubnetworkPartition& part, std::size_t i,
                              const RelaxationAssignment& relax) {
  return subnetwork_norm(sys, group_chains(net, part, i), relax);
}

/// A set of sibling leaves and their weights w(g, ℓ).
struct LeafGroup {
  std::vector<NodeId> leaves;
  std::vector<double> weights;

  GroupChains chains() const {
    GroupChains g;
    for (NodeId l : leaves) g.chains.push_back({l});
    g.weights = weights;
    return g;
  }
};

inline LeafGroup leaf_group(const TreeNetwork& net, const SubnetworkPartition& part, std::size_t i) {
  if (i >= part.size()) throw ArgumentError("group index out of range");
  if (!part.leaf_only[i])
    throw ApplicabilityError("group " + std::to_string(i) + " contains non-leaf nodes");
  const auto g = group_chains(net, part, i);
  LeafGroup lg;
  for (const auto& ch : g.chains) lg.leaves.push_back(ch.front());
  lg.weights = g.weights;
  return lg;
}

namespace detail {

inline void check_leaf_group(const LinearSystem& sys, const LeafGroup& g) {
  if (g.leaves.empty()) throw ArgumentError("leaf group is empty");
  if (g.leaves.size() != g.weights.size())
    throw DimensionError("leaf group needs one weight per leaf");
  for (std::size_t j = 0; j < g.leaves.size(); ++j) {
    if (g.leaves[j] >= sys.node_count()) throw ArgumentError("leaf out of range");
    if (!(g.weights[j] > 0.0)) throw ArgumentError("leaf weights must be positive");
  }
}

inline Matrix leaf_gram(const LinearSystem& sys, const LeafGroup& g) {
  std::vector<Vector> rows;
  for (NodeId l : g.leaves) rows.push_back(sys.row(l));
  return gram(rows);
}

}  // namespace detail

/// max |1 − λ| over the nonzero eigenvalues λ of 𝒟𝒢, where
/// 𝒟 = diag(w_ℓ ω_ℓ/‖a_ℓ‖²) and 𝒢 is the Gram matrix of the leaf rows.
/// Evaluated through the Hermitian similar matrix 𝒟^{1/2}𝒢𝒟^{1/2}. If some
/// ω_ℓ vanish, directions of the span left untouched contribute |1 − 0| = 1.
inline double leaf_norm_formula(const LinearSystem& sys, const LeafGroup& g,
                                const RelaxationAssignment& relax) {
  detail::check_leaf_group(sys, g);
  const Matrix gr = detail::leaf_gram(sys, g);
  const Index t = gr.rows();
  Eigen::VectorXd sq(t);
  for (Index j = 0; j < t; ++j) {
    const auto u = g.leaves[static_cast<std::size_t>(j)];
    sq(j) = std::sqrt(g.weights[static_cast<std::size_t>(j)] * relax.effective(u) / sys.row_norm2(u));
  }
  const Matrix s = sq.asDiagonal() * gr * sq.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es_s(s, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Matrix> es_g(gr, Eigen::EigenvaluesOnly);
  const double smax = std::max(0.0, es_s.eigenvalues().maxCoeff());
  const double gmax = es_g.eigenvalues().maxCoeff();

  Index rank_g = 0, rank_s = 0;
  for (Index j = 0; j < t; ++j) rank_g += es_g.eigenvalues()(j) > kDefaultRankTol * gmax;
  double norm = 0.0;
  for (Index j = 0; j < t; ++j) {
    const double lam = es_s.eigenvalues()(j);
    if (smax > 0.0 && lam > kDefaultRankTol * smax) {
      ++rank_s;
      norm = std::max(norm, std::abs(1.0 - lam));
    }
  }
  if (rank_s < rank_g) norm = std::max(norm, 1.0);
  return norm;
}

/// 2‖a_ℓ‖² / (w_ℓ ρ(𝒢)): any ω_ℓ strictly between 0 and this bound at every
/// leaf keeps the group norm below 1.
inline double admissible_upper_bound(const LinearSystem& sys, const LeafGroup& g, std::size_t leaf_index) {
  detail::check_leaf_group(sys, g);
  if (leaf_index >= g.leaves.size()) throw ArgumentError("leaf index out of range");
  const double rho = spectral_radius(detail::leaf_gram(sys, g));
  return 2.0 * sys.row_norm2(g.leaves[leaf_index]) / (g.weights[leaf_index] * rho);
}

struct NodeVerdict {
  NodeId node = 0;
  double omega = 0.0;  // effective value checked
  std::optional<std::size_t> group;
  bool ok = true;
};

struct GroupVerdict {
  std::size_t group = 0;
  double alpha = 0.0;  // ‖P_{G_i}|H_i‖
  bool ok = true;
  bool leaf_only = false;
  std::optional<double> formula_alpha;  // leaf formula when applicable
  std::vector<double> leaf_bounds;       // admissible upper bound per leaf
};

struct ScaleCheck {
  double s = 1.0;
  bool admissible = false;
};

struct AdmissibilityReport {
  std::vector<NodeVerdict> nodes;
  std::vector<GroupVerdict> groups;
  bool condition1 = true;
  bool condition2 = true;
  bool admissible = true;
  std::vector<ScaleCheck> scaling;  // re-checks at smaller scales
  bool scaling_closed = true;       // admissible here implies admissible at every s checked
};

namespace detail {

inline AdmissibilityReport admissibility_once(const LinearSystem& sys, const TreeNetwork& net,
                                              const SubnetworkPartition& part,
                                              const RelaxationAssignment& relax) {
  AdmissibilityReport rep;
  for (NodeId v = 0; v < net.size(); ++v) {
    NodeVerdict nv{v, relax.effective(v), part.group_of(v), true};
    if (!nv.group) {
      nv.ok = nv.omega > 0.0 && nv.omega < 2.0;
      rep.condition1 = rep.condition1 && nv.ok;
    }
    rep.nodes.push_back(nv);
  }
  for (std::size_t i = 0; i < part.size(); ++i) {
    GroupVerdict gv;
    gv.group = i;
    gv.leaf_only = part.leaf_only[i];
    gv.alpha = subnetwork_norm(sys, net, part, i, relax);
    gv.ok = gv.alpha < 1.0;
    if (gv.leaf_only) {
      const auto lg = leaf_group(net, part, i);
      gv.formula_alpha = leaf_norm_formula(sys, lg, relax);
      for (std::size_t j = 0; j < lg.leaves.size(); ++j)
        gv.leaf_bounds.push_back(admissible_upper_bound(sys, lg, j));
    }
    rep.condition2 = rep.condition2 && gv.ok;
    rep.groups.push_back(std::move(gv));
  }
  rep.admissible = rep.condition1 && rep.condition2;
  return rep;
}

}  // namespace detail

inline AdmissibilityReport check_admissibility(const LinearSystem& sys, const TreeNetwork& net,
                                               const SubnetworkPartition& part,
                                               const RelaxationAssignment& relax) {
  detail::check_sizes(sys, net.size(), relax);
  require_valid(net);
  auto rep = detail::admissibility_once(sys, net, part, relax);
  for (double s : {0.5, 0.25, 0.1}) {
    const bool ok = detail::admissibility_once(sys, net, part, relax.scaled(s)).admissible;
    rep.scaling.push_back({s, ok});
    if (rep.admissible && !ok) rep.scaling_closed = false;
  }
  return rep;
}

/// Minimizer in R(A^*) of Σ_v ω_v w(r,v) |b_v − a_v^*x|²/‖a_v‖² with the
/// unscaled ω_v (the s → 0 limit of the tree iteration).
inline Vector weighted_ls_minimizer(const LinearSystem& sys, const TreeNetwork& net,
                                    const RelaxationAssignment& relax) {
  detail::check_sizes(sys, net.size(), relax);
  require_valid(net);
  const Index k = static_cast<Index>(sys.node_count());
  Eigen::VectorXd sw(k);
  for (Index v = 0; v < k; ++v) {
    const auto u = static_cast<NodeId>(v);
    sw(v) = std::sqrt(relax.omega[u] * path_weight(net, net.root(), u) / sys.row_norm2(u));
  }
  return min_norm_solution(sw.asDiagonal() * sys.matrix(), sw.asDiagonal() * sys.rhs());
}

/// Unique y in span(basis) with y = By + c, by a direct solve of the
/// restricted system. Throws NonContractionError when ρ(Q^*BQ) >= 1.
inline Vector fixed_point(const AffineIteration& it, std::span<const Vector> basis) {
  const Index n = it.B.rows();
  if (basis.empty()) return Vector::Zero(n);
  const Matrix q = detail::columns(basis, n);
  const Matrix bq = q.adjoint() * it.B * q;
  const double rho = spectral_radius(bq);
  if (rho >= 1.0)
    throw NonContractionError("restricted spectral radius " + std::to_string(rho) + " >= 1", rho);
  const Matrix lhs = Matrix::Identity(bq.rows(), bq.cols()) - bq;
  return q * lhs.partialPivLu().solve(q.adjoint() * it.c);
}

struct DichotomyReport {
  std::vector<Scalar> eigenvalues;
  std::size_t unit_count = 0;     // eigenvalues within 1e-9 of 1
  std::size_t nullity = 0;        // dim N(A)
  double null_space_defect = 0;   // ‖(B − I)N‖ over an orthonormal basis N of N(A)
  double restricted_radius = 0;   // ρ(B on R(A^*))
  double max_other_modulus = 0;   // largest |λ| among the non-unit eigenvalues
  double delta = 0;               // 1 − max_other_modulus
  bool ok = false;
};

inline DichotomyReport eigen_dichotomy_check(const AffineIteration& it, const LinearSystem& sys) {
  DichotomyReport rep;
  rep.eigenvalues = eigenvalues(it.B).eigenvalues;
  for (const auto& lam : rep.eigenvalues) {
    if (std::abs(lam - 1.0) <= 1e-9)
      ++rep.unit_count;
    else
      rep.max_other_modulus = std::max(rep.max_other_modulus, std::abs(lam));
  }
  rep.delta = 1.0 - rep.max_other_modulus;
  const auto row = row_space_basis(sys.matrix());
  const auto null = complement_basis(row, sys.dim());
  rep.nullity = null.size();
  if (!null.empty()) {
    const Matrix n = detail::columns(null, sys.dim());
    rep.null_space_defect = ((it.B - Matrix::Identity(sys.dim(), sys.dim())) * n).norm();
  }
  rep.restricted_radius = restricted_spectral_radius(it.B, row);
  rep.ok = rep.unit_count == rep.nullity && rep.null_space_defect <= 1e-8 && rep.delta > 0.0 &&
           rep.restricted_radius < 1.0;
  return rep;
}

// ---------------------------------------------------------------------------
// DAGs

namespace detail {

/// Product of the relaxed projections along the ascending part of an
/// up-down path, and the same chain of affine updates applied to 0.
inline std::pair<Matrix, Vector> ascent_map(const LinearSystem& sys, const RelaxationAssignment& relax,
                                            const UpDownPath& p) {
  Matrix m = Matrix::Identity(sys.dim(), sys.dim());
  Vector c = Vector::Zero(sys.dim());
  for (std::size_t t = 0; t <= p.peak; ++t) {
    const NodeId u = p.nodes[t];
    m = relaxed_projection_matrix(sys.row(u), relax.effective(u)) * m;
    c = kaczmarz_update(c, sys.row(u), sys.rhs(u), relax.effective(u));
  }
  return {m, c};
}

inline Matrix block_columns_of(std::span<const Vector> basis, Index d, std::size_t s) {
  const Index r = static_cast<Index>(basis.size());
  Matrix q = Matrix::Zero(d * static_cast<Index>(s), r * static_cast<Index>(s));
  for (std::size_t i = 0; i < s; ++i)
    for (Index k = 0; k < r; ++k)
      q.block(static_cast<Index>(i) * d, static_cast<Index>(i) * r + k, d, 1) =
          basis[static_cast<std::size_t>(k)];
  return q;
}

}  // namespace detail

/// Block matrix 𝒫 with 𝒫_{j,i} = Σ_k weight · P(path k from r_i to r_j),
/// and the constant term collecting the same paths' affine offsets.
inline AffineIteration dag_block_p(const LinearSystem& sys, const DagNetwork& net,
                                   const RelaxationAssignment& relax) {
  detail::check_sizes(sys, net.size(), relax);
  require_valid(net);
  const auto mins = net.minimal_nodes();
  const Index d = sys.dim();
  const Index s = static_cast<Index>(mins.size());
  AffineIteration it{Matrix::Zero(s * d, s * d), Vector::Zero(s * d), d};
  for (Index i = 0; i < s; ++i)
    for (Index j = 0; j < s; ++j)
      for (const auto& path : enumerate_updown_paths(net, mins[static_cast<std::size_t>(i)],
                                                     mins[static_cast<std::size_t>(j)])) {
        const auto [m, c] = detail::ascent_map(sys, relax, path);
        it.B.block(j * d, i * d, d, d) += path.weight * m;
        it.c.segment(j * d, d) += path.weight * c;
      }
  return it;
}

/// Largest Euclidean block norm.
inline double block_infinity_norm(const Vector& x, Index n) {
  if (n <= 0 || x.size() % n != 0) throw DimensionError("vector size not divisible by block size");
  double m = 0.0;
  for (Index i = 0; i < x.size(); i += n) m = std::max(m, x.segment(i, n).norm());
  return m;
}

struct BlockNormEstimate {
  double upper = 0.0;  // max over block rows of Σ_i ‖M_{j,i}‖₂
  double lower = 0.0;  // best ratio seen over random unit block vectors
};

inline BlockNormEstimate block_infinity_norm(const Matrix& m, Index n, int samples = 64,
                                             std::uint64_t seed = 1) {
  if (n <= 0 || m.rows() % n != 0 || m.cols() % n != 0)
    throw DimensionError("matrix size not divisible by block size");
  BlockNormEstimate est;
  for (Index r = 0; r < m.rows(); r += n) {
    double row_sum = 0.0;
    for (Index c = 0; c < m.cols(); c += n) {
      Eigen::JacobiSVD<Matrix> svd(m.block(r, c, n, n));
      row_sum += svd.singularValues()(0);
    }
    est.upper = std::max(est.upper, row_sum);
  }
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  for (int k = 0; k < samples; ++k) {
    Vector x(m.cols());
    for (Index i = 0; i < x.size(); ++i) x(i) = Scalar(nd(gen), nd(gen));
    for (Index i = 0; i < x.size(); i += n) x.segment(i, n).normalize();
    est.lower = std::max(est.lower, block_infinity_norm(Vector(m * x), n));
  }
  return est;
}

/// Per-path SOR factors for every dispersion path, pooled into one map per
/// minimal node, and the same map in aggregate matrix form.
///
/// Rows of the aggregates are indexed by (minimal node i, path j, position on
/// P_j). 𝒮_in reads the estimate of the minimal node where P_j starts and
/// 𝒮_out writes into block i; 𝒯 carries the untouched part of those
/// estimates. The iteration is
///   z ↦ (𝒯 − 𝒮_out^*(𝒟+Ω𝓛)^{-1}Ω𝒲𝒮_in) z + 𝒮_out^*(𝒟+Ω𝓛)^{-1}Ω𝒲𝖇.
/// With one minimal node 𝒮_in = 𝒮_out and 𝒯 = I.
struct BlockStructure {
  DispersionPaths paths;
  std::vector<PathSorFactors> factors;  // one per dispersion path
  Index block_size = 0;
  Matrix S_in, S_out, D, Omega, L, W, T;
  Vector b;

  std::size_t minimal_count() const { return paths.minimal.size(); }

  Matrix gain() const { return (D + Omega * L).triangularView<Eigen::Lower>().solve(Omega * W); }

  AffineIteration affine() const {
    const Matrix k = gain();
    return {T - S_out.adjoint() * k * S_in, S_out.adjoint() * (k * b), block_size};
  }

  /// x'_i = Σ_j w_{i,j} (chain P_j applied to x_{start(j)}).
  Vector apply_pooled(const Vector& x) const {
    const Index d = block_size;
    Vector out = Vector::Zero(x.size());
    for (std::size_t j = 0; j < factors.size(); ++j) {
      const Vector y = factors[j].apply(x.segment(static_cast<Index>(paths.start[j]) * d, d));
      for (std::size_t i = 0; i < minimal_count(); ++i)
        out.segment(static_cast<Index>(i) * d, d) +=
            paths.weights(static_cast<Index>(i), static_cast<Index>(j)) * y;
    }
    return out;
  }

  /// The same aggregate with every path reading block i (𝒮_in replaced by
  /// 𝒮_out, 𝒯 by the identity). Agrees with affine() only when s = 1.
  AffineIteration block_decoupled_affine() const {
    const Matrix k = gain();
    const Index n = T.rows();
    return {Matrix::Identity(n, n) - S_out.adjoint() * k * S_out, S_out.adjoint() * (k * b), block_size};
  }

  /// Orthonormal basis of U^s (row space of A in every block), as columns.
  Matrix u_basis(const LinearSystem& sys) const {
    const auto row = row_space_basis(sys.matrix());
    return detail::block_columns_of(row, block_size, minimal_count());
  }
};

inline BlockStructure dag_block_structure(const LinearSystem& sys, const DagNetwork& net,
                                          const RelaxationAssignment& relax) {
  detail::check_sizes(sys, net.size(), relax);
  require_valid(net);
  BlockStructure bs;
  bs.paths = enumerate_dispersion_paths(net);
  bs.block_size = sys.dim();
  const Index d = sys.dim();
  const std::size_t s = bs.paths.minimal.size(), p = bs.paths.paths.size();
  Index rows = 0;
  for (const auto& path : bs.paths.paths) {
    bs.factors.push_back(path_sor_factors(sys, path.nodes, relax));
    rows += static_cast<Index>(path.nodes.size());
  }
  rows *= static_cast<Index>(s);
  const Index sd = static_cast<Index>(s) * d;
  bs.S_in = bs.S_out = Matrix::Zero(rows, sd);
  bs.D = bs.Omega = bs.L = bs.W = Matrix::Zero(rows, rows);
  bs.T = Matrix::Zero(sd, sd);
  bs.b = Vector::Zero(rows);
  Index at = 0;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const auto& f = bs.factors[j];
      const Index m = f.A_path.rows();
      const double w = bs.paths.weights(static_cast<Index>(i), static_cast<Index>(j));
      const Index in_col = static_cast<Index>(bs.paths.start[j]) * d;
      const Index out_col = static_cast<Index>(i) * d;
      bs.S_in.block(at, in_col, m, d) = f.A_path;
      bs.S_out.block(at, out_col, m, d) = f.A_path;
      bs.D.block(at, at, m, m) = f.D;
      bs.Omega.block(at, at, m, m) = f.Omega;
      bs.L.block(at, at, m, m) = f.L;
      bs.W.block(at, at, m, m) = w * Matrix::Identity(m, m);
      bs.b.segment(at, m) = f.b_path;
      bs.T.block(out_col, in_col, d, d) += w * Matrix::Identity(d, d);
      at += m;
    }
  return bs;
}

struct DagFixedPoint {
  Vector z;                          // stacked minimal-node blocks, in U^s
  double restricted_radius = 0.0;    // ρ of the block map on U^s
  double condition_residual = 0.0;   // ‖(I−𝒯)z − 𝒮_out^*K𝒲(𝖇 − 𝒮_in z)‖
  double decoupled_residual = 0.0;   // ‖𝒮_out^*K𝒲(𝖇 − 𝒮_out z)‖, the per-block form
  double block_spread = 0.0;         // max distance of a block from the block mean
};

inline double block_spread(const Vector& z, Index d) {
  const Index s = z.size() / d;
  Vector mean = Vector::Zero(d);
  for (Index i = 0; i < s; ++i) mean += z.segment(i * d, d);
  mean /= static_cast<double>(s);
  double spread = 0.0;
  for (Index i = 0; i < s; ++i) spread = std::max(spread, (z.segment(i * d, d) - mean).norm());
  return spread;
}

/// Fixed point of the block iteration restricted to U^s, with the residual
/// of the condition characterizing it.
inline DagFixedPoint dag_fixed_point(const BlockStructure& bs, const LinearSystem& sys) {
  const auto it = bs.affine();
  const Matrix q = bs.u_basis(sys);
  DagFixedPoint fp;
  const Matrix bq = q.adjoint() * it.B * q;
  fp.restricted_radius = spectral_radius(bq);
  if (fp.restricted_radius >= 1.0)
    throw NonContractionError("block map is not a contraction on U^s", fp.restricted_radius);
  fp.z = q * (Matrix::Identity(bq.rows(), bq.cols()) - bq).partialPivLu().solve(q.adjoint() * it.c);
  const Matrix k = bs.gain();
  const Index n = bs.T.rows();
  fp.condition_residual =
      ((Matrix::Identity(n, n) - bs.T) * fp.z - bs.S_out.adjoint() * (k * (bs.b - bs.S_in * fp.z))).norm();
  fp.decoupled_residual = (bs.S_out.adjoint() * (k * (bs.b - bs.S_out * fp.z))).norm();
  fp.block_spread = block_spread(fp.z, bs.block_size);
  return fp;
}

namespace detail {

/// Stationary distribution π of the minimal-node transition matrix
/// T(i,m) = Σ_{j starting at r_m} w_{i,j}.
inline Eigen::VectorXd minimal_stationary(const BlockStructure& bs) {
  const Index s = static_cast<Index>(bs.minimal_count());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(s, s);
  for (std::size_t j = 0; j < bs.paths.paths.size(); ++j)
    t.col(static_cast<Index>(bs.paths.start[j])) += bs.paths.weights.col(static_cast<Index>(j));
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(s, s) - t.transpose();
  m.row(s - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s);
  rhs(s - 1) = 1.0;
  return m.fullPivLu().solve(rhs);
}

inline Vector weighted_min_norm(const BlockStructure& bs, const std::vector<double>& c,
                                const Eigen::VectorXd& block_weight, std::size_t only_block,
                                bool all_blocks) {
  std::vector<Eigen::RowVectorXcd> rows;
  std::vector<Scalar> rhs;
  const std::size_t s = bs.minimal_count();
  for (std::size_t i = 0; i < s; ++i) {
    if (!all_blocks && i != only_block) continue;
    for (std::size_t j = 0; j < bs.factors.size(); ++j) {
      const double w = block_weight(static_cast<Index>(i)) *
                       bs.paths.weights(static_cast<Index>(i), static_cast<Index>(j));
      if (w <= 0.0) continue;
      const auto& f = bs.factors[j];
      for (Index t = 0; t < f.A_path.rows(); ++t) {
        const NodeId u = f.nodes[static_cast<std::size_t>(t)];
        const double sw = std::sqrt(w * c.at(u) / f.D(t, t).real());
        rows.push_back(sw * f.A_path.row(t));
        rhs.push_back(sw * f.b_path(t));
      }
    }
  }
  Matrix a(static_cast<Index>(rows.size()), bs.block_size);
  Vector b(static_cast<Index>(rhs.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    a.row(static_cast<Index>(r)) = rows[r];
    b(static_cast<Index>(r)) = rhs[r];
  }
  return min_norm_solution(a, b);
}

}  // namespace detail

/// Limit of the DAG fixed point x(ωc) as ω → 0: every block equals the
/// minimizer in R(A^*) of
///   Σ_i π_i Σ_j w_{i,j} Σ_{u on P_j} c_u |b_u − a_u^*v|²/‖a_u‖²,
/// with π the stationary distribution of the minimal-node transition matrix.
/// `c` holds one positive weight per network node.
inline Vector dag_ls_minimizer(const BlockStructure& bs, const std::vector<double>& c) {
  for (double ci : c)
    if (!(ci > 0.0)) throw ArgumentError("dag_ls_minimizer: weights must be positive");
  const Eigen::VectorXd pi = detail::minimal_stationary(bs);
  const Vector v = detail::weighted_min_norm(bs, c, pi, 0, true);
  Vector z(v.size() * static_cast<Index>(bs.minimal_count()));
  for (std::size_t i = 0; i < bs.minimal_count(); ++i) z.segment(static_cast<Index>(i) * v.size(), v.size()) = v;
  return z;
}

/// Per-block minimizers of ⟨𝒟^{-1}𝒞𝒲(𝖇 − 𝒮z), 𝖇 − 𝒮z⟩ with 𝒮 acting on each
/// block separately. Coincides with dag_ls_minimizer when s = 1.
inline Vector dag_ls_minimizer_decoupled(const BlockStructure& bs, const std::vector<double>& c) {
  for (double ci : c)
    if (!(ci > 0.0)) throw ArgumentError("dag_ls_minimizer: weights must be positive");
  const Index d = bs.block_size;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Index>(bs.minimal_count()));
  Vector z(d * static_cast<Index>(bs.minimal_count()));
  for (std::size_t i = 0; i < bs.minimal_count(); ++i)
    z.segment(static_cast<Index>(i) * d, d) = detail::weighted_min_norm(bs, c, ones, i, false);
  return z;
}

}  // namespace dkaczmarz
