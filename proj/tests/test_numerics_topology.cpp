#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace dkaczmarz;
using namespace testutil;

namespace {

std::vector<Vector> vecs(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<Vector> out;
  for (const auto& r : rows) out.push_back(vec(r));
  return out;
}

std::vector<double> sorted_real(const std::vector<Scalar>& zs) {
  std::vector<double> out;
  for (const auto& z : zs) out.push_back(z.real());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// numerics

TEST(Eigenvalues, Diagonal) {
  const auto s = eigenvalues(from_rows({{0.5, 0}, {0, -0.25}}));
  EXPECT_EQ(sorted_real(s.eigenvalues), (std::vector<double>{-0.25, 0.5}));
  EXPECT_DOUBLE_EQ(s.radius, 0.5);
}

TEST(Eigenvalues, RotationHasImaginaryPair) {
  const auto s = eigenvalues(from_rows({{0, 1}, {-1, 0}}));
  ASSERT_EQ(s.eigenvalues.size(), 2u);
  std::vector<double> im{s.eigenvalues[0].imag(), s.eigenvalues[1].imag()};
  std::sort(im.begin(), im.end());
  EXPECT_NEAR(im[0], -1.0, 1e-12);
  EXPECT_NEAR(im[1], 1.0, 1e-12);
  EXPECT_NEAR(s.eigenvalues[0].real(), 0.0, 1e-12);
  EXPECT_NEAR(s.radius, 1.0, 1e-12);
}

TEST(Eigenvalues, Identity) {
  const auto s = eigenvalues(Matrix::Identity(3, 3));
  for (const auto& z : s.eigenvalues) EXPECT_NEAR(std::abs(z - 1.0), 0.0, 1e-14);
  EXPECT_DOUBLE_EQ(s.radius, 1.0);
}

TEST(Eigenvalues, NonSquareThrows) { EXPECT_THROW(eigenvalues(Matrix::Zero(2, 3)), DimensionError); }

TEST(Eigenvalues, SortedByDecreasingModulus) {
  const auto s = eigenvalues(oracle::companion({1, -3, 2, 0.5}));
  for (std::size_t i = 1; i < s.eigenvalues.size(); ++i)
    EXPECT_GE(std::abs(s.eigenvalues[i - 1]) + 1e-12, std::abs(s.eigenvalues[i]));
}

TEST(SpectralRadius, Examples) {
  EXPECT_EQ(spectral_radius(Matrix::Zero(3, 3)), 0.0);
  EXPECT_NEAR(spectral_radius(oracle::companion({1, 2})), 2.0, 1e-12);
  EXPECT_NEAR(spectral_radius(from_rows({{0.9, 0.1}, {0, 0.9}})), 0.9, 1e-7);
}

TEST(SpectralRadius, HermitianEigenvaluesReal) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Index n = 1 + static_cast<Index>(rng.below(12));
    Matrix g(n, n);
    for (Index j = 0; j < n; ++j) g.col(j) = random_vector(rng, n);
    const Matrix h = g + g.adjoint();
    for (const auto& z : eigenvalues(h).eigenvalues) EXPECT_LE(std::abs(z.imag()), 1e-10);
  }
}

TEST(SpectralRadius, SimilarityInvariant) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Index n = 1 + static_cast<Index>(rng.below(20));
    Matrix m(n, n), t(n, n);
    for (Index j = 0; j < n; ++j) {
      m.col(j) = random_vector(rng, n);
      t.col(j) = 0.3 * random_vector(rng, n);
    }
    t += Matrix::Identity(n, n) * 2.0;  // diagonally dominant, well conditioned
    const double r = spectral_radius(m);
    EXPECT_NEAR(spectral_radius(t * m * t.inverse()), r, 1e-8 * std::max(1.0, r));
  }
}

TEST(Gram, Examples) {
  EXPECT_TRUE(gram(vecs({{1, 0}, {0, 1}})).isApprox(Matrix::Identity(2, 2)));
  EXPECT_TRUE(gram(vecs({{1, 0}, {1, 1}})).isApprox(from_rows({{1, 1}, {1, 2}})));
  const auto single = gram(vecs({{3, 4}}));
  EXPECT_NEAR(single(0, 0).real(), 25.0, 1e-14);
}

TEST(Gram, MismatchedDims) { EXPECT_THROW(gram(vecs({{1, 0}, {1, 0, 0}})), DimensionError); }

TEST(Gram, PositiveSemidefinite) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::vector<Vector> vs;
    const std::size_t count = 1 + rng.below(6);
    for (std::size_t i = 0; i < count; ++i) vs.push_back(random_vector(rng, 3));
    for (const auto& z : eigenvalues(gram(vs)).eigenvalues) EXPECT_GE(z.real(), -1e-12);
  }
}

TEST(MinNormSolution, Examples) {
  EXPECT_TRUE(min_norm_solution(from_rows({{1, 1}}), vec({2})).isApprox(vec({1, 1})));
  EXPECT_TRUE(min_norm_solution(Matrix::Identity(2, 2), vec({3, 4})).isApprox(vec({3, 4})));
  const Vector x = min_norm_solution(from_rows({{1, 0}, {1, 0}}), vec({0, 1}));
  EXPECT_NEAR((x - vec({0.5, 0})).norm(), 0.0, 1e-12);
}

TEST(MinNormSolution, OrthogonalToNullSpaceAndMatchesPseudoInverse) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Rng rng(seed);
    const std::size_t k = 1 + rng.below(7);
    const Index d = 1 + static_cast<Index>(rng.below(7));
    std::optional<Index> rank;
    if (seed % 2 == 0) rank = 1 + static_cast<Index>(rng.below(static_cast<std::size_t>(std::min<Index>(d, static_cast<Index>(k)))));
    const auto sys = random_system(rng, k, d, false, rank);
    const Vector x = min_norm_solution(sys.matrix(), sys.rhs());
    for (const auto& n : complement_basis(row_space_basis(sys.matrix()), d)) EXPECT_LE(std::abs(inner(x, n)), 1e-10);
    EXPECT_LE((x - oracle::pinv_solve(sys.matrix(), sys.rhs())).norm(), 1e-8 * (1.0 + x.norm()));
  }
}

TEST(OrthonormalBasis, Examples) {
  const auto a = orthonormal_basis(vecs({{2, 0}}));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_TRUE(a[0].isApprox(vec({1, 0})));
  EXPECT_EQ(orthonormal_basis(vecs({{1, 0}, {1, 0}})).size(), 1u);
  const auto b = orthonormal_basis(vecs({{1, 1}, {1, 0}}));
  ASSERT_EQ(b.size(), 2u);
  EXPECT_TRUE(gram(b).isApprox(Matrix::Identity(2, 2)));
  EXPECT_NO_THROW(require_orthonormal(b));
}

TEST(OperatorNormOnSpan, Examples) {
  const auto e2 = vecs({{0, 1}});
  EXPECT_EQ(operator_norm_on_span(Matrix::Zero(2, 2), e2), 0.0);
  EXPECT_NEAR(operator_norm_on_span(3.0 * Matrix::Identity(2, 2), vecs({{1, 0}})), 3.0, 1e-14);
  EXPECT_NEAR(operator_norm_on_span(from_rows({{2, 0}, {0, 0.5}}), e2), 0.5, 1e-14);
  EXPECT_THROW(operator_norm_on_span(Matrix::Identity(2, 2), vecs({{1, 1}})), PreconditionError);
}

TEST(OperatorNormOnSpan, FullBasisIsLargestSingularValue) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Index n = 1 + static_cast<Index>(rng.below(8));
    Matrix m(n, n);
    for (Index j = 0; j < n; ++j) m.col(j) = random_vector(rng, n);
    std::vector<Vector> basis;
    for (Index i = 0; i < n; ++i) basis.push_back(Vector::Unit(n, i));
    Eigen::JacobiSVD<Matrix> svd(m);
    EXPECT_NEAR(operator_norm_on_span(m, basis), svd.singularValues()(0), 1e-9);
  }
}

// ---------------------------------------------------------------------------
// trees

TEST(ValidateTree, Examples) {
  EXPECT_TRUE(validate_tree(TreeNetwork::from_edges(2, 0, {{0, 1, 1.0}})).ok());
  const auto bad = validate_tree(TreeNetwork::from_edges(3, 0, {{0, 1, 0.3}, {0, 2, 0.6}}));
  ASSERT_TRUE(bad.has("weight-sum"));
  EXPECT_EQ(bad.violations.front().nodes, std::vector<NodeId>{0});
  EXPECT_TRUE(validate_tree(seven_node_tree()).ok());
  for (NodeId v = 1; v < 7; ++v) EXPECT_DOUBLE_EQ(seven_node_tree().edge_weight(v), 0.5);
}

TEST(ValidateTree, StructuralErrors) {
  EXPECT_THROW(TreeNetwork::from_edges(2, 0, {{0, 5, {}}}), ValidationError);
  EXPECT_THROW(TreeNetwork::from_edges(2, 0, {{1, 1, {}}}), ValidationError);
  EXPECT_THROW(TreeNetwork::from_edges(3, 0, {{0, 2, {}}, {1, 2, {}}}), ValidationError);
  EXPECT_TRUE(validate_tree(TreeNetwork::from_edges(3, 0, {{0, 1, {}}})).has("disconnected"));
  EXPECT_TRUE(validate_tree(TreeNetwork::from_edges(2, 0, {{0, 1, -1.0}})).has("weight-positive"));
  EXPECT_TRUE(validate_tree(TreeNetwork::from_edges(2, 0, {{1, 0, 1.0}})).has("root-parent"));
}

TEST(PathWeight, Examples) {
  const auto chain = TreeNetwork::from_edges(3, 0, {{0, 1, 1.0}, {1, 2, 1.0}});
  EXPECT_DOUBLE_EQ(path_weight(chain, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(path_weight(chain, 0, 2), 1.0);
  const auto t = TreeNetwork::from_edges(5, 0, {{0, 1, 0.3}, {0, 2, 0.7}, {1, 3, 0.5}, {1, 4, 0.5}});
  EXPECT_DOUBLE_EQ(path_weight(t, 0, 3), 0.15);
  EXPECT_THROW(path_weight(t, 2, 3), RelationError);
}

TEST(PathWeight, LeafWeightsSumToOne) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    const auto net = random_tree(rng, 1 + rng.below(12));
    double total = 0.0;
    for (NodeId l : net.leaves()) total += path_weight(net, net.root(), l);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

namespace {

/// 0-based version of the subnetwork example: root 0 with children 1, 2;
/// 1 has leaves 3, 4; 2 has leaves 5, 6, 7.
TreeNetwork example_tree() {
  return TreeNetwork::from_edges(8, 0, {{0, 1, {}}, {0, 2, {}}, {1, 3, {}}, {1, 4, {}}, {2, 5, {}}, {2, 6, {}}, {2, 7, {}}});
}

}  // namespace

TEST(ValidateSubnetworks, Examples) {
  const auto net = example_tree();
  EXPECT_TRUE(validate_subnetworks(net, {{1, 3, 4}, {5, 6, 7}}).ok());
  const auto part = SubnetworkPartition::build(net, {{1, 3, 4}, {5, 6, 7}});
  EXPECT_EQ(part.gateway, (std::vector<NodeId>{0, 2}));
  EXPECT_EQ(part.leaf_only, (std::vector<bool>{false, true}));

  EXPECT_TRUE(validate_subnetworks(net, {{3}}).has("sibling-closure"));
  EXPECT_TRUE(validate_subnetworks(net, {{1, 3, 4, 5}, {5, 6, 7}}).has("disjoint"));
}

TEST(ValidateSubnetworks, OtherRules) {
  const auto net = example_tree();
  EXPECT_TRUE(validate_subnetworks(net, {{0, 1, 3, 4}}).has("root-avoidance"));
  EXPECT_TRUE(validate_subnetworks(net, {{1, 3}}).has("downward-closure"));
  EXPECT_TRUE(validate_subnetworks(net, {{}}).has("empty-group"));
  EXPECT_TRUE(validate_subnetworks(net, {{9}}).has("unknown-node"));
  EXPECT_TRUE(validate_subnetworks(net, {{3, 4}}).has("leaf-coverage"));
  EXPECT_THROW(SubnetworkPartition::build(net, {{3}}), ValidationError);
  EXPECT_NO_THROW(SubnetworkPartition::build(net, {{3, 4}}));
}

// ---------------------------------------------------------------------------
// DAGs

TEST(HasseReduce, Examples) {
  using P = std::vector<std::pair<NodeId, NodeId>>;
  EXPECT_EQ(hasse_reduce({{1, 2}, {2, 3}, {1, 3}}), (P{{1, 2}, {2, 3}}));
  EXPECT_EQ(hasse_reduce({{1, 2}}), (P{{1, 2}}));
  EXPECT_EQ(hasse_reduce({{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}).size(), 3u);
  EXPECT_THROW(hasse_reduce({{1, 2}, {2, 1}}), OrderError);
  EXPECT_THROW(hasse_reduce({{1, 1}}), OrderError);
}

TEST(HasseReduce, ClosurePreservedAgainstBruteForce) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.below(9);
    std::vector<std::pair<NodeId, NodeId>> rel;
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = u + 1; v < n; ++v)
        if (rng.uniform() < 0.35) rel.emplace_back(u, v);
    if (rel.empty()) continue;
    const auto covers = hasse_reduce(rel);
    const auto order = oracle::closure(rel);
    EXPECT_EQ(oracle::closure(covers), order);
    for (const auto& [u, v] : covers) EXPECT_TRUE(oracle::is_cover(order, u, v));
    std::size_t expected = 0;
    for (const auto& [u, v] : order) expected += oracle::is_cover(order, u, v);
    EXPECT_EQ(covers.size(), expected);
  }
}

TEST(TopologicalOrder, Examples) {
  EXPECT_EQ(topological_order(DagNetwork::from_edges(1, {})), std::vector<NodeId>{0});
  EXPECT_EQ(topological_order(DagNetwork::from_edges(3, {{0, 1, {}, {}}, {0, 2, {}, {}}})),
            (std::vector<NodeId>{0, 1, 2}));
  EXPECT_EQ(topological_order(two_root_dag()), (std::vector<NodeId>{0, 1, 2, 3, 4, 5}));
  EXPECT_THROW(topological_order(DagNetwork::from_edges(2, {{0, 1, {}, {}}, {1, 0, {}, {}}})), OrderError);
}

TEST(TopologicalOrder, PermutationRespectingEdges) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Rng rng(seed);
    const auto net = random_dag(rng, 10, 4);
    const auto order = topological_order(net);
    EXPECT_EQ(order, topological_order(net));
    std::vector<std::size_t> pos(net.size());
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
    for (const auto& e : net.edges()) EXPECT_LT(pos[e.from], pos[e.to]);
  }
}

TEST(ValidateDag, WeightAxioms) {
  EXPECT_TRUE(validate_dag(two_root_dag()).ok());
  const auto bad = DagNetwork::from_edges(3, {{0, 2, 0.5, 1.0}, {1, 2, 0.3, 1.0}});
  EXPECT_TRUE(validate_dag(bad).has("dispersion-sum"));
  const auto bad_pool = DagNetwork::from_edges(3, {{0, 1, 1.0, 0.4}, {0, 2, 1.0, 0.4}});
  EXPECT_TRUE(validate_dag(bad_pool).has("pooling-sum"));
  EXPECT_TRUE(validate_dag(DagNetwork::from_edges(3, {{0, 1, {}, {}}})).has("disconnected"));
}

namespace {

std::vector<oracle::Edge> raw_edges(const DagNetwork& net) {
  std::vector<oracle::Edge> out;
  for (const auto& e : net.edges()) out.push_back({e.from, e.to, e.wd, e.wp});
  return out;
}

}  // namespace

TEST(UpDownPaths, Examples) {
  const auto v = DagNetwork::from_edges(3, {{0, 2, 0.4, 1.0}, {1, 2, 0.6, 1.0}});
  const auto p = enumerate_updown_paths(v, 0, 1);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].nodes, (std::vector<NodeId>{0, 2, 1}));
  EXPECT_EQ(p[0].peak, 1u);
  EXPECT_DOUBLE_EQ(p[0].weight, 0.4 * 1.0);

  const auto single = enumerate_updown_paths(DagNetwork::from_edges(1, {}), 0, 0);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].nodes, std::vector<NodeId>{0});
  EXPECT_DOUBLE_EQ(single[0].weight, 1.0);

  EXPECT_THROW(enumerate_updown_paths(v, 0, 2), ArgumentError);
}

TEST(UpDownPaths, MatchBruteForceOracle) {
  std::vector<DagNetwork> nets{two_root_dag()};
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    nets.push_back(random_dag(rng, 8, 3));
  }
  for (const auto& net : nets) {
    const auto raw = raw_edges(net);
    for (NodeId m1 : net.minimal_nodes())
      for (NodeId m2 : net.minimal_nodes()) {
        const auto got = enumerate_updown_paths(net, m1, m2);
        const auto want = oracle::updown_paths(net.size(), raw, m1, m2);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
          EXPECT_EQ(got[k].nodes, want[k].nodes);
          EXPECT_NEAR(got[k].weight, want[k].weight, 1e-15);
        }
      }
  }
}

TEST(UpDownPaths, WeightsIntoEachDestinationSumToOne) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    const auto net = random_dag(rng, 8, 3);
    for (NodeId dst : net.minimal_nodes()) {
      double total = 0.0;
      for (NodeId src : net.minimal_nodes())
        for (const auto& p : enumerate_updown_paths(net, src, dst)) total += p.weight;
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(UpDownPaths, ReversedSequencesExist) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Rng rng(seed);
    const auto net = random_dag(rng, 8, 3);
    for (NodeId a : net.minimal_nodes())
      for (NodeId b : net.minimal_nodes()) {
        std::set<std::vector<NodeId>> back;
        for (const auto& p : enumerate_updown_paths(net, b, a)) back.insert(p.nodes);
        for (auto p : enumerate_updown_paths(net, a, b)) {
          std::reverse(p.nodes.begin(), p.nodes.end());
          EXPECT_TRUE(back.count(p.nodes));
        }
      }
  }
}

TEST(MinimalDistanceDiameter, Examples) {
  EXPECT_EQ(minimal_distance_diameter(DagNetwork::from_edges(2, {{0, 1, {}, {}}})), 1u);
  // r1->5<-r2, r3->6, r3->7<-r4, 5->8<-6 with ids shifted down by one.
  const auto fig = DagNetwork::from_edges(
      8, {{0, 4, {}, {}}, {1, 4, {}, {}}, {2, 5, {}, {}}, {2, 6, {}, {}}, {3, 6, {}, {}}, {4, 7, {}, {}}, {5, 7, {}, {}}});
  EXPECT_EQ(minimal_distance_diameter(fig), 2u);
  EXPECT_EQ(minimal_distance_diameter(DagNetwork::from_edges(3, {{0, 2, {}, {}}, {1, 2, {}, {}}})), 1u);
}

TEST(DispersionPaths, Examples) {
  const auto single = enumerate_dispersion_paths(DagNetwork::from_edges(1, {}));
  ASSERT_EQ(single.paths.size(), 1u);
  EXPECT_DOUBLE_EQ(single.weights(0, 0), 1.0);

  const auto edge = enumerate_dispersion_paths(DagNetwork::from_edges(2, {{0, 1, {}, {}}}));
  ASSERT_EQ(edge.paths.size(), 1u);
  EXPECT_EQ(edge.paths[0].nodes, (std::vector<NodeId>{0, 1}));
  EXPECT_DOUBLE_EQ(edge.weights(0, 0), 1.0);
}

TEST(DispersionPaths, MatchProductMeasureOracle) {
  std::vector<DagNetwork> nets{two_root_dag(), DagNetwork::from_edges(3, {{0, 2, 0.3, 1.0}, {1, 2, 0.7, 1.0}})};
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    nets.push_back(random_dag(rng, 8, 3, seed % 3 != 0));
  }
  for (const auto& net : nets) {
    const auto got = enumerate_dispersion_paths(net);
    const auto want = oracle::pooled_weights(net.size(), raw_edges(net));
    ASSERT_EQ(got.minimal, want.minimal);
    ASSERT_EQ(got.paths.size(), want.chains.size());
    for (std::size_t j = 0; j < got.paths.size(); ++j) EXPECT_EQ(got.paths[j].nodes, want.chains[j]);
    for (std::size_t i = 0; i < want.minimal.size(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < want.chains.size(); ++j) {
        EXPECT_NEAR(got.weights(static_cast<Index>(i), static_cast<Index>(j)), want.w[i][j], 1e-14);
        row += want.w[i][j];
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  }
}
