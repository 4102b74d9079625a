#pragma once

// Dense complex linear algebra used by the solver and the closed-form
// analysis. Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "dkaczmarz/core.hpp"

namespace dkaczmarz {

inline constexpr double kDefaultRankTol = 1e-10;
inline constexpr double kDefaultDropTol = 1e-10;

struct Spectrum {
  std::vector<Scalar> eigenvalues;  // sorted by decreasing modulus
  double radius = 0.0;
};

struct EigenOptions {
  // QR sweeps allowed per eigenvalue before giving up.
  int max_sweeps_per_eigenvalue = 60;
};

/// <x, y> with the second argument conjugated, so a^* x == inner(x, a).
inline Scalar inner(const Vector& x, const Vector& y) { return y.dot(x); }

namespace detail {

inline bool is_hermitian(const Matrix& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-14 * scale;
}

inline Matrix columns(std::span<const Vector> vs, Index dim) {
  Matrix q(dim, static_cast<Index>(vs.size()));
  for (std::size_t j = 0; j < vs.size(); ++j) {
    if (vs[j].size() != dim) throw DimensionError("vector dimension mismatch");
    q.col(static_cast<Index>(j)) = vs[j];
  }
  return q;
}

inline void sort_by_modulus(std::vector<Scalar>& ev) {
  std::stable_sort(ev.begin(), ev.end(), [](const Scalar& a, const Scalar& b) {
    const double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma > mb;
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
}

}  // namespace detail

/// All eigenvalues of a square matrix, with multiplicity.
///
/// Hermitian input goes through the self-adjoint solver so the returned
/// eigenvalues are exactly real; everything else through a complex Schur
/// decomposition. Throws NumericalFailure (with the partially reduced
/// diagonal) when the QR sweeps do not converge.
inline Spectrum eigenvalues(const Matrix& m, const EigenOptions& opts = {}) {
  if (m.rows() != m.cols())
    throw DimensionError("eigenvalues: matrix is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", not square");
  if (m.rows() == 0) throw DimensionError("eigenvalues: empty matrix");
  if (!m.allFinite()) throw NumericalFailure("eigenvalues: non-finite entries", {});

  Spectrum out;
  out.eigenvalues.reserve(static_cast<std::size_t>(m.rows()));
  if (detail::is_hermitian(m)) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw NumericalFailure("eigenvalues: self-adjoint solver did not converge", {});
    for (Index i = 0; i < es.eigenvalues().size(); ++i)
      out.eigenvalues.emplace_back(es.eigenvalues()(i), 0.0);
  } else {
    Eigen::ComplexSchur<Matrix> schur(m.rows());
    schur.setMaxIterations(opts.max_sweeps_per_eigenvalue * m.rows());
    schur.compute(m, /*computeU=*/false);
    const Vector diag = schur.matrixT().diagonal();
    for (Index i = 0; i < diag.size(); ++i) out.eigenvalues.push_back(diag(i));
    if (schur.info() != Eigen::Success)
      throw NumericalFailure("eigenvalues: Schur iteration did not converge",
                             std::move(out.eigenvalues));
  }
  detail::sort_by_modulus(out.eigenvalues);
  out.radius = std::abs(out.eigenvalues.front());
  return out;
}

inline double spectral_radius(const Matrix& m) { return eigenvalues(m).radius; }

/// Gram matrix G(i,j) = <x_i, x_j>.
inline Matrix gram(std::span<const Vector> vectors) {
  if (vectors.empty()) throw DimensionError("gram: empty vector list");
  const Index dim = vectors.front().size();
  const Matrix x = detail::columns(vectors, dim);
  // <x_i, x_j> = x_j^* x_i, i.e. the transpose of X^* X.
  return (x.adjoint() * x).transpose();
}

/// Least-squares solution of minimal Euclidean norm, A^*(AA^*)^+ b, with
/// eigenvalues of AA^* below rank_tol * max treated as zero.
inline Vector min_norm_solution(const Matrix& a, const Vector& b,
                                double rank_tol = kDefaultRankTol) {
  if (a.rows() != b.size())
    throw DimensionError("min_norm_solution: matrix has " + std::to_string(a.rows()) +
                         " rows but rhs has " + std::to_string(b.size()) + " entries");
  Vector x = Vector::Zero(a.cols());
  if (a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0) return x;

  const Matrix aat = a * a.adjoint();
  Eigen::SelfAdjointEigenSolver<Matrix> es(aat);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double lam_max = lam.maxCoeff();
  if (!(lam_max > 0.0)) return x;
  Vector coeff = es.eigenvectors().adjoint() * b;
  for (Index i = 0; i < lam.size(); ++i)
    coeff(i) = lam(i) > rank_tol * lam_max ? coeff(i) / lam(i) : Scalar(0.0);
  x = a.adjoint() * (es.eigenvectors() * coeff);
  return x;
}

/// Orthonormal spanning set of span(vectors) by twice-iterated modified
/// Gram-Schmidt. A vector whose residual falls below tol * (largest input
/// norm) is dropped.
inline std::vector<Vector> orthonormal_basis(std::span<const Vector> vectors,
                                             double tol = kDefaultDropTol) {
  std::vector<Vector> basis;
  if (vectors.empty()) return basis;
  const Index dim = vectors.front().size();
  double max_norm = 0.0;
  for (const auto& v : vectors) {
    if (v.size() != dim) throw DimensionError("orthonormal_basis: dimension mismatch");
    max_norm = std::max(max_norm, v.norm());
  }
  if (max_norm == 0.0) return basis;
  for (const auto& v : vectors) {
    Vector w = v;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) w -= q * q.dot(w);
    const double n = w.norm();
    if (n > tol * max_norm) basis.push_back(w / n);
  }
  return basis;
}

/// Orthonormal basis of the orthogonal complement of span(basis) in C^dim.
/// `basis` must already be orthonormal.
inline std::vector<Vector> complement_basis(std::span<const Vector> basis, Index dim) {
  std::vector<Vector> out;
  const Index r = static_cast<Index>(basis.size());
  if (r == 0) {
    for (Index k = 0; k < dim; ++k) out.push_back(Vector::Unit(dim, k));
    return out;
  }
  const Matrix q = detail::columns(basis, dim);
  Eigen::HouseholderQR<Matrix> qr(q);
  const Matrix full = qr.householderQ() * Matrix::Identity(dim, dim);
  for (Index k = r; k < dim; ++k) out.push_back(full.col(k));
  return out;
}

/// Orthonormal basis of R(A^*) = span of the vectors a_v (rows of A conjugated).
inline std::vector<Vector> row_space_basis(const Matrix& a, double tol = kDefaultRankTol) {
  std::vector<Vector> out;
  if (a.size() == 0) return out;
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return out;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * sv(0)) out.push_back(svd.matrixV().col(i));
  return out;
}

/// Orthonormal basis of N(A).
inline std::vector<Vector> null_space_basis(const Matrix& a, double tol = kDefaultRankTol) {
  const auto row = row_space_basis(a, tol);
  return complement_basis(row, a.cols());
}

inline void require_orthonormal(std::span<const Vector> basis, double tol = 1e-10) {
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t j = i; j < basis.size(); ++j) {
      const double target = i == j ? 1.0 : 0.0;
      if (std::abs(inner(basis[i], basis[j]) - target) > tol)
        throw PreconditionError("basis is not orthonormal (pair " + std::to_string(i) + "," +
                                std::to_string(j) + ")");
    }
}

/// max ||m x|| over unit x in span(basis): the top singular value of m Q.
inline double operator_norm_on_span(const Matrix& m, std::span<const Vector> basis) {
  if (m.rows() != m.cols()) throw DimensionError("operator_norm_on_span: matrix not square");
  if (basis.empty()) return 0.0;
  require_orthonormal(basis);
  const Matrix q = detail::columns(basis, m.cols());
  const Matrix mq = m * q;
  Eigen::JacobiSVD<Matrix> svd(mq);
  return svd.singularValues()(0);
}

/// Spectral radius of m restricted to span(basis), which must be an
/// invariant subspace of m; computed as rho(Q^* m Q).
inline double restricted_spectral_radius(const Matrix& m, std::span<const Vector> basis) {
  if (basis.empty()) return 0.0;
  if (static_cast<Index>(basis.size()) == m.rows()) return spectral_radius(m);
  const Matrix q = detail::columns(basis, m.cols());
  return spectral_radius(q.adjoint() * m * q);
}

/// Orthogonal projector onto span(basis) (basis orthonormal).
inline Matrix projector(std::span<const Vector> basis, Index dim) {
  if (basis.empty()) return Matrix::Zero(dim, dim);
  const Matrix q = detail::columns(basis, dim);
  return q * q.adjoint();
}

}  // namespace dkaczmarz
