#pragma once

// Seeded random inputs shared by the test programs.

#include <optional>
#include <vector>

#include "dkaczmarz/dkaczmarz.hpp"

namespace testutil {

using namespace dkaczmarz;

inline Vector random_vector(Rng& rng, Index d, bool complex_entries = true) {
  Vector v(d);
  for (Index i = 0; i < d; ++i) v(i) = {rng.uniform(-1, 1), complex_entries ? rng.uniform(-1, 1) : 0.0};
  return v;
}

inline RelaxationAssignment random_relax(Rng& rng, std::size_t n, double lo, double hi) {
  RelaxationAssignment r = RelaxationAssignment::uniform(n, 1.0);
  for (double& w : r.omega) w = rng.uniform(lo, hi);
  return r;
}

/// Signed entries, complex about half the time.
inline LinearSystem random_system(Rng& rng, std::size_t k, Index d, bool consistent,
                                  std::optional<Index> rank = {}) {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Signed;
  spec.k = static_cast<Index>(k);
  spec.d = d;
  spec.seed = rng.next();
  spec.consistent = consistent;
  spec.complex_entries = rng.uniform() < 0.5;
  spec.rank = rank;
  return generate_system(spec).system;
}

inline Vector stack(const std::vector<Vector>& xs) {
  Vector out(static_cast<Index>(xs.size()) * xs.front().size());
  for (std::size_t i = 0; i < xs.size(); ++i) out.segment(static_cast<Index>(i) * xs[i].size(), xs[i].size()) = xs[i];
  return out;
}

inline Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace testutil
