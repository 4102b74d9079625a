#pragma once

// Test-only reference implementations. They work from raw edge lists and
// plain loops so they share no code paths with the library under test.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Cx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

struct Edge {
  std::size_t from, to;
  double wd, wp;
};

struct UpDown {
  std::vector<std::size_t> nodes;
  double weight;
};

inline std::set<std::size_t> sources(std::size_t n, const std::vector<Edge>& es) {
  std::set<std::size_t> s;
  for (std::size_t v = 0; v < n; ++v) s.insert(v);
  for (const auto& e : es) s.erase(e.to);
  return s;
}

inline std::set<std::size_t> sinks(std::size_t n, const std::vector<Edge>& es) {
  std::set<std::size_t> s;
  for (std::size_t v = 0; v < n; ++v) s.insert(v);
  for (const auto& e : es) s.erase(e.from);
  return s;
}

/// Every walk m1 -> ... -> top (ascending, top maximal) -> ... -> m2
/// (descending), weighted by w_d going up and w_p coming down.
inline std::vector<UpDown> updown_paths(std::size_t n, const std::vector<Edge>& es, std::size_t m1,
                                        std::size_t m2) {
  const auto tops = sinks(n, es);
  std::vector<UpDown> out;
  std::vector<std::size_t> walk{m1};
  std::function<void(std::size_t, double)> down = [&](std::size_t v, double w) {
    if (v == m2) out.push_back({walk, w});
    for (const auto& e : es)
      if (e.to == v) {
        walk.push_back(e.from);
        down(e.from, w * e.wp);
        walk.pop_back();
      }
  };
  std::function<void(std::size_t, double)> up = [&](std::size_t v, double w) {
    if (tops.count(v)) {
      down(v, w);
      return;
    }
    for (const auto& e : es)
      if (e.from == v) {
        walk.push_back(e.to);
        up(e.to, w * e.wd);
        walk.pop_back();
      }
  };
  up(m1, 1.0);
  std::sort(out.begin(), out.end(), [](const UpDown& a, const UpDown& b) { return a.nodes < b.nodes; });
  return out;
}

/// Transitive closure as a set of pairs.
inline std::set<std::pair<std::size_t, std::size_t>> closure(std::vector<std::pair<std::size_t, std::size_t>> rel) {
  std::set<std::pair<std::size_t, std::size_t>> c(rel.begin(), rel.end());
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& [a, b] : std::vector<std::pair<std::size_t, std::size_t>>(c.begin(), c.end()))
      for (const auto& [x, y] : std::vector<std::pair<std::size_t, std::size_t>>(c.begin(), c.end()))
        if (b == x && c.insert({a, y}).second) grew = true;
  }
  return c;
}

/// (u, v) is a cover pair of the order iff u < v with nothing in between.
inline bool is_cover(const std::set<std::pair<std::size_t, std::size_t>>& order, std::size_t u, std::size_t v) {
  if (!order.count({u, v})) return false;
  for (const auto& [a, b] : order)
    if (a == u && b != v && order.count({b, v})) return false;
  return true;
}

/// Pooled weight of each (minimal node i, dispersion chain j): dispersion
/// mass of chain j times the total pooling mass of all descents from its
/// top down to minimal node i, by explicit enumeration.
struct Pooled {
  std::vector<std::size_t> minimal;
  std::vector<std::vector<std::size_t>> chains;
  std::vector<std::vector<double>> w;  // [i][j]
};

inline Pooled pooled_weights(std::size_t n, const std::vector<Edge>& es) {
  Pooled p;
  const auto mins = sources(n, es);
  const auto tops = sinks(n, es);
  p.minimal.assign(mins.begin(), mins.end());
  std::vector<double> mass;
  std::vector<std::size_t> chain;
  std::function<void(std::size_t, double)> up = [&](std::size_t v, double w) {
    chain.push_back(v);
    if (tops.count(v)) {
      p.chains.push_back(chain);
      mass.push_back(w);
    }
    std::vector<Edge> outs;
    for (const auto& e : es)
      if (e.from == v) outs.push_back(e);
    std::sort(outs.begin(), outs.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
    for (const auto& e : outs) up(e.to, w * e.wd);
    chain.pop_back();
  };
  for (std::size_t m : p.minimal) up(m, 1.0);

  std::function<double(std::size_t, std::size_t)> descend = [&](std::size_t v, std::size_t target) {
    if (v == target) return 1.0;
    double total = 0.0;
    for (const auto& e : es)
      if (e.to == v) total += e.wp * descend(e.from, target);
    return total;
  };
  for (std::size_t m : p.minimal) {
    std::vector<double> row;
    for (std::size_t j = 0; j < p.chains.size(); ++j) row.push_back(mass[j] * descend(p.chains[j].back(), m));
    p.w.push_back(row);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Engines written out longhand

inline Vec kaczmarz(const Vec& x, const Vec& a, Cx b, double omega) {
  Cx ax = 0.0;
  double na = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    ax += std::conj(a(i)) * x(i);
    na += std::norm(a(i));
  }
  return x + (omega * (b - ax) / na) * a;
}

struct TreeEdge {
  std::size_t parent, child;
  double w;
};

/// Dispersion from the root, pooling back with the edge weights.
inline Vec tree_step(const Mat& a, const Vec& b, const std::vector<double>& omega, std::size_t root,
                     const std::vector<TreeEdge>& es, const Vec& x) {
  std::function<Vec(std::size_t, const Vec&)> visit = [&](std::size_t v, const Vec& in) -> Vec {
    const Vec mine = kaczmarz(in, a.row(static_cast<Eigen::Index>(v)).adjoint(), b(static_cast<Eigen::Index>(v)), omega[v]);
    Vec pooled = Vec::Zero(x.size());
    bool leaf = true;
    for (const auto& e : es)
      if (e.parent == v) {
        leaf = false;
        pooled += e.w * visit(e.child, mine);
      }
    return leaf ? mine : pooled;
  };
  return visit(root, x);
}

/// One dispersion/pooling pass on a DAG; x holds one estimate per minimal
/// node (ascending id).
inline std::vector<Vec> dag_step(const Mat& a, const Vec& b, const std::vector<double>& omega, std::size_t n,
                                 const std::vector<Edge>& es, const std::vector<Vec>& x) {
  const auto mins = sources(n, es);
  const auto tops = sinks(n, es);
  const Eigen::Index d = a.cols();
  // Longest-path layering gives a valid processing order.
  std::vector<std::size_t> depth(n, 0);
  for (std::size_t pass = 0; pass < n; ++pass)
    for (const auto& e : es) depth[e.to] = std::max(depth[e.to], depth[e.from] + 1);
  std::vector<std::size_t> order(n);
  for (std::size_t v = 0; v < n; ++v) order[v] = v;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t u, std::size_t v) { return depth[u] < depth[v]; });

  std::vector<Vec> est(n, Vec::Zero(d));
  std::size_t k = 0;
  for (std::size_t m : mins) est[m] = x[k++];
  for (std::size_t v : order) {
    if (!mins.count(v)) {
      Vec in = Vec::Zero(d);
      for (const auto& e : es)
        if (e.to == v) in += e.wd * est[e.from];
      est[v] = in;
    }
    est[v] = kaczmarz(est[v], a.row(static_cast<Eigen::Index>(v)).adjoint(), b(static_cast<Eigen::Index>(v)), omega[v]);
  }
  std::vector<Vec> y(n, Vec::Zero(d));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t v = *it;
    if (tops.count(v)) {
      y[v] = est[v];
      continue;
    }
    for (const auto& e : es)
      if (e.from == v) y[v] += e.wp * y[e.to];
  }
  std::vector<Vec> out;
  for (std::size_t m : mins) out.push_back(y[m]);
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra references

/// Companion matrix whose characteristic polynomial is Π (λ − r).
inline Mat companion(const std::vector<double>& roots) {
  std::vector<double> c{1.0};  // monic coefficients, highest degree first
  for (double r : roots) {
    std::vector<double> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= r * c[i];
    }
    c = next;
  }
  const auto n = static_cast<Eigen::Index>(roots.size());
  Mat m = Mat::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) m(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) m(i, n - 1) = -c[static_cast<std::size_t>(n - i)];
  return m;
}

/// Pseudo-inverse solution via a complete orthogonal decomposition.
inline Vec pinv_solve(const Mat& a, const Vec& b) {
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(a);
  cod.setThreshold(1e-10);
  return cod.solve(b);
}

}  // namespace oracle
