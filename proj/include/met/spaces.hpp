#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "met/error.hpp"
#include "met/linalg.hpp"
#include "met/symspace.hpp"

namespace met {

template <class S>
concept MetricSpace = requires(const S& s, const typename S::Point& x) {
  { s.distance(x, x) } -> std::convertible_to<double>;
  { s.basepoint() } -> std::convertible_to<typename S::Point>;
};

template <class S>
concept GeodesicSpace = MetricSpace<S> && requires(const S& s, const typename S::Point& x, double t) {
  { s.geodesic(x, x, t) } -> std::convertible_to<typename S::Point>;
};

template <class G, class P>
concept IsometryOf = requires(const G& g, const P& p) {
  { g(p) } -> std::convertible_to<P>;
  { g.inverse() } -> std::convertible_to<G>;
};

// ---- Euclidean space

struct EuclideanSpace {
  using Point = Vector;
  int dim = 1;

  double distance(const Point& a, const Point& b) const { return (a - b).norm(); }
  Point basepoint() const { return Vector::Zero(dim); }
  Point geodesic(const Point& a, const Point& b, double t) const { return a + t * (b - a); }
  Point midpoint(const Point& a, const Point& b) const { return 0.5 * (a + b); }
};

// x -> linear x + shift with linear orthogonal.
struct EuclideanIsometry {
  Matrix linear;
  Vector shift;

  EuclideanIsometry(Matrix l, Vector s) : linear(std::move(l)), shift(std::move(s)) {
    const auto n = linear.rows();
    if (linear.cols() != n || shift.size() != n) throw PreconditionError("EuclideanIsometry: shape mismatch");
    if ((linear.transpose() * linear - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
      throw PreconditionError("EuclideanIsometry: linear part is not orthogonal");
  }

  static EuclideanIsometry translation(const Vector& v) {
    return EuclideanIsometry(Matrix::Identity(v.size(), v.size()), v);
  }

  Vector operator()(const Vector& x) const { return linear * x + shift; }
  EuclideanIsometry inverse() const { return EuclideanIsometry(linear.transpose(), -(linear.transpose() * shift)); }
  // (a * b)(x) = a(b(x))
  friend EuclideanIsometry operator*(const EuclideanIsometry& a, const EuclideanIsometry& b) {
    return EuclideanIsometry(a.linear * b.linear, a.linear * b.shift + a.shift);
  }
};

// ---- SPD symmetric space

struct SpdSpace {
  using Point = SpdPoint;
  int n = 2;

  double distance(const Point& a, const Point& b) const { return spd_distance(a, b); }
  Point basepoint() const { return SpdPoint::identity(n); }
  Point geodesic(const Point& a, const Point& b, double t) const { return met::geodesic(a, b, t); }
  Point midpoint(const Point& a, const Point& b) const { return met::midpoint(a, b); }
};

// p -> g p g^t
struct SpdIsometry {
  Matrix g;

  explicit SpdIsometry(Matrix m) : g(std::move(m)) {
    if (g.rows() != g.cols()) throw PreconditionError("SpdIsometry: matrix must be square");
  }

  SpdPoint operator()(const SpdPoint& p) const { return act(g, p); }
  SpdIsometry inverse() const {
    Eigen::FullPivLU<Matrix> lu(g);
    if (!lu.isInvertible()) throw PreconditionError("SpdIsometry: matrix is not invertible");
    return SpdIsometry(lu.inverse());
  }
  friend SpdIsometry operator*(const SpdIsometry& a, const SpdIsometry& b) { return SpdIsometry(a.g * b.g); }
};

// ---- the line with the metric |x - y|^p, 0 < p <= 1

struct DMetricLine {
  using Point = double;
  double p = 0.5;

  explicit DMetricLine(double exponent = 0.5) : p(exponent) {
    if (!(p > 0.0 && p <= 1.0)) throw PreconditionError("DMetricLine: need 0 < p <= 1");
  }
  double distance(double a, double b) const { return std::pow(std::abs(a - b), p); }
  double basepoint() const { return 0.0; }
};

// x -> sign * x + shift; an isometry of every metric D(|x - y|).
struct LineIsometry {
  double sign = 1.0;
  double shift = 0.0;

  double operator()(double x) const { return sign * x + shift; }
  LineIsometry inverse() const { return {sign, -sign * shift}; }
  friend LineIsometry operator*(const LineIsometry& a, const LineIsometry& b) {
    return {a.sign * b.sign, a.sign * b.shift + a.shift};
  }
};

// ---- finite metric graphs (shortest-path metric)

class FiniteMetricSpace {
 public:
  using Point = int;

  FiniteMetricSpace(int vertices, const std::vector<std::tuple<int, int, double>>& edges, int base = 0)
      : n_(vertices), base_(base) {
    if (n_ < 1 || base < 0 || base >= n_) throw PreconditionError("FiniteMetricSpace: bad vertex count or basepoint");
    const double inf = std::numeric_limits<double>::infinity();
    auto d = std::make_shared<Matrix>(Matrix::Constant(n_, n_, inf));
    for (int i = 0; i < n_; ++i) (*d)(i, i) = 0;
    for (auto [u, v, w] : edges) {
      if (u < 0 || v < 0 || u >= n_ || v >= n_ || !(w > 0)) throw PreconditionError("FiniteMetricSpace: bad edge");
      (*d)(u, v) = std::min((*d)(u, v), w);
      (*d)(v, u) = std::min((*d)(v, u), w);
    }
    for (int k = 0; k < n_; ++k)
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) (*d)(i, j) = std::min((*d)(i, j), (*d)(i, k) + (*d)(k, j));
    if (!d->allFinite()) throw PreconditionError("FiniteMetricSpace: graph is disconnected");
    dist_ = d;
  }

  int size() const { return n_; }
  double distance(int a, int b) const { return (*dist_)(a, b); }
  int basepoint() const { return base_; }

 private:
  int n_;
  int base_;
  std::shared_ptr<const Matrix> dist_;
};

// ---- finite metric trees (CAT(0), curvature free)

struct TreePoint {
  int v = 0;       // lower endpoint of the edge carrying the point (the root for the root itself)
  double s = 0.0;  // distance from the parent of v along that edge
};

class MetricTree {
 public:
  using Point = TreePoint;

  // parent[0] must be -1 (the root); length[v] is the length of the edge (parent[v], v).
  MetricTree(std::vector<int> parent, std::vector<double> length)
      : parent_(std::move(parent)), length_(std::move(length)) {
    const int n = static_cast<int>(parent_.size());
    if (n < 1 || parent_[0] != -1 || static_cast<int>(length_.size()) != n)
      throw PreconditionError("MetricTree: vertex 0 must be the root");
    depth_.assign(n, -1.0);
    depth_[0] = 0.0;
    level_.assign(n, 0);
    for (int pass = 0; pass < n; ++pass)
      for (int v = 1; v < n; ++v) {
        const int p = parent_[v];
        if (p < 0 || p >= n || p == v) throw PreconditionError("MetricTree: bad parent");
        if (!(length_[v] > 0)) throw PreconditionError("MetricTree: edge lengths must be positive");
        if (depth_[v] < 0 && depth_[p] >= 0) {
          depth_[v] = depth_[p] + length_[v];
          level_[v] = level_[p] + 1;
        }
      }
    for (double d : depth_)
      if (d < 0) throw PreconditionError("MetricTree: parent links do not form a tree");
  }

  int vertices() const { return static_cast<int>(parent_.size()); }
  TreePoint vertex(int v) const { return v == 0 ? TreePoint{0, 0.0} : TreePoint{v, length_[v]}; }
  TreePoint basepoint() const { return vertex(0); }

  double depth(const TreePoint& p) const { return p.v == 0 ? 0.0 : depth_[parent_[p.v]] + p.s; }

  double distance(const TreePoint& a, const TreePoint& b) const {
    const double da = depth(a), db = depth(b);
    return da + db - 2.0 * std::min({da, db, depth_[lca(a.v, b.v)]});
  }

  // t is clamped to [0, 1]: geodesics do not extend uniquely past a vertex.
  TreePoint geodesic(const TreePoint& a, const TreePoint& b, double t) const {
    t = std::clamp(t, 0.0, 1.0);
    const double da = depth(a), db = depth(b);
    const double c = std::min({da, db, depth_[lca(a.v, b.v)]});
    const double along = t * (da + db - 2.0 * c);
    if (along <= da - c) return point_above(a.v, da - along);
    return point_above(b.v, c + (along - (da - c)));
  }

  TreePoint midpoint(const TreePoint& a, const TreePoint& b) const { return geodesic(a, b, 0.5); }

 private:
  int lca(int a, int b) const {
    while (level_[a] > level_[b]) a = parent_[a];
    while (level_[b] > level_[a]) b = parent_[b];
    while (a != b) {
      a = parent_[a];
      b = parent_[b];
    }
    return a;
  }

  // the point at depth d on the path from the root to vertex v
  TreePoint point_above(int v, double d) const {
    if (d <= 0 || v == 0) return vertex(0);
    int u = v;
    while (u != 0 && depth_[parent_[u]] > d) u = parent_[u];
    if (u == 0) return vertex(0);
    return TreePoint{u, std::min(d - depth_[parent_[u]], length_[u])};
  }

  std::vector<int> parent_;
  std::vector<double> length_;
  std::vector<double> depth_;
  std::vector<int> level_;
};

// ---- audits

struct MetricAudit {
  bool ok = true;
  double worst_symmetry = 0.0;
  double worst_identity = 0.0;
  double worst_triangle = 0.0;  // max of d(x,z) - d(x,y) - d(y,z)
  long checked = 0;
};

template <MetricSpace S>
MetricAudit audit_metric(const S& space, const std::vector<typename S::Point>& points, long triples,
                         std::uint64_t seed = 11) {
  MetricAudit a;
  if (points.empty()) return a;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  for (long k = 0; k < triples; ++k) {
    const auto& x = points[pick(rng)];
    const auto& y = points[pick(rng)];
    const auto& z = points[pick(rng)];
    const double dxy = space.distance(x, y), dyx = space.distance(y, x);
    const double dyz = space.distance(y, z), dxz = space.distance(x, z);
    a.worst_symmetry = std::max(a.worst_symmetry, std::abs(dxy - dyx));
    a.worst_identity = std::max(a.worst_identity, std::abs(space.distance(x, x)));
    a.worst_triangle = std::max(a.worst_triangle, dxz - dxy - dyz);
    ++a.checked;
  }
  a.ok = a.worst_symmetry <= 1e-12 && a.worst_identity <= 1e-12 && a.worst_triangle <= 1e-9;
  return a;
}

}  // namespace met
