#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "met/cocycle.hpp"
#include "met/dynsys.hpp"
#include "met/error.hpp"
#include "met/linalg.hpp"

namespace met {

// A point of P_n, the determinant-one SPD matrices, held as frame * diag(exp(l)) * frame^T
// with l descending and summing to zero. Points far from I (eigenvalues like 4^512)
// stay representable because only log-eigenvalues are stored.
class SpdPoint {
 public:
  SpdPoint() = default;

  static SpdPoint identity(int n) { return SpdPoint(Matrix::Identity(n, n), Vector::Zero(n)); }

  static SpdPoint from_eigen(const Matrix& frame, const Vector& log_eig) {
    const int n = static_cast<int>(log_eig.size());
    if (frame.rows() != n || frame.cols() != n) throw PreconditionError("SpdPoint: frame shape mismatch");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return log_eig(a) > log_eig(b); });
    Matrix f(n, n);
    Vector l(n);
    for (int k = 0; k < n; ++k) {
      f.col(k) = frame.col(order[k]);
      l(k) = log_eig(order[k]);
    }
    l.array() -= l.mean();
    return SpdPoint(std::move(f), std::move(l));
  }

  // Normalizes to det 1.
  static SpdPoint from_matrix(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0) throw DomainError("SpdPoint: matrix must be square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw DomainError("SpdPoint: matrix is not symmetric");
    auto es = sym_eigen(m);
    Vector l(es.values.size());
    for (int i = 0; i < l.size(); ++i) {
      if (!(es.values(i) > 0)) throw DomainError("SpdPoint: matrix is not positive definite");
      l(i) = std::log(std::max(es.values(i), 1e-300));
    }
    return from_eigen(es.vectors, l);
  }

  // exp of a symmetric matrix, trace removed.
  static SpdPoint exp(const Matrix& x) {
    if ((x - x.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff()))
      throw DomainError("SpdPoint::exp: argument is not symmetric");
    auto es = sym_eigen(x);
    return from_eigen(es.vectors, es.values);
  }

  int dim() const { return static_cast<int>(log_eig_.size()); }
  const Matrix& frame() const { return frame_; }
  const Vector& log_eigenvalues() const { return log_eig_; }
  // R(p): sorted eigenvalues of log p
  Vector cartan() const { return log_eig_; }

  Matrix power(double t) const {
    return frame_ * (t * log_eig_).array().exp().matrix().asDiagonal() * frame_.transpose();
  }
  Matrix matrix() const { return power(1.0); }
  Matrix sqrt() const { return power(0.5); }
  Matrix inv_sqrt() const { return power(-0.5); }
  Matrix log() const { return frame_ * log_eig_.asDiagonal() * frame_.transpose(); }

 private:
  SpdPoint(Matrix f, Vector l) : frame_(std::move(f)), log_eig_(std::move(l)) {}
  Matrix frame_;
  Vector log_eig_;
};

namespace detail {

// If o is a signed permutation up to rounding, returns pi with |o(i, pi[i])| = 1.
// Frames that agree to rounding are treated as equal: their difference is not
// resolvable in double precision however large the eigenvalue spread.
inline std::optional<std::vector<int>> snap_permutation(const Matrix& o) {
  const double tol = 64 * std::numeric_limits<double>::epsilon();
  const int n = static_cast<int>(o.rows());
  std::vector<int> pi(n, -1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = std::abs(o(i, j));
      if (std::abs(a - 1.0) <= tol) {
        if (pi[i] != -1) return std::nullopt;
        pi[i] = j;
      } else if (a > tol) {
        return std::nullopt;
      }
    }
  for (int v : pi)
    if (v < 0) return std::nullopt;
  return pi;
}

inline Matrix relative_frame(const SpdPoint& p, const SpdPoint& q) {
  if (p.frame() == q.frame()) return Matrix::Identity(p.dim(), p.dim());
  return p.frame().transpose() * q.frame();
}

inline void same_dim(const SpdPoint& p, const SpdPoint& q) {
  if (p.dim() != q.dim()) throw PreconditionError("SPD points of different dimensions");
}

}  // namespace detail

// Log singular values of p^{-1/2} q^{1/2}; d(p,q) is twice their Euclidean norm.
inline Vector relative_log_singular_values(const SpdPoint& p, const SpdPoint& q) {
  detail::same_dim(p, q);
  Matrix o = detail::relative_frame(p, q);
  if (auto pi = detail::snap_permutation(o)) {
    Vector out(p.dim());
    for (int i = 0; i < p.dim(); ++i) out(i) = 0.5 * (q.log_eigenvalues()(pi->at(i)) - p.log_eigenvalues()(i));
    return out;
  }
  return wedge_log_singular_values(-0.5 * p.log_eigenvalues(), o, 0.5 * q.log_eigenvalues());
}

// d(p, q) = ||log(p^{-1/2} q p^{-1/2})||_F
inline double spd_distance(const SpdPoint& p, const SpdPoint& q) {
  return 2.0 * relative_log_singular_values(p, q).norm();
}

inline double distance_to_identity(const SpdPoint& p) { return p.log_eigenvalues().norm(); }

// g . p = g p g^t, renormalized to det 1.
inline SpdPoint act(const Matrix& g, const SpdPoint& p) {
  if (g.rows() != p.dim() || g.cols() != p.dim()) throw PreconditionError("act: dimension mismatch");
  auto svd = graded_svd(g * p.frame(), 0.5 * p.log_eigenvalues());
  return SpdPoint::from_eigen(svd.u, 2.0 * svd.log_sigma);
}

// Point at parameter t of the geodesic from p (t = 0) to q (t = 1); t outside
// [0, 1] extends the geodesic.
inline SpdPoint geodesic(const SpdPoint& p, const SpdPoint& q, double t) {
  detail::same_dim(p, q);
  Matrix o = detail::relative_frame(p, q);
  const Vector& lp = p.log_eigenvalues();
  const Vector& lq = q.log_eigenvalues();
  if (auto pi = detail::snap_permutation(o)) {
    Vector l(p.dim());
    for (int i = 0; i < p.dim(); ++i) l(i) = (1.0 - t) * lp(i) + t * lq(pi->at(i));
    return SpdPoint::from_eigen(p.frame(), l);
  }
  // in the frame of p: p^{-1/2} q p^{-1/2} = m m^t with m = e^{-lp/2} o e^{lq/2}
  auto m = two_sided_svd(-0.5 * lp, o, 0.5 * lq);
  auto r = two_sided_svd(0.5 * lp, m.u, t * m.log_sigma);
  return SpdPoint::from_eigen(p.frame() * r.u, 2.0 * r.log_sigma);
}

inline SpdPoint midpoint(const SpdPoint& p, const SpdPoint& q) { return geodesic(p, q, 0.5); }

// Unit-speed geodesic ray gamma(t) = b^{1/2} exp(t X) b^{1/2} with X symmetric,
// traceless and of unit Frobenius norm.
class GeodesicRay {
 public:
  GeodesicRay(SpdPoint base, const Matrix& direction) : base_(std::move(base)), direction_(direction) {
    const int n = base_.dim();
    if (direction.rows() != n || direction.cols() != n) throw PreconditionError("GeodesicRay: shape mismatch");
    if ((direction - direction.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw PreconditionError("GeodesicRay: direction must be symmetric");
    if (std::abs(direction.trace()) > 1e-12) throw PreconditionError("GeodesicRay: direction must be traceless");
    if (std::abs(direction.norm() - 1.0) > 1e-12) throw PreconditionError("GeodesicRay: direction must have unit norm");
    auto es = sym_eigen(direction);
    frame_ = es.vectors;
    mu_ = es.values;
    at_identity_ = base_.log_eigenvalues().cwiseAbs().maxCoeff() == 0.0;
  }

  // Ray from I with direction frame * diag(unit_mu) * frame^T.
  static GeodesicRay from_eigen(const Matrix& frame, const Vector& unit_mu) {
    GeodesicRay r(SpdPoint::identity(static_cast<int>(unit_mu.size())),
                  frame * unit_mu.asDiagonal() * frame.transpose(), frame, unit_mu);
    return r;
  }

  // gamma(t) = k exp(t alpha) . e under g . e = g g^t, with speed fixed to one:
  // the generator in P_n is k alpha k^t / |alpha|.
  static GeodesicRay from_kak(const Matrix& k, const Vector& alpha) {
    const double nrm = alpha.norm();
    if (nrm == 0) throw PreconditionError("from_kak: alpha must be nonzero");
    return from_eigen(k, alpha / nrm);
  }

  const SpdPoint& base() const { return base_; }
  const Matrix& direction() const { return direction_; }

  SpdPoint at(double t) const {
    SpdPoint e = SpdPoint::from_eigen(frame_, t * mu_);
    if (at_identity_) return e;
    // b^{1/2} e b^{1/2} = m m^t with m = f_b e^{lb/2} (f_b^t f) e^{t mu/2}, kept in log form
    auto r = two_sided_svd(0.5 * base_.log_eigenvalues(), base_.frame().transpose() * frame_, 0.5 * t * mu_);
    return SpdPoint::from_eigen(base_.frame() * r.u, 2.0 * r.log_sigma);
  }

 private:
  GeodesicRay(SpdPoint base, const Matrix& direction, const Matrix& frame, const Vector& mu)
      : base_(std::move(base)), direction_(direction), frame_(frame), mu_(mu), at_identity_(true) {}

  SpdPoint base_;
  Matrix direction_;
  Matrix frame_;
  Vector mu_;
  bool at_identity_ = true;
};

// ---- Cartan and KAK data

inline Vector cartan_projection(const Matrix& g) {
  if (g.rows() != g.cols()) throw PreconditionError("cartan_projection: matrix must be square");
  Eigen::JacobiSVD<Matrix> svd(g);
  Vector s = svd.singularValues();
  if (!(s(s.size() - 1) > 0)) throw PreconditionError("cartan_projection: singular matrix");
  Vector l = s.array().log();
  l.array() -= l.mean();
  return l;
}

struct Kak {
  Matrix k1;
  Vector a;  // descending, positive
  Matrix k2;
  Matrix reconstruct() const { return k1 * a.asDiagonal() * k2; }
};

inline Kak kak_decompose(const Matrix& g) {
  if (g.rows() != g.cols()) throw PreconditionError("kak_decompose: matrix must be square");
  Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vector s = svd.singularValues();
  if (!(s(s.size() - 1) > 0)) throw PreconditionError("kak_decompose: singular matrix");
  return Kak{svd.matrixU(), s, svd.matrixV().transpose()};
}

// K(x, y) = -1/2 ||[x, y]||_F^2 after Frobenius orthonormalization of (x, y).
inline double sectional_curvature(const Matrix& x, const Matrix& y) {
  if (x.rows() != x.cols() || y.rows() != x.rows() || y.cols() != x.cols())
    throw PreconditionError("sectional_curvature: shape mismatch");
  for (const Matrix* m : {&x, &y}) {
    if ((*m - m->transpose()).cwiseAbs().maxCoeff() > 1e-12) throw PreconditionError("sectional_curvature: inputs must be symmetric");
    if (std::abs(m->trace()) > 1e-12 * std::max(1.0, m->norm())) throw PreconditionError("sectional_curvature: inputs must be traceless");
  }
  const double nx = x.norm();
  if (nx < 1e-12) throw PreconditionError("sectional_curvature: inputs are linearly dependent");
  Matrix u = x / nx;
  Matrix w = y - (u.cwiseProduct(y).sum()) * u;
  const double nw = w.norm();
  if (nw < 1e-12 * std::max(1.0, y.norm())) throw PreconditionError("sectional_curvature: inputs are linearly dependent");
  w /= nw;
  Matrix c = u * w - w * u;
  return -0.5 * c.squaredNorm();
}

// ---- horospherical coordinates and Busemann functions

struct BusemannData {
  Vector alpha;                // diagonal of a traceless matrix, weakly decreasing
  std::vector<int> partition;  // block sizes from equal entries of alpha
};

inline BusemannData make_busemann(const Vector& alpha) {
  if (alpha.size() == 0) throw PreconditionError("BusemannData: empty alpha");
  for (int i = 1; i < alpha.size(); ++i)
    if (alpha(i) > alpha(i - 1) + 1e-12) throw PreconditionError("BusemannData: alpha must be weakly decreasing");
  if (std::abs(alpha.sum()) > 1e-10) throw PreconditionError("BusemannData: alpha must be traceless");
  BusemannData b{alpha, {}};
  int run = 1;
  for (int i = 1; i <= alpha.size(); ++i) {
    if (i < alpha.size() && std::abs(alpha(i) - alpha(i - 1)) <= 1e-12) {
      ++run;
    } else {
      b.partition.push_back(run);
      run = 1;
    }
  }
  return b;
}

struct NAlpha {
  Matrix n;  // block upper unipotent
  Matrix f;  // block diagonal SPD
};

// p = n f n^t by block Schur complements taken from the trailing block.
inline NAlpha nalpha_decompose(const Matrix& p, const std::vector<int>& partition) {
  const int dim = static_cast<int>(p.rows());
  if (std::accumulate(partition.begin(), partition.end(), 0) != dim)
    throw PreconditionError("nalpha_decompose: partition does not match the dimension");
  std::vector<int> start;
  int acc = 0;
  for (int s : partition) {
    start.push_back(acc);
    acc += s;
  }
  Matrix rest = 0.5 * (p + p.transpose());
  NAlpha out{Matrix::Identity(dim, dim), Matrix::Zero(dim, dim)};
  for (int b = static_cast<int>(partition.size()) - 1; b >= 0; --b) {
    const int s0 = start[b];
    const int sz = partition[b];
    Matrix fb = rest.block(s0, s0, sz, sz);
    out.f.block(s0, s0, sz, sz) = fb;
    if (s0 == 0) break;
    Eigen::LLT<Matrix> llt(fb);
    if (llt.info() != Eigen::Success) throw DomainError("nalpha_decompose: input is not positive definite");
    Matrix coupling = rest.block(0, s0, s0, sz);
    Matrix nb = llt.solve(coupling.transpose()).transpose();
    out.n.block(0, s0, s0, sz) = nb;
    rest.topLeftCorner(s0, s0) -= nb * coupling.transpose();
  }
  return out;
}

inline NAlpha nalpha_decompose(const SpdPoint& p, const BusemannData& b) {
  return nalpha_decompose(p.matrix(), b.partition);
}

inline double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw DomainError("log_det_spd: matrix is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// h(n f) = -tr(alpha log f)
inline double busemann_value(const BusemannData& b, const Matrix& p) {
  if (std::abs(b.alpha.norm() - 1.0) > 1e-10) throw PreconditionError("busemann_value: alpha must have unit norm");
  auto nf = nalpha_decompose(p, b.partition);
  double h = 0;
  int s0 = 0;
  for (int sz : b.partition) {
    h -= b.alpha(s0) * log_det_spd(nf.f.block(s0, s0, sz, sz));
    s0 += sz;
  }
  return h;
}

inline double busemann_value(const BusemannData& b, const SpdPoint& p) { return busemann_value(b, p.matrix()); }

struct BusemannLimit {
  double value = 0.0;         // d(exp(t_max alpha), p) - t_max
  double increment = 0.0;     // change over the last doubling of t
  double extrapolated = 0.0;  // Richardson limit from t_max, t_max/2, t_max/4 assuming a c/t tail
};

inline BusemannLimit busemann_limit_oracle(const BusemannData& b, const SpdPoint& p, double t_max) {
  if (std::abs(b.alpha.norm() - 1.0) > 1e-10) throw PreconditionError("busemann_limit_oracle: alpha must have unit norm");
  if (t_max < 10.0 * distance_to_identity(p)) throw PreconditionError("busemann_limit_oracle: need t_max >= 10 d(I, p)");
  const int n = p.dim();
  auto h = [&](double t) {
    SpdPoint g = SpdPoint::from_eigen(Matrix::Identity(n, n), t * b.alpha);
    return spd_distance(g, p) - t;
  };
  const double h1 = h(t_max), h2 = h(0.5 * t_max), h4 = h(0.25 * t_max);
  const double r1 = 2.0 * h1 - h2, r2 = 2.0 * h2 - h4;
  return {h1, std::abs(h1 - h2), (4.0 * r1 - r2) / 3.0};
}

// ---- pullback metrics and regularity

// G_n = (T^n)^t T^n for n = 1..N, from the stable product.
inline std::vector<SpdPoint> pullback_metric_sequence(const MatrixCocycle& c, const State& omega, long n) {
  if (n < 1) throw PreconditionError("pullback_metric_sequence: N must be at least 1");
  std::vector<SpdPoint> out;
  out.reserve(static_cast<std::size_t>(n));
  ProductAccumulator acc(c.dim());
  State s = omega;
  for (long k = 0; k < n; ++k) {
    acc.push(c(s));
    s = c.base().step(s);
    auto svd = acc.singular();
    out.push_back(SpdPoint::from_eigen(svd.u, 2.0 * svd.log_sigma));
  }
  return out;
}

struct RegularityRow {
  long n = 0;
  double step_ratio = std::numeric_limits<double>::quiet_NaN();  // d(x_n, x_{n+1}) / n
  double cartan_oscillation = 0.0;                                // ||R(x_n)/n - R(x_N)/N||
  double tracking_error = 0.0;                                    // d(x_n, gamma(theta n)) / n
};

struct RegularityReport {
  long horizon = 0;
  double theta = 0.0;
  bool degenerate = false;  // d(x_N, I) = 0: the sequence is o(n)
  Matrix ray_frame;
  Vector ray_direction;  // unit Cartan direction of log x_N
  std::vector<RegularityRow> rows;

  const RegularityRow& at(long n) const {
    for (const auto& r : rows)
      if (r.n == n) return r;
    throw PreconditionError("regularity report has no row for n=" + std::to_string(n));
  }
};

// points[n-1] = x_n for n = 1..N, basepoint I. Rows at dyadic n and at the
// requested probe indices.
inline RegularityReport regularity_report(const std::vector<SpdPoint>& points,
                                          const std::vector<long>& probe_indices = {}) {
  const long big_n = static_cast<long>(points.size());
  if (big_n < 10) throw PreconditionError("regularity_report: need N >= 10");
  RegularityReport rep;
  rep.horizon = big_n;
  const SpdPoint& last = points.back();
  const double radius = distance_to_identity(last);
  rep.theta = radius / static_cast<double>(big_n);
  rep.ray_frame = last.frame();
  rep.degenerate = radius < 1e-12;
  rep.ray_direction = rep.degenerate ? Vector::Zero(last.dim()) : Vector(last.log_eigenvalues() / radius);
  const Vector terminal_slope = last.cartan() / static_cast<double>(big_n);
  std::vector<long> idx = dyadic_indices(big_n);
  for (long p : probe_indices)
    if (p >= 1 && p <= big_n) idx.push_back(p);
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  for (long n : idx) {
    RegularityRow row;
    row.n = n;
    const SpdPoint& x = points[static_cast<std::size_t>(n - 1)];
    const double dn = static_cast<double>(n);
    if (n < big_n) row.step_ratio = spd_distance(x, points[static_cast<std::size_t>(n)]) / dn;
    row.cartan_oscillation = (x.cartan() / dn - terminal_slope).norm();
    if (rep.degenerate) {
      row.tracking_error = distance_to_identity(x) / dn;
    } else {
      SpdPoint g = SpdPoint::from_eigen(rep.ray_frame, rep.theta * dn * rep.ray_direction);
      row.tracking_error = spd_distance(x, g) / dn;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace met
