#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "met/error.hpp"

namespace met {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// X = u * diag(exp(log_sigma)) * v^T with log_sigma descending.
struct GradedSvd {
  Matrix u;
  Vector log_sigma;
  Matrix v;
};

namespace detail {

inline double sgn(double x) { return x < 0 ? -1.0 : 1.0; }

}  // namespace detail

// One-sided Jacobi SVD of B * diag(exp(log_col_scale)). The column scales never
// enter the arithmetic as numbers, only through their differences, so products
// whose singular values span thousands of orders of magnitude are handled.
// Rotation parameters are formed from u = exp(-|delta|), which keeps the small
// coupling terms relatively accurate and makes the result independent of delta
// once u underflows.
inline GradedSvd graded_svd(const Matrix& b, const Vector& log_col_scale,
                            int max_sweeps = 100, double tol = 1e-15) {
  const int m = static_cast<int>(b.rows());
  const int n = static_cast<int>(b.cols());
  Matrix w = b;
  Vector s(n);
  for (int j = 0; j < n; ++j) {
    const double nrm = w.col(j).norm();
    if (nrm > 0) {
      w.col(j) /= nrm;
      s(j) = log_col_scale(j) + std::log(nrm);
    } else {
      s(j) = kNegInf;
    }
  }
  Matrix v = Matrix::Identity(n, n);
  Eigen::VectorXd yi(m), yj(m);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int i = 0; i < n - 1; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (s(i) == kNegInf || s(j) == kNegInf) continue;
        const double c = w.col(i).dot(w.col(j));
        if (std::abs(c) <= tol) continue;
        rotated = true;
        const double delta = s(i) - s(j);
        const double u = std::exp(-std::abs(delta));
        const double a = -std::expm1(-2.0 * std::abs(delta));
        const double denom = a + std::sqrt(a * a + 4.0 * u * u * c * c);
        const double t_abs = 2.0 * u * std::abs(c) / denom;
        const double big = 2.0 * std::abs(c) / denom;  // |t| * exp(|delta|)
        const double small = t_abs * u;                 // |t| * exp(-|delta|)
        const double sign = delta == 0.0 ? 1.0 : -detail::sgn(delta) * detail::sgn(c);
        const double cs = 1.0 / std::sqrt(1.0 + t_abs * t_abs);
        const double sn = sign * cs * t_abs;
        // coefficient of w_j in the new i column, of w_i in the new j column
        const double ci = sign * cs * (delta >= 0 ? small : big);
        const double cj = sign * cs * (delta >= 0 ? big : small);
        yi = cs * w.col(i) - ci * w.col(j);
        yj = cj * w.col(i) + cs * w.col(j);
        const double ni = yi.norm();
        const double nj = yj.norm();
        if (ni > 0) {
          w.col(i) = yi / ni;
          s(i) += std::log(ni);
        } else {
          s(i) = kNegInf;
        }
        if (nj > 0) {
          w.col(j) = yj / nj;
          s(j) += std::log(nj);
        } else {
          s(j) = kNegInf;
        }
        for (int k = 0; k < n; ++k) {
          const double vi = v(k, i);
          const double vj = v(k, j);
          v(k, i) = cs * vi - sn * vj;
          v(k, j) = sn * vi + cs * vj;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return s(x) > s(y); });
  GradedSvd out{Matrix(m, n), Vector(n), Matrix(n, n)};
  for (int k = 0; k < n; ++k) {
    out.u.col(k) = w.col(order[k]);
    out.log_sigma(k) = s(order[k]);
    out.v.col(k) = v.col(order[k]);
  }
  return out;
}

// SVD of diag(exp(a)) * o * diag(exp(b)). Row scales are shifted by their
// maximum so that only the relative spread enters the entries.
inline GradedSvd two_sided_svd(const Vector& a, const Matrix& o, const Vector& b) {
  const double top = a.maxCoeff();
  Matrix scaled = (a.array() - top).exp().matrix().asDiagonal() * o;
  Vector cols = b.array() + top;
  return graded_svd(scaled, cols);
}

inline std::vector<std::vector<int>> subsets(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(k);
  std::iota(cur.begin(), cur.end(), 0);
  if (k == 0) return {{}};
  while (true) {
    out.push_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[i] == n - k + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

inline double minor_of(const Matrix& m, const std::vector<int>& rows,
                       const std::vector<int>& cols) {
  const int k = static_cast<int>(rows.size());
  Matrix sub(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) sub(i, j) = m(rows[i], cols[j]);
  if (k == 1) return sub(0, 0);
  if (k == 2) return sub(0, 0) * sub(1, 1) - sub(0, 1) * sub(1, 0);
  return sub.partialPivLu().determinant();
}

// k-th compound matrix; rows and columns indexed by k-subsets in lexicographic order.
inline Matrix compound_matrix(const Matrix& m, int k) {
  const int n = static_cast<int>(m.rows());
  if (k < 1 || k > n) throw PreconditionError("compound_matrix: need 1 <= k <= n");
  auto sets = subsets(n, k);
  const int c = static_cast<int>(sets.size());
  Matrix out(c, c);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j) out(i, j) = minor_of(m, sets[i], sets[j]);
  return out;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Log singular values of diag(exp(a)) * o * diag(exp(b)) from the norms of its
// exterior powers: log sigma_k = log||L^k M|| - log||L^{k-1} M||.
inline Vector wedge_log_singular_values(const Vector& a, const Matrix& o, const Vector& b) {
  const int n = static_cast<int>(o.rows());
  Vector w(n + 1);
  w(0) = 0.0;
  for (int k = 1; k <= n; ++k) {
    auto sets = subsets(n, k);
    const int c = static_cast<int>(sets.size());
    Matrix logs(c, c);
    Matrix signs(c, c);
    double shift = kNegInf;
    for (int i = 0; i < c; ++i) {
      double ai = 0;
      for (int r : sets[i]) ai += a(r);
      for (int j = 0; j < c; ++j) {
        double bj = 0;
        for (int r : sets[j]) bj += b(r);
        const double mnr = minor_of(o, sets[i], sets[j]);
        logs(i, j) = mnr == 0.0 ? kNegInf : std::log(std::abs(mnr)) + ai + bj;
        signs(i, j) = detail::sgn(mnr);
        shift = std::max(shift, logs(i, j));
      }
    }
    if (shift == kNegInf) {
      w(k) = kNegInf;
      continue;
    }
    Matrix scaled(c, c);
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < c; ++j)
        scaled(i, j) = logs(i, j) == kNegInf ? 0.0 : signs(i, j) * std::exp(logs(i, j) - shift);
    double top;
    if (c == 1) {
      top = std::abs(scaled(0, 0));
    } else {
      Eigen::JacobiSVD<Matrix> svd(scaled);
      top = svd.singularValues()(0);
    }
    w(k) = shift + std::log(top);
  }
  Vector out(n);
  for (int k = 0; k < n; ++k) out(k) = w(k + 1) - w(k);
  return out;
}

// Symmetric eigen-decomposition with eigenvalues sorted descending. Diagonal
// input returns an exact permutation frame.
struct SymEigen {
  Matrix vectors;
  Vector values;
};

inline SymEigen sym_eigen(const Matrix& s) {
  const int n = static_cast<int>(s.rows());
  bool diagonal = true;
  for (int i = 0; i < n && diagonal; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && s(i, j) != 0.0) {
        diagonal = false;
        break;
      }
  Vector vals(n);
  Matrix vecs;
  if (diagonal) {
    vals = s.diagonal();
    vecs = Matrix::Identity(n, n);
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
    if (es.info() != Eigen::Success) throw NumericalError("sym_eigen: eigen-decomposition failed");
    vals = es.eigenvalues();
    vecs = es.eigenvectors();
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return vals(x) > vals(y); });
  SymEigen out{Matrix(n, n), Vector(n)};
  for (int k = 0; k < n; ++k) {
    out.values(k) = vals(order[k]);
    out.vectors.col(k) = vecs.col(order[k]);
  }
  return out;
}

inline Matrix orthonormal_basis(const Matrix& m, double rank_tol = 1e-12) {
  if (m.cols() == 0) return Matrix(m.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int r = 0;
  while (r < sv.size() && sv(r) > rank_tol * std::max(1.0, sv(0))) ++r;
  return svd.matrixU().leftCols(r);
}

// Principal angles (ascending) between the column spans of a and b.
inline Vector principal_angles(const Matrix& a, const Matrix& b) {
  Matrix qa = orthonormal_basis(a);
  Matrix qb = orthonormal_basis(b);
  if (qa.cols() == 0 || qb.cols() == 0) return Vector(0);
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  Vector cosines = svd.singularValues();
  Vector out(cosines.size());
  for (int i = 0; i < cosines.size(); ++i)
    out(i) = std::acos(std::clamp(cosines(i), -1.0, 1.0));
  return out;
}

// Largest angle between span(a) and its best match inside span(b); zero when
// span(a) is contained in span(b).
inline double containment_angle(const Matrix& a, const Matrix& b) {
  Vector ang = principal_angles(a, b);
  if (ang.size() == 0) return 0.0;
  return ang.head(std::min<Eigen::Index>(ang.size(), orthonormal_basis(a).cols())).maxCoeff();
}

// Orthonormal basis of the dim-dimensional subspace of span(a) closest to span(b),
// plus the principal angles used to choose it.
inline std::pair<Matrix, Vector> approximate_intersection(const Matrix& a, const Matrix& b,
                                                          int dim) {
  Matrix qa = orthonormal_basis(a);
  Matrix qb = orthonormal_basis(b);
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb, Eigen::ComputeFullU);
  Vector cosines = svd.singularValues();
  Vector angles(cosines.size());
  for (int i = 0; i < cosines.size(); ++i) angles(i) = std::acos(std::clamp(cosines(i), -1.0, 1.0));
  return {qa * svd.matrixU().leftCols(dim), angles};
}

// log |sum_i sign_i * exp(log_i)| and its sign.
inline std::pair<double, double> signed_log_sum(const std::vector<double>& logs,
                                                const std::vector<double>& signs) {
  double top = kNegInf;
  for (double l : logs) top = std::max(top, l);
  if (top == kNegInf) return {kNegInf, 1.0};
  double acc = 0;
  for (std::size_t i = 0; i < logs.size(); ++i)
    if (logs[i] != kNegInf) acc += signs[i] * std::exp(logs[i] - top);
  if (acc == 0.0) return {kNegInf, 1.0};
  return {top + std::log(std::abs(acc)), detail::sgn(acc)};
}

inline double op_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace met
