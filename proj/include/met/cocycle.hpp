#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "met/dynsys.hpp"
#include "met/error.hpp"
#include "met/linalg.hpp"
#include "met/random.hpp"

namespace met {

enum class StructureKind { none, symplectic, orthogonal, determinant_one };

struct StructureTag {
  StructureKind kind = StructureKind::none;
  int p = 0;  // orthogonal(p, q); symplectic genus in p
  int q = 0;

  static StructureTag none() { return {}; }
  static StructureTag symplectic(int g) { return {StructureKind::symplectic, g, 0}; }
  static StructureTag orthogonal(int p, int q) { return {StructureKind::orthogonal, p, q}; }
  static StructureTag determinant_one() { return {StructureKind::determinant_one, 0, 0}; }
};

inline Matrix indefinite_form(int p, int q) {
  Matrix f = Matrix::Identity(p + q, p + q);
  f.bottomRightCorner(q, q) *= -1.0;
  return f;
}

class MatrixCocycle {
 public:
  using Generator = std::function<Matrix(const State&)>;

  MatrixCocycle(ErgodicSystem base, int dim, Generator gen, StructureTag tag = {})
      : base_(std::move(base)), dim_(dim), gen_(std::move(gen)), tag_(tag) {
    if (dim_ < 1) throw PreconditionError("cocycle dimension must be at least 1");
    if (tag_.kind == StructureKind::symplectic && dim_ != 2 * tag_.p)
      throw PreconditionError("symplectic tag needs d = 2g");
    if (tag_.kind == StructureKind::orthogonal && dim_ != tag_.p + tag_.q)
      throw PreconditionError("orthogonal(p,q) tag needs d = p + q");
  }

  static MatrixCocycle constant(ErgodicSystem base, Matrix a, StructureTag tag = {}) {
    if (a.rows() != a.cols()) throw PreconditionError("generator must be square");
    const int d = static_cast<int>(a.rows());
    MatrixCocycle c(std::move(base), d, [a](const State&) { return a; }, tag);
    c.check(a, "constant generator");
    return c;
  }

  // Generator chosen by the symbol of a shift state.
  static MatrixCocycle symbolic(ErgodicSystem base, std::vector<Matrix> mats, StructureTag tag = {}) {
    if (mats.empty()) throw PreconditionError("symbolic cocycle needs at least one matrix");
    if (static_cast<int>(mats.size()) < base.symbol_count())
      throw PreconditionError("symbolic cocycle needs one matrix per symbol");
    const int d = static_cast<int>(mats[0].rows());
    for (const auto& m : mats)
      if (m.rows() != d || m.cols() != d) throw PreconditionError("symbolic cocycle: matrices differ in shape");
    MatrixCocycle c(std::move(base), d,
                    [mats](const State& s) { return mats[static_cast<std::size_t>(s.symbol)]; }, tag);
    for (std::size_t i = 0; i < mats.size(); ++i) c.check(mats[i], "matrix " + std::to_string(i));
    return c;
  }

  const ErgodicSystem& base() const { return base_; }
  int dim() const { return dim_; }
  StructureTag tag() const { return tag_; }
  const Generator& generator() const { return gen_; }

  Matrix operator()(const State& s) const { return gen_(s); }

  // Generator value with invertibility and structure checks.
  Matrix checked(const State& s) const {
    Matrix a = gen_(s);
    check(a, "generator at time " + std::to_string(s.time));
    return a;
  }

  void check(const Matrix& a, const std::string& where) const {
    if (a.rows() != dim_ || a.cols() != dim_) throw PreconditionError(where + ": wrong shape");
    const double det = a.determinant();
    if (!(std::abs(det) >= 1e-300)) throw NumericalError(where + ": numerically singular (det " + std::to_string(det) + ")");
    const double scale = std::max(1.0, a.squaredNorm());
    switch (tag_.kind) {
      case StructureKind::none: break;
      case StructureKind::symplectic: {
        Matrix j = standard_symplectic_form(tag_.p);
        if ((a.transpose() * j * a - j).cwiseAbs().maxCoeff() > 1e-10 * scale)
          throw PreconditionError(where + ": not symplectic");
        break;
      }
      case StructureKind::orthogonal: {
        Matrix f = indefinite_form(tag_.p, tag_.q);
        if ((a.transpose() * f * a - f).cwiseAbs().maxCoeff() > 1e-10 * scale)
          throw PreconditionError(where + ": does not preserve diag(I_p, -I_q)");
        break;
      }
      case StructureKind::determinant_one:
        if (std::abs(std::abs(det) - 1.0) > 1e-10) throw PreconditionError(where + ": determinant is not one");
        break;
    }
  }

 private:
  ErgodicSystem base_;
  int dim_;
  Generator gen_;
  StructureTag tag_;
};

// Running product T = q * diag(exp(log_diag)) * v, updated by T <- A T.
// Each step is a column-pivoted Householder QR of A q diag(exp(log_diag)) done
// in log scale; v stays bounded because the pivot order follows the scales.
class ProductAccumulator {
 public:
  explicit ProductAccumulator(int d)
      : q_(Matrix::Identity(d, d)), log_diag_(Vector::Zero(d)), v_(Matrix::Identity(d, d)) {}

  void push(const Matrix& a) {
    const int d = static_cast<int>(q_.rows());
    Matrix r = a * q_;
    std::vector<int> perm(d);
    for (int i = 0; i < d; ++i) perm[i] = i;
    Matrix qacc = Matrix::Identity(d, d);
    Vector work(d);
    for (int k = 0; k < d; ++k) {
      int best = k;
      double best_score = kNegInf;
      for (int j = k; j < d; ++j) {
        const double nrm = r.col(j).tail(d - k).norm();
        const double score = nrm > 0 ? std::log(nrm) + log_diag_(perm[j]) : kNegInf;
        // ties keep the natural order
        const double margin = best_score == kNegInf ? 0.0 : 1e-12 * (1.0 + std::abs(best_score));
        if (j == k || score > best_score + margin) {
          best = j;
          best_score = score;
        }
      }
      if (best != k) {
        r.col(k).swap(r.col(best));
        std::swap(perm[k], perm[best]);
      }
      const int len = d - k;
      Vector x = r.col(k).tail(len);
      Vector ess(std::max(len - 1, 0));
      double tau = 0, beta = 0;
      if (len > 1) {
        x.makeHouseholder(ess, tau, beta);
        r.bottomRightCorner(len, len).applyHouseholderOnTheLeft(ess, tau, work.data());
        qacc.rightCols(len).applyHouseholderOnTheRight(ess, tau, work.data());
        r.col(k).tail(len - 1).setZero();
        r(k, k) = beta;
      }
    }
    Vector new_log(d);
    for (int i = 0; i < d; ++i) {
      if (r(i, i) == 0.0 || !std::isfinite(r(i, i)))
        throw NumericalError("product: numerically singular factor at step " + std::to_string(steps_));
      if (r(i, i) < 0) {
        r.row(i) *= -1.0;
        qacc.col(i) *= -1.0;
      }
      new_log(i) = std::log(r(i, i)) + log_diag_(perm[i]);
    }
    Matrix w = Matrix::Identity(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        const double rij = r(i, j);
        if (rij == 0.0) continue;
        w(i, j) = (rij < 0 ? -1.0 : 1.0) * std::exp(std::log(std::abs(rij)) + log_diag_(perm[j]) - new_log(i));
      }
    Matrix permuted(d, d);
    for (int i = 0; i < d; ++i) permuted.row(i) = v_.row(perm[i]);
    v_ = w * permuted;
    q_ = qacc;
    log_diag_ = new_log;
    ++steps_;
  }

  const Matrix& q() const { return q_; }
  const Vector& log_diag() const { return log_diag_; }
  const Matrix& v() const { return v_; }
  long steps() const { return steps_; }

  Matrix reconstruct() const { return q_ * log_diag_.array().exp().matrix().asDiagonal() * v_; }

  // Singular data of T: T = (q * svd.v) * diag(exp(log_sigma)) * svd.u^T, so the
  // columns of svd.u are right singular vectors of T.
  GradedSvd singular() const { return graded_svd(v_.transpose(), log_diag_); }

 private:
  Matrix q_;
  Vector log_diag_;
  Matrix v_;
  long steps_ = 0;
};

// T^N_omega = A(T^{N-1} omega) ... A(omega) = q * diag(exp(log_diag)) * r.
// r is bounded but not triangular: it absorbs the pivot permutations.
struct CocycleProduct {
  State omega;
  long steps = 0;
  Matrix q;
  Matrix r;
  Vector log_diag;
  State end;  // T^N omega

  Matrix reconstruct() const { return q * log_diag.array().exp().matrix().asDiagonal() * r; }
};

inline CocycleProduct product(const MatrixCocycle& c, const State& omega, long n) {
  if (n < 1) throw PreconditionError("product: N must be at least 1");
  ProductAccumulator acc(c.dim());
  State s = omega;
  for (long k = 0; k < n; ++k) {
    Matrix a = c(s);
    const double det = a.determinant();
    if (!(std::abs(det) >= 1e-300))
      throw NumericalError("product: numerically singular generator at step " + std::to_string(k));
    acc.push(a);
    s = c.base().step(s);
  }
  return CocycleProduct{omega, n, acc.q(), acc.v(), acc.log_diag(), s};
}

// Direct multiplication; test oracle for short horizons.
inline Matrix dense_product(const MatrixCocycle& c, const State& omega, long n) {
  Matrix t = Matrix::Identity(c.dim(), c.dim());
  State s = omega;
  for (long k = 0; k < n; ++k) {
    t = c(s) * t;
    s = c.base().step(s);
  }
  return t;
}

struct IntegrabilityReport {
  double forward = 0.0;  // mean of log+ ||A||
  double forward_stderr = 0.0;
  double inverse = 0.0;  // mean of log+ ||A^{-1}||
  double inverse_stderr = 0.0;
  long samples = 0;
};

inline IntegrabilityReport integrability_check(const MatrixCocycle& c, long samples) {
  if (samples < 1) throw PreconditionError("integrability_check: samples must be at least 1");
  double sf = 0, sf2 = 0, si = 0, si2 = 0;
  for (long k = 0; k < samples; ++k) {
    Matrix a = c.checked(c.base().sample(static_cast<std::uint64_t>(k)));
    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& sv = svd.singularValues();
    const double f = std::max(0.0, std::log(sv(0)));
    const double i = std::max(0.0, -std::log(sv(sv.size() - 1)));
    sf += f;
    sf2 += f * f;
    si += i;
    si2 += i * i;
  }
  const double n = static_cast<double>(samples);
  IntegrabilityReport r;
  r.samples = samples;
  r.forward = sf / n;
  r.inverse = si / n;
  if (samples > 1) {
    r.forward_stderr = std::sqrt(std::max(0.0, (sf2 - n * r.forward * r.forward) / (n - 1)) / n);
    r.inverse_stderr = std::sqrt(std::max(0.0, (si2 - n * r.inverse * r.inverse) / (n - 1)) / n);
  }
  return r;
}

// ---- functorial constructions

struct Dual {};
struct Tensor {
  MatrixCocycle other;
};
struct Hom {
  MatrixCocycle other;
};
struct Wedge {
  int k;
};
using Functor = std::variant<Dual, Tensor, Hom, Wedge>;

inline Matrix inverse_transpose(const Matrix& a) { return a.partialPivLu().inverse().transpose(); }

inline MatrixCocycle construct_functorial(const MatrixCocycle& c, const Functor& kind) {
  return std::visit(
      [&](const auto& f) -> MatrixCocycle {
        using F = std::decay_t<decltype(f)>;
        auto gen = c.generator();
        if constexpr (std::is_same_v<F, Dual>) {
          // the dual of a symplectic or orthogonal(p,q) matrix preserves the same form
          return MatrixCocycle(c.base(), c.dim(), [gen](const State& s) { return inverse_transpose(gen(s)); },
                               c.tag());
        } else if constexpr (std::is_same_v<F, Tensor> || std::is_same_v<F, Hom>) {
          if (!(f.other.base() == c.base()))
            throw PreconditionError("tensor/hom: cocycles live over different base systems");
          auto g2 = f.other.generator();
          const int d = c.dim() * f.other.dim();
          if constexpr (std::is_same_v<F, Tensor>)
            return MatrixCocycle(c.base(), d, [gen, g2](const State& s) { return kron(gen(s), g2(s)); });
          else
            return MatrixCocycle(c.base(), d,
                                 [gen, g2](const State& s) { return kron(inverse_transpose(gen(s)), g2(s)); });
        } else {
          if (f.k < 1 || f.k > c.dim()) throw PreconditionError("wedge: need 1 <= k <= d");
          const int k = f.k;
          const int d = static_cast<int>(subsets(c.dim(), k).size());
          return MatrixCocycle(c.base(), d, [gen, k](const State& s) { return compound_matrix(gen(s), k); });
        }
      },
      kind);
}

inline MatrixCocycle determinant_line(const MatrixCocycle& c) {
  auto gen = c.generator();
  return MatrixCocycle(c.base(), 1, [gen](const State& s) {
    Matrix m(1, 1);
    m(0, 0) = gen(s).determinant();
    return m;
  });
}

}  // namespace met
