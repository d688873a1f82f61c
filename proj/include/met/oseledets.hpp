#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "met/cocycle.hpp"
#include "met/dynsys.hpp"
#include "met/error.hpp"
#include "met/linalg.hpp"

namespace met {

enum class SpectrumMethod { qr, svd_wedge };

struct ExponentGroup {
  double value = 0.0;
  int multiplicity = 0;
};

struct LyapunovSpectrum {
  Vector exponents;  // descending, repeated by multiplicity
  double gap_threshold = 0.0;
  std::vector<ExponentGroup> groups;
  long horizon = 0;
  SpectrumMethod method = SpectrumMethod::qr;
  bool low_confidence = false;
  bool diverged_below = false;  // some exponent below -1e6 / N
};

inline double default_gap_threshold(long n) { return std::max(10.0 / static_cast<double>(n), 1e-3); }

inline std::vector<ExponentGroup> group_exponents(const Vector& e, double threshold) {
  std::vector<ExponentGroup> out;
  int start = 0;
  for (int i = 1; i <= e.size(); ++i) {
    if (i == e.size() || e(i - 1) - e(i) >= threshold) {
      const int m = i - start;
      out.push_back({e.segment(start, m).mean(), m});
      start = i;
    }
  }
  return out;
}

inline LyapunovSpectrum make_spectrum(Vector exps, long n, SpectrumMethod method, double threshold = -1) {
  std::sort(exps.data(), exps.data() + exps.size(), std::greater<>());
  LyapunovSpectrum s;
  s.exponents = exps;
  s.horizon = n;
  s.method = method;
  s.gap_threshold = threshold > 0 ? threshold : default_gap_threshold(n);
  s.groups = group_exponents(exps, s.gap_threshold);
  for (std::size_t g = 1; g < s.groups.size(); ++g)
    if (s.groups[g - 1].value - s.groups[g].value < 2.0 * s.gap_threshold) s.low_confidence = true;
  for (int i = 0; i < exps.size(); ++i)
    if (exps(i) * static_cast<double>(n) < -1e6) s.diverged_below = true;
  return s;
}

inline ProductAccumulator accumulate(const MatrixCocycle& c, const State& omega, long n) {
  ProductAccumulator acc(c.dim());
  State s = omega;
  for (long k = 0; k < n; ++k) {
    acc.push(c(s));
    s = c.base().step(s);
  }
  return acc;
}

inline LyapunovSpectrum lyapunov_spectrum(const MatrixCocycle& c, const State& omega, long n,
                                          SpectrumMethod method = SpectrumMethod::qr,
                                          double gap_threshold = -1) {
  if (n < c.dim()) throw PreconditionError("lyapunov_spectrum: need N >= d");
  auto acc = accumulate(c, omega, n);
  const double inv = 1.0 / static_cast<double>(n);
  Vector e = method == SpectrumMethod::qr ? Vector(acc.log_diag() * inv)
                                          : Vector(acc.singular().log_sigma * inv);
  return make_spectrum(e, n, method, gap_threshold);
}

enum class FiltrationDirection { forward, backward };

// Level i holds an orthonormal frame of V^{<= lambda_i}; levels follow the
// exponents in descending order, so dimensions decrease along the list.
struct Filtration {
  std::vector<int> dims;
  std::vector<Matrix> frames;
  std::vector<double> exponents;
  FiltrationDirection direction = FiltrationDirection::forward;
};

// right_vectors: right singular vectors ordered by decreasing singular value.
inline Filtration filtration_from_singular(const Matrix& right_vectors,
                                           const std::vector<ExponentGroup>& groups,
                                           FiltrationDirection dir) {
  Filtration f;
  f.direction = dir;
  const int d = static_cast<int>(right_vectors.cols());
  int offset = 0;
  for (const auto& g : groups) {
    f.dims.push_back(d - offset);
    f.frames.push_back(right_vectors.rightCols(d - offset));
    f.exponents.push_back(g.value);
    offset += g.multiplicity;
  }
  return f;
}

inline Filtration forward_filtration(const MatrixCocycle& c, const State& omega, long n,
                                     const LyapunovSpectrum& spectrum) {
  if (spectrum.low_confidence) {
    std::ostringstream msg;
    msg << "forward_filtration: exponent groups closer than twice the gap threshold "
        << spectrum.gap_threshold << " at N=" << n << "; increase N";
    throw NumericalError(msg.str());
  }
  auto acc = accumulate(c, omega, n);
  return filtration_from_singular(acc.singular().u, spectrum.groups, FiltrationDirection::forward);
}

// Product of inverses along the backward orbit: A(T^{-1}w)^{-1} ... A(T^{-N}w)^{-1}.
inline ProductAccumulator accumulate_backward(const MatrixCocycle& c, const State& omega, long n) {
  if (!c.base().invertible())
    throw PreconditionError("backward filtration needs an invertible base system");
  ProductAccumulator acc(c.dim());
  State s = omega;
  for (long k = 0; k < n; ++k) {
    s = c.base().step_back(s);
    acc.push(c(s).partialPivLu().inverse());
  }
  return acc;
}

// Filtration by growth under the inverse cocycle; its exponents are the negated
// forward exponents in reverse order.
inline Filtration backward_filtration(const MatrixCocycle& c, const State& omega, long n,
                                      const LyapunovSpectrum& forward_spectrum) {
  auto acc = accumulate_backward(c, omega, n);
  std::vector<ExponentGroup> groups(forward_spectrum.groups.rbegin(), forward_spectrum.groups.rend());
  for (auto& g : groups) g.value = -g.value;
  return filtration_from_singular(acc.singular().u, groups, FiltrationDirection::backward);
}

struct OseledetsSplitting {
  std::vector<Matrix> summands;  // frames of V^{lambda_j}, descending exponents
  std::vector<double> exponents;
  std::vector<int> multiplicities;
  std::vector<Vector> principal_angles;  // angles used for each intersection
  LyapunovSpectrum spectrum;
};

inline OseledetsSplitting oseledets_splitting(const MatrixCocycle& c, const State& omega, long n,
                                              double angle_tolerance = 1e-3) {
  OseledetsSplitting out;
  out.spectrum = lyapunov_spectrum(c, omega, n);
  auto fwd = forward_filtration(c, omega, n, out.spectrum);
  auto bwd = backward_filtration(c, omega, n, out.spectrum);
  const int k = static_cast<int>(out.spectrum.groups.size());
  for (int j = 0; j < k; ++j) {
    const int m = out.spectrum.groups[j].multiplicity;
    const Matrix& slow = fwd.frames[j];                // V^{<= lambda_j}
    const Matrix& past = bwd.frames[k - 1 - j];        // growth <= -lambda_j backwards
    auto [frame, angles] = approximate_intersection(slow, past, m);
    if (angles.size() < m || angles(m - 1) > angle_tolerance) {
      std::ostringstream msg;
      msg << "oseledets_splitting: intersection for exponent " << out.spectrum.groups[j].value
          << " has dimension below " << m << "; principal angles:";
      for (int i = 0; i < angles.size(); ++i) msg << ' ' << angles(i);
      throw NumericalError(msg.str());
    }
    out.summands.push_back(frame);
    out.exponents.push_back(out.spectrum.groups[j].value);
    out.multiplicities.push_back(m);
    out.principal_angles.push_back(angles);
  }
  return out;
}

// ---- splitting map of a block upper-triangular cocycle [[T_E, U], [0, T_F]]

struct BlockCocycle {
  ErgodicSystem base;
  int dim_e = 0;
  int dim_f = 0;
  std::function<Matrix(const State&)> t_e, u, t_f;

  static BlockCocycle from_upper(const MatrixCocycle& c, int dim_e) {
    const int d = c.dim();
    if (dim_e < 1 || dim_e >= d) throw PreconditionError("block cocycle: need 0 < dim E < d");
    auto gen = c.generator();
    const int df = d - dim_e;
    BlockCocycle b{c.base(), dim_e, df, {}, {}, {}};
    b.t_e = [gen, dim_e](const State& s) { return Matrix(gen(s).topLeftCorner(dim_e, dim_e)); };
    b.u = [gen, dim_e, df](const State& s) { return Matrix(gen(s).topRightCorner(dim_e, df)); };
    b.t_f = [gen, df](const State& s) { return Matrix(gen(s).bottomRightCorner(df, df)); };
    return b;
  }

  MatrixCocycle e_cocycle() const { return MatrixCocycle(base, dim_e, t_e); }
  MatrixCocycle f_cocycle() const { return MatrixCocycle(base, dim_f, t_f); }
};

struct SplittingMap {
  int dim_e = 0;
  int dim_f = 0;
  Matrix tau;  // F -> E
  int terms = 0;
  double last_increment = 0.0;
  bool converged = false;
  double residual = 0.0;  // ||T_E tau_w + U_w - tau_{Tw} T_F||
  std::vector<std::pair<long, double>> temperedness;
};

struct SplittingOptions {
  int max_terms = 50;
  bool check_hypothesis = true;
  long hypothesis_horizon = 2048;
  long tempered_horizon = 4096;
};

struct SeriesSum {
  Matrix tau;
  int terms = 0;
  double last_increment = 0.0;
};

// tau_w = - sum_{n < max_terms} (T_E^{n+1})^{-1} U_{T^n w} T_F^n.
inline SeriesSum splitting_series(const BlockCocycle& b, const State& omega, int max_terms) {
  Matrix tau = Matrix::Zero(b.dim_e, b.dim_f);
  Matrix p_hat = Matrix::Identity(b.dim_e, b.dim_e);  // (T_E^{n})^{-1} up to exp(log_p)
  Matrix f_hat = Matrix::Identity(b.dim_f, b.dim_f);  // T_F^n up to exp(log_f)
  double log_p = 0, log_f = 0;
  State s = omega;
  SeriesSum out;
  double previous = -1;
  int growing = 0;
  for (int n = 0; n < max_terms; ++n) {
    Matrix te = b.t_e(s);
    p_hat = p_hat * te.partialPivLu().inverse();
    const double pn = p_hat.norm();
    if (!(pn > 0) || !std::isfinite(pn)) throw NumericalError("splitting_map: T_E is singular along the orbit");
    p_hat /= pn;
    log_p += std::log(pn);
    Matrix term = -std::exp(log_p + log_f) * (p_hat * b.u(s) * f_hat);
    const double size = term.norm();
    tau += term;
    out.last_increment = size;
    out.terms = n + 1;
    if (previous >= 0 && size > previous) {
      if (++growing >= 10)
        throw NumericalError("splitting_map: partial sums diverge (10 growing terms); lambda_E > lambda_F likely fails");
    } else {
      growing = 0;
    }
    previous = size;
    f_hat = b.t_f(s) * f_hat;
    const double fn = f_hat.norm();
    f_hat /= fn;
    log_f += std::log(fn);
    s = b.base.step(s);
  }
  out.tau = tau;
  return out;
}

inline SplittingMap splitting_map(const BlockCocycle& b, const State& omega, SplittingOptions opt = {}) {
  if (opt.check_hypothesis) {
    const long h = std::max<long>(opt.hypothesis_horizon, std::max(b.dim_e, b.dim_f));
    auto se = lyapunov_spectrum(b.e_cocycle(), omega, h);
    auto sf = lyapunov_spectrum(b.f_cocycle(), omega, h);
    const double low_e = se.exponents(se.exponents.size() - 1);
    const double top_f = sf.exponents(0);
    if (!(low_e > top_f)) {
      std::ostringstream msg;
      msg << "splitting_map: needs lambda_E > lambda_F, estimated " << low_e << " <= " << top_f;
      throw PreconditionError(msg.str());
    }
  }
  auto here = splitting_series(b, omega, opt.max_terms);
  auto next = splitting_series(b, b.base.step(omega), opt.max_terms);
  SplittingMap m;
  m.dim_e = b.dim_e;
  m.dim_f = b.dim_f;
  m.tau = here.tau;
  m.terms = here.terms;
  m.last_increment = here.last_increment;
  m.converged = here.last_increment < 1e-10;
  m.residual = (b.t_e(omega) * here.tau + b.u(omega) - next.tau * b.t_f(omega)).norm();
  State s = omega;
  long at = 0;
  for (long n : dyadic_indices(opt.tempered_horizon, false)) {
    while (at < n) {
      s = b.base.step(s);
      ++at;
    }
    auto t = splitting_series(b, s, opt.max_terms);
    Matrix graph(b.dim_e + b.dim_f, b.dim_f);
    graph << t.tau, Matrix::Identity(b.dim_f, b.dim_f);
    m.temperedness.emplace_back(n, std::log(op_norm(graph)) / static_cast<double>(n));
  }
  return m;
}

// ---- Lambda-operator diagnostic

// Orthogonal graded pieces V^{<= lambda_j} minus V^{<= lambda_{j+1}} of a forward
// filtration: the eigenspaces of the self-adjoint limit of ((T^n)^t T^n)^{1/2n}.
inline std::vector<Matrix> filtration_summands(const Filtration& f) {
  std::vector<Matrix> out;
  for (std::size_t j = 0; j < f.frames.size(); ++j) {
    const int next = j + 1 < f.frames.size() ? f.dims[j + 1] : 0;
    out.push_back(f.frames[j].leftCols(f.dims[j] - next));
  }
  return out;
}


// Lambda acts as exp(lambda_j) on the j-th summand. Returns, at dyadic n <= N,
// (1/n) log |<Lambda^{-2n} (T^n)^t T^n v, v>| for the test vector with the
// largest magnitude among the columns of a fixed orthogonal frame.
inline std::vector<std::pair<long, double>> lambda_residual(const MatrixCocycle& c, const State& omega,
                                                            long n, const std::vector<Matrix>& summands,
                                                            const std::vector<double>& exponents,
                                                            std::uint64_t test_seed = 1234) {
  const int d = c.dim();
  if (summands.size() != exponents.size()) throw PreconditionError("lambda_residual: one exponent per summand");
  Matrix s(d, d);
  std::vector<double> lam;
  int col = 0;
  for (std::size_t j = 0; j < summands.size(); ++j) {
    for (int i = 0; i < summands[j].cols(); ++i) {
      if (col >= d) throw PreconditionError("lambda_residual: summands exceed the dimension");
      s.col(col++) = summands[j].col(i);
      lam.push_back(exponents[j]);
    }
  }
  if (col != d) throw PreconditionError("lambda_residual: summands do not span the fiber");
  Matrix s_inv = s.partialPivLu().inverse();
  Rng rng(test_seed);
  Matrix tests = random_orthogonal(d, rng);
  std::vector<std::pair<long, double>> out;
  ProductAccumulator acc(d);
  State st = omega;
  auto marks = dyadic_indices(n);
  std::size_t next = 0;
  for (long k = 1; k <= n && next < marks.size(); ++k) {
    acc.push(c(st));
    st = c.base().step(st);
    if (k != marks[next]) continue;
    ++next;
    Matrix m = s_inv * acc.v().transpose();
    double best = 0.0;
    bool first = true;
    for (int t = 0; t < d; ++t) {
      Vector v = tests.col(t);
      Vector left = s.transpose() * v;
      Vector right = acc.v() * v;
      std::vector<double> logs, signs;
      for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) {
          const double a = left(j) * m(j, i) * right(i);
          if (a == 0.0) continue;
          logs.push_back(std::log(std::abs(a)) + 2.0 * acc.log_diag()(i) - 2.0 * static_cast<double>(k) * lam[j]);
          signs.push_back(a < 0 ? -1.0 : 1.0);
        }
      const double val = signed_log_sum(logs, signs).first / static_cast<double>(k);
      if (first || std::abs(val) > std::abs(best)) best = val;
      first = false;
    }
    out.emplace_back(k, best);
  }
  return out;
}

}  // namespace met
