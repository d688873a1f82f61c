#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "met/error.hpp"
#include "met/random.hpp"

namespace met {

// A point of the base space. Interval maps use x (the doubling map also keeps a
// 64-bit binary expansion in word); shifts use time and the symbol at that time.
struct State {
  double x = 0.0;
  std::uint64_t word = 0;
  std::int64_t time = 0;
  int symbol = 0;
};

enum class SystemKind { circle_rotation, doubling_map, bernoulli_shift, markov_shift };

inline std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::circle_rotation: return "circle-rotation";
    case SystemKind::doubling_map: return "doubling-map";
    case SystemKind::bernoulli_shift: return "bernoulli-shift";
    case SystemKind::markov_shift: return "markov-shift";
  }
  return "?";
}

class ErgodicSystem {
 public:
  static ErgodicSystem circle_rotation(double angle, std::uint64_t seed = 0) {
    if (!(angle >= 0.0 && angle < 1.0)) throw DomainError("circle-rotation: angle must lie in [0,1)");
    ErgodicSystem s(SystemKind::circle_rotation, seed);
    s.angle_ = angle;
    return s;
  }

  static ErgodicSystem doubling_map(std::uint64_t seed = 0) {
    return ErgodicSystem(SystemKind::doubling_map, seed);
  }

  static ErgodicSystem bernoulli_shift(std::vector<double> probabilities, std::uint64_t seed) {
    if (probabilities.empty()) throw PreconditionError("bernoulli-shift: no symbols");
    double total = 0;
    for (double p : probabilities) {
      if (!(p >= 0.0)) throw PreconditionError("bernoulli-shift: negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw PreconditionError("bernoulli-shift: probabilities must sum to 1");
    ErgodicSystem s(SystemKind::bernoulli_shift, seed);
    s.probabilities_ = std::move(probabilities);
    s.build_cdf();
    return s;
  }

  static ErgodicSystem markov_shift(Eigen::MatrixXd transition, Eigen::VectorXd stationary,
                                    std::uint64_t seed) {
    const auto k = transition.rows();
    if (k == 0 || transition.cols() != k || stationary.size() != k)
      throw PreconditionError("markov-shift: transition must be square and match the stationary vector");
    for (Eigen::Index i = 0; i < k; ++i) {
      if ((transition.row(i).array() < 0).any()) throw PreconditionError("markov-shift: negative transition entry");
      if (std::abs(transition.row(i).sum() - 1.0) > 1e-12)
        throw PreconditionError("markov-shift: row " + std::to_string(i) + " does not sum to 1");
    }
    if ((stationary.array() < 0).any() || std::abs(stationary.sum() - 1.0) > 1e-12)
      throw PreconditionError("markov-shift: stationary distribution must be a probability vector");
    Eigen::VectorXd pi_p = transition.transpose() * stationary;
    if ((pi_p - stationary).cwiseAbs().maxCoeff() > 1e-10)
      throw PreconditionError("markov-shift: stationary distribution does not satisfy pi P = pi");
    ErgodicSystem s(SystemKind::markov_shift, seed);
    s.transition_ = std::move(transition);
    s.probabilities_.assign(stationary.data(), stationary.data() + k);
    s.build_cdf();
    return s;
  }

  SystemKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  double angle() const { return angle_; }
  const std::vector<double>& probabilities() const { return probabilities_; }
  const Eigen::MatrixXd& transition() const { return transition_; }
  int symbol_count() const { return static_cast<int>(probabilities_.size()); }

  bool invertible() const {
    return kind_ == SystemKind::circle_rotation || kind_ == SystemKind::bernoulli_shift;
  }

  // Initial state for interval maps.
  State start(double x) const {
    if (kind_ == SystemKind::bernoulli_shift || kind_ == SystemKind::markov_shift)
      return start_at(static_cast<std::int64_t>(x));
    if (!(x >= 0.0 && x < 1.0)) throw DomainError("initial state must lie in [0,1)");
    State s;
    s.x = x;
    if (kind_ == SystemKind::doubling_map) s.word = to_word(x);
    return s;
  }

  // Initial state for shifts: the word read from the given time index.
  State start_at(std::int64_t time) const {
    State s;
    s.time = time;
    if (kind_ == SystemKind::bernoulli_shift) {
      s.x = to_unit(hash_at(seed_, static_cast<std::uint64_t>(time)));
      s.symbol = draw(probability_cdf_, s.x);
    } else if (kind_ == SystemKind::markov_shift) {
      s.x = to_unit(hash_at(seed_, static_cast<std::uint64_t>(time)));
      s.symbol = draw(probability_cdf_, s.x);
    } else {
      throw DomainError("start_at applies to shift spaces only");
    }
    return s;
  }

  State step(const State& s) const {
    State n = s;
    switch (kind_) {
      case SystemKind::circle_rotation:
        n.x = s.x + angle_;
        if (n.x >= 1.0) n.x -= 1.0;
        break;
      case SystemKind::doubling_map: {
        // the bit shifted in stands for the unresolved tail of the expansion
        const std::uint64_t bit = hash_at(seed_ ^ 0xa5a5a5a5ULL, static_cast<std::uint64_t>(s.time)) >> 63;
        n.word = (s.word << 1) | bit;
        n.x = from_word(n.word);
        break;
      }
      case SystemKind::bernoulli_shift:
        n.time = s.time + 1;
        n.x = to_unit(hash_at(seed_, static_cast<std::uint64_t>(n.time)));
        n.symbol = draw(probability_cdf_, n.x);
        break;
      case SystemKind::markov_shift:
        n.x = to_unit(hash_at(seed_, static_cast<std::uint64_t>(s.time + 1)));
        n.symbol = draw(row_cdf_[s.symbol], n.x);
        break;
    }
    n.time = s.time + 1;
    return n;
  }

  State step_back(const State& s) const {
    State n = s;
    switch (kind_) {
      case SystemKind::circle_rotation:
        n.x = s.x - angle_;
        if (n.x < 0.0) n.x += 1.0;
        if (n.x >= 1.0) n.x = 0.0;
        n.time = s.time - 1;
        return n;
      case SystemKind::bernoulli_shift:
        return start_at(s.time - 1);
      default:
        throw PreconditionError(to_string(kind_) + " is not invertible");
    }
  }

  // The k-th state of an i.i.d. sample from the invariant measure.
  State sample(std::uint64_t k) const {
    const std::uint64_t salt = 0x5eed5eed5eedULL;
    const double u = to_unit(hash_at(seed_ ^ salt, k));
    switch (kind_) {
      case SystemKind::circle_rotation: {
        State s;
        s.x = u;
        return s;
      }
      case SystemKind::doubling_map: {
        State s;
        s.word = hash_at(seed_ ^ salt, k);
        s.x = from_word(s.word);
        s.time = static_cast<std::int64_t>(k) << 20;
        return s;
      }
      case SystemKind::bernoulli_shift:
        return start_at(static_cast<std::int64_t>((k + 1) << 24));
      case SystemKind::markov_shift: {
        State s;
        s.time = static_cast<std::int64_t>((k + 1) << 24);
        s.x = u;
        s.symbol = draw(probability_cdf_, u);
        return s;
      }
    }
    return {};
  }

  bool operator==(const ErgodicSystem& o) const {
    return kind_ == o.kind_ && seed_ == o.seed_ && angle_ == o.angle_ &&
           probabilities_ == o.probabilities_ && transition_.rows() == o.transition_.rows() &&
           transition_.cols() == o.transition_.cols() && transition_ == o.transition_;
  }

 private:
  ErgodicSystem(SystemKind k, std::uint64_t seed) : kind_(k), seed_(seed) {}

  static std::uint64_t to_word(double x) {
    const double scaled = std::ldexp(x, 64);
    if (scaled >= 18446744073709551615.0) return ~std::uint64_t{0};
    return static_cast<std::uint64_t>(scaled);
  }

  static double from_word(std::uint64_t w) {
    const double x = std::ldexp(static_cast<double>(w), -64);
    return x < 1.0 ? x : std::nextafter(1.0, 0.0);
  }

  static int draw(const std::vector<double>& cdf, double u) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto idx = std::distance(cdf.begin(), it);
    return static_cast<int>(std::min<std::ptrdiff_t>(idx, static_cast<std::ptrdiff_t>(cdf.size()) - 1));
  }

  void build_cdf() {
    probability_cdf_.clear();
    double acc = 0;
    for (double p : probabilities_) probability_cdf_.push_back(acc += p);
    if (kind_ == SystemKind::markov_shift) {
      row_cdf_.assign(transition_.rows(), {});
      for (Eigen::Index i = 0; i < transition_.rows(); ++i) {
        double a = 0;
        for (Eigen::Index j = 0; j < transition_.cols(); ++j) row_cdf_[i].push_back(a += transition_(i, j));
      }
    }
  }

  SystemKind kind_;
  std::uint64_t seed_;
  double angle_ = 0.0;
  std::vector<double> probabilities_;
  Eigen::MatrixXd transition_;
  std::vector<double> probability_cdf_;
  std::vector<std::vector<double>> row_cdf_;
};

using Observable = std::function<double(const State&)>;

inline std::vector<State> orbit(const ErgodicSystem& system, const State& initial, std::int64_t n) {
  if (n < 1) throw PreconditionError("orbit: N must be at least 1");
  std::vector<State> out;
  out.reserve(static_cast<std::size_t>(n));
  out.push_back(initial);
  for (std::int64_t i = 1; i < n; ++i) out.push_back(system.step(out.back()));
  return out;
}

// (omega, T^{-1} omega, ..., T^{-(n-1)} omega)
inline std::vector<State> backward_orbit(const ErgodicSystem& system, const State& initial,
                                         std::int64_t n) {
  if (!system.invertible()) throw PreconditionError("backward orbit needs an invertible base");
  std::vector<State> out;
  out.reserve(static_cast<std::size_t>(n));
  out.push_back(initial);
  for (std::int64_t i = 1; i < n; ++i) out.push_back(system.step_back(out.back()));
  return out;
}

struct BirkhoffResult {
  double value = 0.0;
  double log_mean = 0.0;  // multiplicative mode: mean of log f
  bool diverged = false;  // multiplicative mode: f vanished, limit is -infinity in log
};

inline BirkhoffResult birkhoff_average(const ErgodicSystem& system, const Observable& f,
                                       const State& initial, std::int64_t n,
                                       bool multiplicative = false) {
  if (n < 1) throw PreconditionError("birkhoff_average: N must be at least 1");
  State s = initial;
  double mean = 0.0;
  bool diverged = false;
  for (std::int64_t k = 1; k <= n; ++k) {
    double v = f(s);
    if (multiplicative) {
      if (v < 0.0 || std::isnan(v)) throw DomainError("birkhoff_average: multiplicative mode needs f > 0");
      if (v == 0.0) {
        diverged = true;
      } else {
        v = std::log(v);
      }
    }
    if (!diverged) mean += (v - mean) / static_cast<double>(k);
    if (k < n) s = system.step(s);
  }
  BirkhoffResult r;
  if (multiplicative) {
    r.diverged = diverged;
    r.log_mean = diverged ? -std::numeric_limits<double>::infinity() : mean;
    r.value = diverged ? 0.0 : std::exp(mean);
  } else {
    r.value = mean;
  }
  return r;
}

// ---- subadditive sequences

struct SubadditivityAudit {
  bool ok = true;
  long n = 0, m = 0;  // first violating pair
  double excess = 0.0;
  long checked = 0;
};

inline double subadditive_slack(double v) { return 1e-9 * (1.0 + std::abs(v)); }

class SubadditiveSequence {
 public:
  // values[0] is a_1
  explicit SubadditiveSequence(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw PreconditionError("subadditive sequence must be nonempty");
  }

  long size() const { return static_cast<long>(values_.size()); }
  double operator()(long n) const { return values_[static_cast<std::size_t>(n - 1)]; }
  const std::vector<double>& values() const { return values_; }

  // All pairs when the horizon is small, otherwise 4N seeded random pairs.
  SubadditivityAudit audit(std::uint64_t seed = 1) const {
    SubadditivityAudit r;
    const long n = size();
    auto check = [&](long i, long j) {
      ++r.checked;
      const double lhs = (*this)(i + j);
      const double rhs = (*this)(i) + (*this)(j);
      if (lhs > rhs + subadditive_slack(lhs) && r.ok) {
        r.ok = false;
        r.n = i;
        r.m = j;
        r.excess = lhs - rhs;
      }
    };
    if (n <= 2048) {
      for (long i = 1; i < n; ++i)
        for (long j = 1; i + j <= n; ++j) check(i, j);
    } else {
      Rng rng(seed);
      std::uniform_int_distribution<long> pick(1, n - 1);
      for (long k = 0; k < 4 * n; ++k) {
        long i = pick(rng);
        std::uniform_int_distribution<long> second(1, n - i);
        check(i, second(rng));
      }
    }
    return r;
  }

 private:
  std::vector<double> values_;
};

struct FeketeReport {
  double infimum = 0.0;  // min_n a_n / n
  long argmin = 1;
  double tail_slope = 0.0;  // a_N / N
  double gap = 0.0;         // tail_slope - infimum
  bool minus_infinity = false;
  bool audited = false;
};

inline FeketeReport fekete_limit(const SubadditiveSequence& seq, bool audit = true) {
  if (audit) {
    auto a = seq.audit();
    if (!a.ok)
      throw PreconditionError("fekete_limit: subadditivity fails at n=" + std::to_string(a.n) +
                              ", m=" + std::to_string(a.m) + " by " + std::to_string(a.excess));
  }
  FeketeReport r;
  r.audited = audit;
  r.infimum = std::numeric_limits<double>::infinity();
  for (long n = 1; n <= seq.size(); ++n) {
    const double q = seq(n) / static_cast<double>(n);
    if (q < r.infimum) {
      r.infimum = q;
      r.argmin = n;
    }
  }
  r.tail_slope = seq(seq.size()) / static_cast<double>(seq.size());
  r.gap = r.tail_slope - r.infimum;
  r.minus_infinity = r.infimum < -1e9;
  return r;
}

inline std::vector<long> dyadic_indices(long n, bool include_end = true) {
  std::vector<long> out;
  for (long k = 1; k <= n; k *= 2) out.push_back(k);
  if (include_end && (out.empty() || out.back() != n)) out.push_back(n);
  return out;
}

// f(n, omega) for n >= 1
using SubadditiveFamily = std::function<double(long, const State&)>;

struct KingmanReport {
  double estimate = 0.0;  // f_N(omega) / N
  std::vector<std::pair<long, double>> trace;  // (n, f_n(omega)/n) at dyadic n
  long audited_triples = 0;
};

struct KingmanOptions {
  int audit_samples = 64;
  std::uint64_t audit_seed = 7;
};

inline KingmanReport kingman_estimate(const ErgodicSystem& system, const SubadditiveFamily& f,
                                      const State& initial, long n, KingmanOptions opt = {}) {
  if (n < 1) throw PreconditionError("kingman_estimate: N must be at least 1");
  const auto states = orbit(system, initial, n);
  KingmanReport r;
  if (n >= 2) {
    Rng rng(opt.audit_seed);
    std::uniform_int_distribution<long> pick(1, n - 1);
    for (int k = 0; k < opt.audit_samples; ++k) {
      const long i = pick(rng);
      std::uniform_int_distribution<long> second(1, n - i);
      const long j = second(rng);
      const double whole = f(i + j, states[0]);
      const double parts = f(i, states[0]) + f(j, states[static_cast<std::size_t>(i)]);
      ++r.audited_triples;
      if (whole > parts + subadditive_slack(whole))
        throw PreconditionError("kingman_estimate: subadditivity fails at i=" + std::to_string(i) +
                                ", j=" + std::to_string(j) + ", omega time " +
                                std::to_string(states[0].time) + ", x " + std::to_string(states[0].x));
    }
  }
  for (long k : dyadic_indices(n)) r.trace.emplace_back(k, f(k, states[0]) / static_cast<double>(k));
  r.estimate = r.trace.back().second;
  return r;
}

// Kingman estimate from a path f_1..f_N already measured along one orbit.
inline KingmanReport kingman_from_path(const std::vector<double>& path) {
  if (path.empty()) throw PreconditionError("kingman_from_path: empty path");
  KingmanReport r;
  const long n = static_cast<long>(path.size());
  for (long k : dyadic_indices(n)) r.trace.emplace_back(k, path[static_cast<std::size_t>(k - 1)] / static_cast<double>(k));
  r.estimate = r.trace.back().second;
  return r;
}

}  // namespace met
