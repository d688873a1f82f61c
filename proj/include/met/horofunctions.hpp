#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "met/dynsys.hpp"
#include "met/error.hpp"
#include "met/spaces.hpp"
#include "met/symspace.hpp"

namespace met {

enum class HorofunctionKind { closed_form, anchored, zero };

// A point of the bordification, evaluated pointwise. Anchored functions are
// h(y) = d(z, y) - d(z, x0) for the last anchor z; the Cauchy gap compares the
// last two anchors on the probe set.
template <class Point>
struct Horofunction {
  HorofunctionKind kind = HorofunctionKind::zero;
  std::function<double(const Point&)> fn;
  std::vector<Point> anchors;
  double cauchy_gap = 0.0;

  double operator()(const Point& y) const { return fn ? fn(y) : 0.0; }

  static Horofunction zero() { return {HorofunctionKind::zero, [](const Point&) { return 0.0; }, {}, 0.0}; }
  static Horofunction closed_form(std::function<double(const Point&)> f) {
    return {HorofunctionKind::closed_form, std::move(f), {}, 0.0};
  }
};

// h_x(y) = d(x, y) - d(x, x0)
template <MetricSpace S>
Horofunction<typename S::Point> phi_embed(const S& space, const typename S::Point& x) {
  const double offset = space.distance(x, space.basepoint());
  return Horofunction<typename S::Point>::closed_form(
      [space, x, offset](const typename S::Point& y) { return space.distance(x, y) - offset; });
}

template <MetricSpace S>
Horofunction<typename S::Point> anchored_horofunction(const S& space, std::vector<typename S::Point> anchors,
                                                      const std::vector<typename S::Point>& probes) {
  using P = typename S::Point;
  if (anchors.empty()) throw PreconditionError("anchored_horofunction: no anchors");
  Horofunction<P> h;
  h.kind = HorofunctionKind::anchored;
  const P z = anchors.back();
  const double offset = space.distance(z, space.basepoint());
  h.fn = [space, z, offset](const P& y) { return space.distance(z, y) - offset; };
  if (anchors.size() >= 2) {
    const P& w = anchors[anchors.size() - 2];
    const double ow = space.distance(w, space.basepoint());
    for (const auto& y : probes)
      h.cauchy_gap = std::max(h.cauchy_gap, std::abs(h.fn(y) - (space.distance(w, y) - ow)));
  }
  h.anchors = std::move(anchors);
  return h;
}

// Busemann function of a diagonal ray, as a closed-form horofunction on the SPD space.
inline Horofunction<SpdPoint> busemann_horofunction(const BusemannData& b) {
  return Horofunction<SpdPoint>::closed_form([b](const SpdPoint& p) { return busemann_value(b, p); });
}

// h(y) = -<u, y - x0> with |u| = 1: the horofunctions at infinity of R^d.
inline Horofunction<Vector> linear_horofunction(const Vector& u, const Vector& basepoint) {
  if (std::abs(u.norm() - 1.0) > 1e-12) throw PreconditionError("linear_horofunction: direction must be a unit vector");
  return Horofunction<Vector>::closed_form([u, basepoint](const Vector& y) { return -u.dot(y - basepoint); });
}

// (g . h)(z) = h(g^{-1} z) - h(g^{-1} x0)
template <MetricSpace S, class G>
  requires IsometryOf<G, typename S::Point>
Horofunction<typename S::Point> isometry_act(const S& space, const G& g, const Horofunction<typename S::Point>& h) {
  using P = typename S::Point;
  const G gi = g.inverse();
  const double offset = h(gi(space.basepoint()));
  Horofunction<P> out = h;
  out.fn = [h, gi, offset](const P& z) { return h(gi(z)) - offset; };
  out.anchors.clear();
  return out;
}

// F(g, h) = -h(g^{-1} x0)
template <MetricSpace S, class G>
  requires IsometryOf<G, typename S::Point>
double horofunction_cocycle(const S& space, const G& g, const Horofunction<typename S::Point>& h) {
  return -h(g.inverse()(space.basepoint()));
}

struct HorofunctionAudit {
  double basepoint_value = 0.0;  // |h(x0)|
  double lipschitz_excess = 0.0;  // max of |h(x) - h(y)| - d(x, y)
  bool ok = true;
};

template <MetricSpace S>
HorofunctionAudit audit_horofunction(const S& space, const Horofunction<typename S::Point>& h,
                                     const std::vector<typename S::Point>& probes) {
  HorofunctionAudit a;
  a.basepoint_value = std::abs(h(space.basepoint()));
  std::vector<double> v;
  v.reserve(probes.size());
  for (const auto& y : probes) v.push_back(h(y));
  for (std::size_t i = 0; i < probes.size(); ++i)
    for (std::size_t j = i + 1; j < probes.size(); ++j)
      a.lipschitz_excess = std::max(a.lipschitz_excess, std::abs(v[i] - v[j]) - space.distance(probes[i], probes[j]));
  a.ok = a.basepoint_value <= 1e-10 && a.lipschitz_excess <= 1e-9;
  return a;
}

// max |d(gx, gy) - d(x, y)| over random pairs of the given points
template <MetricSpace S, class G>
double isometry_defect(const S& space, const G& g, const std::vector<typename S::Point>& points, long pairs,
                       std::uint64_t seed = 13) {
  if (points.size() < 2) return 0.0;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  double worst = 0.0;
  for (long k = 0; k < pairs; ++k) {
    const auto& x = points[pick(rng)];
    const auto& y = points[pick(rng)];
    worst = std::max(worst, std::abs(space.distance(g(x), g(y)) - space.distance(x, y)));
  }
  return worst;
}

// ---- drift of a semi-contraction

template <class Point>
using SelfMap = std::function<Point(const Point&)>;

struct DriftReport {
  double drift = 0.0;  // Fekete infimum of a_n / n
  double tail_slope = 0.0;
  double gap = 0.0;
  std::vector<double> a;  // a_n = d(x0, f^n x0), a[0] = a_1
  long audited_pairs = 0;
};

// Orbit x_0..x_N of f from the basepoint.
template <MetricSpace S>
std::vector<typename S::Point> self_map_orbit(const S& space, const SelfMap<typename S::Point>& f, long n) {
  std::vector<typename S::Point> xs;
  xs.reserve(static_cast<std::size_t>(n + 1));
  xs.push_back(space.basepoint());
  for (long k = 0; k < n; ++k) xs.push_back(f(xs.back()));
  return xs;
}

// Audits d(f x, f y) <= d(x, y) on random pairs of orbit points plus any extra points.
template <MetricSpace S>
long audit_semi_contraction(const S& space, const SelfMap<typename S::Point>& f,
                            const std::vector<typename S::Point>& orbit_points,
                            const std::vector<typename S::Point>& extra, long pairs = 256, std::uint64_t seed = 17) {
  long checked = 0;
  auto fail = [](double lhs, double rhs) {
    throw PreconditionError("drift: map is not a semi-contraction (d(fx,fy) = " + std::to_string(lhs) +
                            " > d(x,y) = " + std::to_string(rhs) + ")");
  };
  if (orbit_points.size() >= 3) {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, orbit_points.size() - 2);
    for (long k = 0; k < pairs; ++k) {
      const std::size_t i = pick(rng), j = pick(rng);
      const double lhs = space.distance(orbit_points[i + 1], orbit_points[j + 1]);
      const double rhs = space.distance(orbit_points[i], orbit_points[j]);
      ++checked;
      if (lhs > rhs + 1e-9 * (1.0 + rhs)) fail(lhs, rhs);
    }
  }
  for (std::size_t i = 0; i < extra.size(); ++i)
    for (std::size_t j = i + 1; j < extra.size(); ++j) {
      const double lhs = space.distance(f(extra[i]), f(extra[j]));
      const double rhs = space.distance(extra[i], extra[j]);
      ++checked;
      if (lhs > rhs + 1e-9 * (1.0 + rhs)) fail(lhs, rhs);
    }
  return checked;
}

template <MetricSpace S>
DriftReport drift_from_orbit(const S& space, const std::vector<typename S::Point>& xs) {
  if (xs.size() < 2) throw PreconditionError("drift: N must be at least 1");
  DriftReport r;
  for (std::size_t k = 1; k < xs.size(); ++k) r.a.push_back(space.distance(xs[0], xs[k]));
  auto fk = fekete_limit(SubadditiveSequence(r.a));
  r.drift = std::max(0.0, fk.infimum);
  r.tail_slope = fk.tail_slope;
  r.gap = fk.gap;
  return r;
}

template <MetricSpace S>
DriftReport drift(const S& space, const SelfMap<typename S::Point>& f, long n,
                  const std::vector<typename S::Point>& audit_points = {}) {
  if (n < 1) throw PreconditionError("drift: N must be at least 1");
  const auto xs = self_map_orbit(space, f, n);
  const long checked = audit_semi_contraction(space, f, xs, audit_points);
  DriftReport r = drift_from_orbit(space, xs);
  r.audited_pairs = checked;
  return r;
}

// ---- a single horofunction detecting the drift

inline constexpr double kZeroDrift = 1e-9;

inline double record_epsilon(double gap) { return std::max(2.0 * std::abs(gap), 1e-4); }

// Indices n in 1..N (values[n-1]) where values[n-1] - slope n is a strict running maximum.
inline std::vector<long> record_times(const std::vector<double>& values, double slope) {
  std::vector<long> out;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double n = static_cast<double>(k + 1);
    const double v = values[k] - slope * n;
    if (v > best) {
      best = v;
      out.push_back(static_cast<long>(k + 1));
    }
  }
  return out;
}

template <class Point>
struct KarlssonResult {
  Horofunction<Point> h;
  DriftReport drift;
  double epsilon = 0.0;
  std::vector<long> records;
  double upper_violation = 0.0;  // max over k <= N/2 of h(f^k x0) + l k (must stay <= tol)
  double lower_violation = 0.0;  // max over k <= N of -a_k - h(f^k x0) (must stay <= 1e-9)
  std::vector<std::pair<long, double>> values;  // (k, h(f^k x0)) at dyadic k <= N/2
};

template <MetricSpace S>
KarlssonResult<typename S::Point> karlsson_horofunction(const S& space, const SelfMap<typename S::Point>& f, long n,
                                                        const std::vector<typename S::Point>& probes = {}) {
  using P = typename S::Point;
  if (n < 2) throw PreconditionError("karlsson_horofunction: N must be at least 2");
  const auto xs = self_map_orbit(space, f, n);
  KarlssonResult<P> r;
  const long checked = audit_semi_contraction(space, f, xs, {});
  r.drift = drift_from_orbit(space, xs);
  r.drift.audited_pairs = checked;
  const double l = r.drift.drift;
  if (l <= kZeroDrift) {
    r.h = Horofunction<P>::zero();
  } else {
    r.epsilon = record_epsilon(r.drift.gap);
    r.records = record_times(r.drift.a, l - r.epsilon);
    if (r.records.size() < 3)
      throw NumericalError("karlsson_horofunction: only " + std::to_string(r.records.size()) +
                           " record times up to N=" + std::to_string(n) + "; increase the horizon");
    std::vector<P> anchors;
    for (long t : r.records) anchors.push_back(xs[static_cast<std::size_t>(t)]);
    std::vector<P> probe_set = probes;
    if (probe_set.empty())
      for (long k : dyadic_indices(n / 2)) probe_set.push_back(xs[static_cast<std::size_t>(k)]);
    r.h = anchored_horofunction(space, std::move(anchors), probe_set);
  }
  r.upper_violation = -std::numeric_limits<double>::infinity();
  for (long k = 1; k <= n; ++k) {
    const double hk = r.h(xs[static_cast<std::size_t>(k)]);
    if (k <= n / 2) r.upper_violation = std::max(r.upper_violation, hk + l * static_cast<double>(k));
    r.lower_violation = std::max(r.lower_violation, -r.drift.a[static_cast<std::size_t>(k - 1)] - hk);
  }
  for (long k : dyadic_indices(n / 2, false)) r.values.emplace_back(k, r.h(xs[static_cast<std::size_t>(k)]));
  return r;
}

// ---- isometry cocycles and the noncommutative ergodic theorem

template <class G>
struct IsometryCocycle {
  ErgodicSystem base;
  std::function<G(const State&)> generator;

  G operator()(const State& s) const { return generator(s); }
};

template <class G>
IsometryCocycle<G> symbolic_isometry_cocycle(ErgodicSystem base, std::vector<G> isometries) {
  if (static_cast<int>(isometries.size()) < base.symbol_count())
    throw PreconditionError("isometry cocycle: fewer isometries than symbols");
  return {std::move(base), [isos = std::move(isometries)](const State& s) { return isos[static_cast<std::size_t>(s.symbol)]; }};
}

template <class G>
IsometryCocycle<G> constant_isometry_cocycle(ErgodicSystem base, G g) {
  return {std::move(base), [g = std::move(g)](const State&) { return g; }};
}

struct NcetDrift {
  double drift = 0.0;  // F_N / N
  std::vector<std::pair<long, double>> trace;  // (n, F_n / n) at dyadic n
  std::vector<double> path;  // F_1..F_N
  double integrability = 0.0;  // Monte Carlo mean of d(g x0, x0)
  double integrability_stderr = 0.0;
  long audited_triples = 0;
};

// F_n(omega) = d(g_omega ... g_{T^{n-1} omega} x0, x0) = d(x0, g_{T^{n-1} omega}^{-1} ... g_omega^{-1} x0),
// evaluated by iterating inverses on points so no product is ever formed.
template <MetricSpace S, class G>
std::vector<double> ncet_path(const S& space, const IsometryCocycle<G>& c, const State& omega, long n) {
  const auto x0 = space.basepoint();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  auto z = x0;
  State s = omega;
  for (long k = 0; k < n; ++k) {
    z = c(s).inverse()(z);
    out.push_back(space.distance(x0, z));
    s = c.base.step(s);
  }
  return out;
}

// g_omega ... g_{T^{n-1} omega} x0, applying the innermost isometry first.
template <MetricSpace S, class G>
typename S::Point ncet_orbit_point(const S& space, const IsometryCocycle<G>& c, const std::vector<State>& states,
                                   long n) {
  auto y = space.basepoint();
  for (long k = n - 1; k >= 0; --k) y = c(states[static_cast<std::size_t>(k)])(y);
  return y;
}

template <MetricSpace S, class G>
NcetDrift ncet_drift(const S& space, const IsometryCocycle<G>& c, const State& omega, long n,
                     long integrability_samples = 1000, int audit_samples = 16, std::uint64_t audit_seed = 7) {
  if (n < 1) throw PreconditionError("ncet_drift: N must be at least 1");
  NcetDrift r;
  const auto x0 = space.basepoint();
  double s1 = 0, s2 = 0;
  for (long k = 0; k < integrability_samples; ++k) {
    const double d = space.distance(c(c.base.sample(static_cast<std::uint64_t>(k)))(x0), x0);
    s1 += d;
    s2 += d * d;
  }
  if (integrability_samples > 0) {
    const double m = static_cast<double>(integrability_samples);
    r.integrability = s1 / m;
    if (integrability_samples > 1)
      r.integrability_stderr = std::sqrt(std::max(0.0, (s2 - m * r.integrability * r.integrability) / (m - 1)) / m);
    if (!std::isfinite(r.integrability))
      throw NumericalError("ncet_drift: integrability audit diverged (mean d(g x0, x0) is not finite)");
  }
  r.path = ncet_path(space, c, omega, n);
  if (n >= 2) {
    Rng rng(audit_seed);
    std::uniform_int_distribution<long> pick(1, n - 1);
    for (int k = 0; k < audit_samples; ++k) {
      const long i = pick(rng);
      std::uniform_int_distribution<long> second(1, n - i);
      const long j = second(rng);
      State shifted = omega;
      for (long t = 0; t < i; ++t) shifted = c.base.step(shifted);
      const double whole = r.path[static_cast<std::size_t>(i + j - 1)];
      const double parts = r.path[static_cast<std::size_t>(i - 1)] + ncet_path(space, c, shifted, j).back();
      ++r.audited_triples;
      if (whole > parts + subadditive_slack(whole))
        throw NumericalError("ncet_drift: subadditivity fails at n=" + std::to_string(i) + ", m=" + std::to_string(j));
    }
  }
  auto km = kingman_from_path(r.path);
  r.drift = km.estimate;
  r.trace = km.trace;
  return r;
}

template <class Point>
struct NcetHorofunction {
  Horofunction<Point> h;
  double drift = 0.0;
  double gap = 0.0;  // |F_N/N - F_{N/2}/(N/2)|
  double epsilon = 0.0;
  std::vector<long> records;
  double diagnostic = 0.0;  // -h(g_omega ... g_{T^{N-1} omega} x0) / N
};

template <MetricSpace S, class G>
NcetHorofunction<typename S::Point> ncet_horofunction(const S& space, const IsometryCocycle<G>& c, const State& omega,
                                                      long n, const std::vector<typename S::Point>& probes = {}) {
  using P = typename S::Point;
  if (n < 2) throw PreconditionError("ncet_horofunction: N must be at least 2");
  NcetHorofunction<P> r;
  const auto path = ncet_path(space, c, omega, n);
  r.drift = path.back() / static_cast<double>(n);
  const long half = n / 2;
  r.gap = std::abs(r.drift - path[static_cast<std::size_t>(half - 1)] / static_cast<double>(half));
  const auto states = orbit(c.base, omega, n);
  if (r.drift <= kZeroDrift) {
    r.h = Horofunction<P>::zero();
  } else {
    r.epsilon = record_epsilon(r.gap);
    r.records = record_times(path, r.drift - r.epsilon);
    if (r.records.size() < 3)
      throw NumericalError("ncet_horofunction: only " + std::to_string(r.records.size()) +
                           " record times up to N=" + std::to_string(n) + "; increase the horizon");
    // the representative only depends on the last anchor; the one before it gives the Cauchy gap
    std::vector<P> anchors;
    for (std::size_t i = r.records.size() - 2; i < r.records.size(); ++i)
      anchors.push_back(ncet_orbit_point(space, c, states, r.records[i]));
    std::vector<P> probe_set = probes;
    if (probe_set.empty()) probe_set.push_back(space.basepoint());
    r.h = anchored_horofunction(space, std::move(anchors), probe_set);
  }
  r.diagnostic = -r.h(ncet_orbit_point(space, c, states, n)) / static_cast<double>(n);
  return r;
}

// Reported, never asserted: max over probes of |h_{T omega} - g_omega . h_omega|.
template <MetricSpace S, class G>
  requires IsometryOf<G, typename S::Point>
double ncet_equivariance_gap(const S& space, const IsometryCocycle<G>& c, const State& omega, long n,
                             const std::vector<typename S::Point>& probes) {
  const auto h0 = ncet_horofunction(space, c, omega, n, probes).h;
  const auto h1 = ncet_horofunction(space, c, c.base.step(omega), n, probes).h;
  const auto moved = isometry_act(space, c(omega), h0);
  double worst = 0.0;
  for (const auto& y : probes) worst = std::max(worst, std::abs(h1(y) - moved(y)));
  return worst;
}

// ---- the D-metric line and the Marcinkiewicz-Zygmund corollary

struct MzTrace {
  double p = 0.5;
  std::vector<std::pair<long, double>> trace;  // (n, |S_n| / n^{1/p}) at dyadic n
  double integrability = 0.0;  // Monte Carlo mean of |f|^p
  double integrability_stderr = 0.0;
};

inline MzTrace dmetric_mz_check(double p, const ErgodicSystem& system, const Observable& f, const State& initial,
                                long n, long integrability_samples = 10000) {
  if (!(p > 0.0 && p < 1.0)) throw PreconditionError("dmetric_mz_check: need 0 < p < 1");
  if (n < 1) throw PreconditionError("dmetric_mz_check: N must be at least 1");
  MzTrace r;
  r.p = p;
  double s1 = 0, s2 = 0;
  for (long k = 0; k < integrability_samples; ++k) {
    const double v = std::pow(std::abs(f(system.sample(static_cast<std::uint64_t>(k)))), p);
    s1 += v;
    s2 += v * v;
  }
  if (integrability_samples > 0) {
    const double m = static_cast<double>(integrability_samples);
    r.integrability = s1 / m;
    if (integrability_samples > 1)
      r.integrability_stderr = std::sqrt(std::max(0.0, (s2 - m * r.integrability * r.integrability) / (m - 1)) / m);
    if (!std::isfinite(r.integrability))
      throw NumericalError("dmetric_mz_check: integrability audit diverged (mean |f|^p is not finite)");
  }
  const auto marks = dyadic_indices(n);
  std::size_t next = 0;
  State s = initial;
  double sum = 0.0;
  for (long k = 1; k <= n; ++k) {
    sum += f(s);
    if (next < marks.size() && marks[next] == k) {
      r.trace.emplace_back(k, std::abs(sum) / std::pow(static_cast<double>(k), 1.0 / p));
      ++next;
    }
    if (k < n) s = system.step(s);
  }
  return r;
}

// Cauchy-distributed values tan(pi (u - 1/2)) clipped to [-cap, cap].
inline Observable truncated_cauchy(double cap) {
  if (!(cap > 0)) throw PreconditionError("truncated_cauchy: cap must be positive");
  return [cap](const State& s) { return std::clamp(std::tan(M_PI * (s.x - 0.5)), -cap, cap); };
}

}  // namespace met
