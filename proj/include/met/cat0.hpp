#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "met/dynsys.hpp"
#include "met/error.hpp"
#include "met/horofunctions.hpp"
#include "met/spaces.hpp"

namespace met {

// ---- comparison geometry

// d(x, m)^2 - [ (d(x,y1)^2 + d(x,y2)^2)/2 - d(y1,y2)^2/4 ]; nonpositive in CAT(0).
template <GeodesicSpace S>
double parallelogram_defect(const S& space, const typename S::Point& x, const typename S::Point& y1,
                            const typename S::Point& y2) {
  const auto m = space.geodesic(y1, y2, 0.5);
  const double dm = space.distance(x, m);
  const double d1 = space.distance(x, y1), d2 = space.distance(x, y2), d12 = space.distance(y1, y2);
  return dm * dm - (0.5 * (d1 * d1 + d2 * d2) - 0.25 * d12 * d12);
}

// d(x, p_t) - d(x', p'_t) for p_t = geodesic(y, z, t) and its Euclidean comparison point.
template <GeodesicSpace S>
double comparison_defect(const S& space, const typename S::Point& x, const typename S::Point& y,
                         const typename S::Point& z, double t) {
  const double dxy = space.distance(x, y), dxz = space.distance(x, z), dyz = space.distance(y, z);
  const double cmp2 = (1.0 - t) * dxy * dxy + t * dxz * dxz - t * (1.0 - t) * dyz * dyz;
  return space.distance(x, space.geodesic(y, z, t)) - std::sqrt(std::max(0.0, cmp2));
}

// f(eps) = 2 g^{-1}(1 - eps) for the CAT(0) modulus g(e) = (1 - e^2/4)^{1/2}
inline double uniform_convexity_defect(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("uniform_convexity_defect: need 0 < eps < 1");
  return 4.0 * std::sqrt(2.0 * eps - eps * eps);
}

struct ReverseTriangle {
  double epsilon = 0.0;    // largest eps with (1 - eps) d(x,y) + d(y,z) <= d(x,z)
  double deviation = 0.0;  // d(y, y')
  double bound = 0.0;      // f(eps) d(x,y)
  bool holds = true;
};

template <GeodesicSpace S>
ReverseTriangle reverse_triangle_check(const S& space, const typename S::Point& x, const typename S::Point& y,
                                       const typename S::Point& z) {
  const double dxy = space.distance(x, y), dxz = space.distance(x, z), dyz = space.distance(y, z);
  if (!(dxy > 0.0)) throw PreconditionError("reverse_triangle_check: need d(x,y) > 0");
  if (dxz < dxy) throw PreconditionError("reverse_triangle_check: need d(x,z) >= d(x,y)");
  ReverseTriangle r;
  r.epsilon = std::max(0.0, 1.0 - (dxz - dyz) / dxy);
  if (r.epsilon >= 1.0) throw PreconditionError("reverse_triangle_check: hypothesis needs eps >= 1");
  const auto yp = space.geodesic(x, z, dxy / dxz);
  r.deviation = space.distance(y, yp);
  r.bound = r.epsilon > 0.0 ? uniform_convexity_defect(r.epsilon) * dxy : 0.0;
  r.holds = r.deviation <= r.bound + 1e-9 * (1.0 + dxy);
  return r;
}

// ---- Karlsson-Margulis tracking ray

struct TrackingLevel {
  double epsilon = 0.0;
  long k = 1;        // (A - eps) n <= a_n <= (A + eps) n holds for K <= n <= N
  long record = 0;   // N_i
  double radius = 0.0;     // a_{N_i}
  double deviation = 0.0;  // d(gamma_{i-1}(r), gamma_i(r)) at r = a_{N_{i-1}}
  double bound = 0.0;      // f(2 eps / (A + eps)) r
};

template <class Point>
struct TrackingReport {
  double drift = 0.0;
  bool degenerate = false;
  bool drift_audited = false;     // Fekete infimum on an audited subadditive sequence
  bool horizon_truncated = true;  // finite horizon: deepest level that fits
  long horizon = 0;
  std::vector<TrackingLevel> levels;
  Point ray_start{};
  Point ray_end{};
  double ray_length = 0.0;
  std::vector<std::pair<long, double>> tracking;  // (k, d(x_k, gamma(A k)) / k) at dyadic k

  std::vector<long> record_times() const {
    std::vector<long> out;
    for (const auto& l : levels) out.push_back(l.record);
    return out;
  }
  bool bounds_hold(double slack = 1e-9) const {
    for (const auto& l : levels)
      if (l.deviation > l.bound + slack * (1.0 + l.radius)) return false;
    return true;
  }
  double error_at(long k) const {
    for (const auto& [n, v] : tracking)
      if (n == k) return v;
    throw PreconditionError("tracking report has no entry for k=" + std::to_string(k));
  }
};

template <GeodesicSpace S>
typename S::Point ray_at(const S& space, const TrackingReport<typename S::Point>& r, double t) {
  if (r.degenerate || r.ray_length <= 0.0) return r.ray_start;
  return space.geodesic(r.ray_start, r.ray_end, t / r.ray_length);
}

struct TrackingOptions {
  std::vector<double> schedule;  // explicit eps_i; empty selects f(2 eps_i / (A + eps_i)) = 2^{-i}
  int max_levels = 30;
  double zero_drift = 1e-6;
};

// eps with f(2 eps / (A + eps)) = target, by bisection on (0, A).
inline double schedule_epsilon(double a, double target) {
  double lo = 0.0, hi = a;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double u = 2.0 * mid / (a + mid);
    if (u < 1.0 && uniform_convexity_defect(u) <= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

template <GeodesicSpace S>
TrackingReport<typename S::Point> km_tracking_ray(const S& space, const std::vector<typename S::Point>& xs,
                                                  const TrackingOptions& opt = {}) {
  using P = typename S::Point;
  const long n = static_cast<long>(xs.size()) - 1;
  if (n < 100) throw PreconditionError("km_tracking_ray: need an orbit x_0..x_N with N >= 100");
  TrackingReport<P> r;
  r.horizon = n;
  r.ray_start = xs[0];
  r.ray_end = xs[0];
  std::vector<double> a(static_cast<std::size_t>(n));
  for (long k = 1; k <= n; ++k) a[static_cast<std::size_t>(k - 1)] = space.distance(xs[0], xs[static_cast<std::size_t>(k)]);
  const SubadditiveSequence seq(a);
  if (seq.audit().ok) {
    r.drift = std::max(0.0, fekete_limit(seq, false).infimum);
    r.drift_audited = true;
  } else {
    r.drift = a.back() / static_cast<double>(n);
  }
  const long half = n / 2;
  const double second_half_slope = (a.back() - a[static_cast<std::size_t>(half - 1)]) / static_cast<double>(n - half);
  const double scale = 1.0 + a.back() / static_cast<double>(n);
  r.degenerate = r.drift <= opt.zero_drift * scale || second_half_slope <= opt.zero_drift * scale;
  auto dyadic = dyadic_indices(n);
  if (r.degenerate) {
    r.drift = 0.0;
    for (long k : dyadic) r.tracking.emplace_back(k, a[static_cast<std::size_t>(k - 1)] / static_cast<double>(k));
    return r;
  }
  const double big_a = r.drift;

  // levels whose K_i fits the horizon
  std::vector<TrackingLevel> all;
  const int levels = opt.schedule.empty() ? opt.max_levels : static_cast<int>(opt.schedule.size());
  for (int i = 1; i <= levels; ++i) {
    TrackingLevel lv;
    lv.epsilon = opt.schedule.empty() ? schedule_epsilon(big_a, std::ldexp(1.0, -i)) : opt.schedule[i - 1];
    if (!(lv.epsilon > 0.0)) throw PreconditionError("km_tracking_ray: schedule entries must be positive");
    long last_bad = 0;
    for (long k = 1; k <= n; ++k)
      if (std::abs(a[static_cast<std::size_t>(k - 1)] - big_a * static_cast<double>(k)) > lv.epsilon * static_cast<double>(k))
        last_bad = k;
    lv.k = last_bad + 1;
    if (lv.k >= n) break;
    all.push_back(lv);
  }
  auto records_of = [&](double eps) { return record_times(a, big_a - eps); };

  // deepest chain K_i <= N_{i-1} < N_i, N_i > K_{i+1}, with N_i a record at level i
  for (int depth = static_cast<int>(all.size()); depth >= 1; --depth) {
    std::vector<TrackingLevel> chain(all.begin(), all.begin() + depth);
    long prev = 0;
    bool ok = true;
    for (int i = 0; i < depth && ok; ++i) {
      const auto rec = records_of(chain[i].epsilon);
      const long floor_i = std::max(prev, chain[i].k - 1);
      long pick = -1;
      if (i + 1 < depth) {
        const long need = std::max(floor_i, chain[i + 1].k);
        for (long t : rec)
          if (t > need) {
            pick = t;
            break;
          }
      } else {
        for (long t : rec)
          if (t > floor_i) pick = t;
      }
      if (pick < 0) {
        ok = false;
      } else {
        chain[i].record = pick;
        chain[i].radius = a[static_cast<std::size_t>(pick - 1)];
        prev = pick;
      }
    }
    if (!ok) continue;
    for (int i = 1; i < depth; ++i) {
      const double rr = chain[i - 1].radius;
      const auto& far = xs[static_cast<std::size_t>(chain[i].record)];
      const auto on_next = space.geodesic(xs[0], far, rr / chain[i].radius);
      chain[i].deviation = space.distance(xs[static_cast<std::size_t>(chain[i - 1].record)], on_next);
      const double u = 2.0 * chain[i].epsilon / (big_a + chain[i].epsilon);
      chain[i].bound = u < 1.0 ? uniform_convexity_defect(u) * rr : std::numeric_limits<double>::infinity();
    }
    r.levels = std::move(chain);
    r.horizon_truncated = true;
    r.ray_end = xs[static_cast<std::size_t>(r.levels.back().record)];
    r.ray_length = r.levels.back().radius;
    for (long k : dyadic) {
      const auto g = ray_at(space, r, big_a * static_cast<double>(k));
      r.tracking.emplace_back(k, space.distance(xs[static_cast<std::size_t>(k)], g) / static_cast<double>(k));
    }
    return r;
  }
  throw NumericalError("km_tracking_ray: no record time past K_1 within N=" + std::to_string(n) +
                       " (largest usable level 0; " + std::to_string(all.size()) +
                       " levels have K_i inside the horizon); increase the horizon");
}

// Orbit of a semi-contraction from the basepoint, audited, then tracked.
template <GeodesicSpace S>
TrackingReport<typename S::Point> km_tracking_ray(const S& space, const SelfMap<typename S::Point>& f, long n,
                                                  const TrackingOptions& opt = {}) {
  const auto xs = self_map_orbit(space, f, n);
  audit_semi_contraction(space, f, xs, {});
  return km_tracking_ray(space, xs, opt);
}

// ---- direct integrals over a finite base

template <GeodesicSpace Fiber>
class DirectIntegral {
 public:
  using FiberPoint = typename Fiber::Point;
  using Point = std::vector<FiberPoint>;

  DirectIntegral(std::vector<double> weights, std::vector<Fiber> fibers, Point base_section)
      : weights_(std::move(weights)), fibers_(std::move(fibers)), base_(std::move(base_section)) {
    if (weights_.empty() || weights_.size() != fibers_.size() || base_.size() != weights_.size())
      throw PreconditionError("DirectIntegral: weights, fibers and basepoint section must have equal size");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0)) throw PreconditionError("DirectIntegral: weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw PreconditionError("DirectIntegral: weights must sum to 1");
  }

  // identical fibers with their own basepoints
  static DirectIntegral uniform(const Fiber& fiber, int m) {
    return DirectIntegral(std::vector<double>(static_cast<std::size_t>(m), 1.0 / m),
                          std::vector<Fiber>(static_cast<std::size_t>(m), fiber),
                          Point(static_cast<std::size_t>(m), fiber.basepoint()));
  }

  int size() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& weights() const { return weights_; }
  const Fiber& fiber(int i) const { return fibers_[static_cast<std::size_t>(i)]; }
  Point basepoint() const { return base_; }

  double distance(const Point& s, const Point& t) const {
    check(s);
    check(t);
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      const double d = fibers_[i].distance(s[i], t[i]);
      acc += weights_[i] * d * d;
    }
    return std::sqrt(acc);
  }

  Point geodesic(const Point& s, const Point& t, double u) const {
    check(s);
    check(t);
    Point out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < weights_.size(); ++i) out.push_back(fibers_[i].geodesic(s[i], t[i], u));
    return out;
  }

  Point midpoint(const Point& s, const Point& t) const { return geodesic(s, t, 0.5); }

 private:
  void check(const Point& s) const {
    if (s.size() != weights_.size())
      throw PreconditionError("DirectIntegral: section has " + std::to_string(s.size()) + " values for " +
                              std::to_string(weights_.size()) + " base points");
  }

  std::vector<double> weights_;
  std::vector<Fiber> fibers_;
  Point base_;
};

template <GeodesicSpace Fiber>
double direct_integral_distance(const DirectIntegral<Fiber>& di, const typename DirectIntegral<Fiber>::Point& s,
                                const typename DirectIntegral<Fiber>::Point& t) {
  return di.distance(s, t);
}

inline void check_weight_preserving(const std::vector<double>& weights, const std::vector<int>& base_map) {
  const std::size_t m = weights.size();
  if (base_map.size() != m) throw PreconditionError("base map size does not match the base");
  std::vector<char> hit(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    const int j = base_map[i];
    if (j < 0 || static_cast<std::size_t>(j) >= m || hit[static_cast<std::size_t>(j)])
      throw PreconditionError("base map is not a permutation");
    hit[static_cast<std::size_t>(j)] = 1;
    if (std::abs(weights[static_cast<std::size_t>(j)] - weights[i]) > 1e-12)
      throw PreconditionError("base map does not preserve weights at " + std::to_string(i));
  }
}

// (T* s)(w) = T_w^{-1}( s(T w) ), with T_w : X_w -> X_{T w}
template <GeodesicSpace Fiber, class G>
typename DirectIntegral<Fiber>::Point induced_action_step(const DirectIntegral<Fiber>& di,
                                                          const std::vector<G>& fiber_maps,
                                                          const std::vector<int>& base_map,
                                                          const typename DirectIntegral<Fiber>::Point& s) {
  check_weight_preserving(di.weights(), base_map);
  if (static_cast<int>(fiber_maps.size()) != di.size() || static_cast<int>(s.size()) != di.size())
    throw PreconditionError("induced_action_step: one fiber map and one section value per base point");
  typename DirectIntegral<Fiber>::Point out;
  out.reserve(s.size());
  for (std::size_t w = 0; w < s.size(); ++w)
    out.push_back(fiber_maps[w].inverse()(s[static_cast<std::size_t>(base_map[w])]));
  return out;
}

template <GeodesicSpace Fiber, class G>
std::vector<typename DirectIntegral<Fiber>::Point> induced_orbit(const DirectIntegral<Fiber>& di,
                                                                 const std::vector<G>& fiber_maps,
                                                                 const std::vector<int>& base_map, long n) {
  std::vector<typename DirectIntegral<Fiber>::Point> out;
  out.reserve(static_cast<std::size_t>(n + 1));
  out.push_back(di.basepoint());
  for (long k = 0; k < n; ++k) out.push_back(induced_action_step(di, fiber_maps, base_map, out.back()));
  return out;
}

// ---- mean Kingman theorem on a finite base

struct MeanKingmanReport {
  double drift = 0.0;                            // Fekete limit of a_n = <1, f_n>
  std::vector<std::pair<long, double>> trace;   // (n, ||f_n / n - A||_{L^2})
  long audited = 0;
};

// table[w][n-1] = f_n(w); U^n f_m (w) = f_m(T^n w).
inline MeanKingmanReport mean_kingman_check(const std::vector<double>& weights, const std::vector<int>& base_map,
                                            const std::vector<std::vector<double>>& table) {
  check_weight_preserving(weights, base_map);
  const std::size_t m = weights.size();
  if (table.size() != m || table[0].empty()) throw PreconditionError("mean_kingman_check: one f row per base point");
  const long n = static_cast<long>(table[0].size());
  for (const auto& row : table)
    if (static_cast<long>(row.size()) != n) throw PreconditionError("mean_kingman_check: ragged table");
  MeanKingmanReport r;
  // shift[k][w] = T^k w
  std::vector<std::vector<int>> shift(static_cast<std::size_t>(n + 1), std::vector<int>(m));
  for (std::size_t w = 0; w < m; ++w) shift[0][w] = static_cast<int>(w);
  for (long k = 1; k <= n; ++k)
    for (std::size_t w = 0; w < m; ++w)
      shift[static_cast<std::size_t>(k)][w] = base_map[static_cast<std::size_t>(shift[static_cast<std::size_t>(k - 1)][w])];
  auto f = [&](long k, std::size_t w) { return table[w][static_cast<std::size_t>(k - 1)]; };
  for (std::size_t w = 0; w < m; ++w)
    for (long k = 1; k <= n; ++k) {
      if (f(k, w) < 0.0)
        throw PreconditionError("mean_kingman_check: f_n < 0 at n=" + std::to_string(k) + ", omega=" + std::to_string(w));
      for (long j = 1; k + j <= n; ++j) {
        const double whole = f(k + j, w);
        const double parts = f(k, w) + f(j, static_cast<std::size_t>(shift[static_cast<std::size_t>(k)][w]));
        ++r.audited;
        if (whole > parts + subadditive_slack(whole))
          throw PreconditionError("mean_kingman_check: subadditivity fails at n=" + std::to_string(k) +
                                  ", m=" + std::to_string(j) + ", omega=" + std::to_string(w));
      }
    }
  std::vector<double> a(static_cast<std::size_t>(n), 0.0);
  for (long k = 1; k <= n; ++k)
    for (std::size_t w = 0; w < m; ++w) a[static_cast<std::size_t>(k - 1)] += weights[w] * f(k, w);
  r.drift = fekete_limit(SubadditiveSequence(a), false).infimum;
  for (long k : dyadic_indices(n)) {
    double acc = 0.0;
    for (std::size_t w = 0; w < m; ++w) {
      const double e = f(k, w) / static_cast<double>(k) - r.drift;
      acc += weights[w] * e * e;
    }
    r.trace.emplace_back(k, std::sqrt(acc));
  }
  return r;
}

}  // namespace met
