#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "met/cat0.hpp"
#include "met/cli/config.hpp"
#include "met/cli/result_table.hpp"
#include "met/cocycle.hpp"
#include "met/dynsys.hpp"
#include "met/horofunctions.hpp"
#include "met/oseledets.hpp"
#include "met/spaces.hpp"
#include "met/symspace.hpp"

#ifndef MET_VERSION
#define MET_VERSION "0.1.0"
#endif

namespace met::cli {

// ---- building blocks from configs

inline ErgodicSystem make_system(const Config& c, std::uint64_t seed, int default_symbols) {
  const std::string kind = c.str("system", "bernoulli");
  if (kind == "bernoulli") {
    std::vector<double> p = c.reals("probabilities", std::vector<double>(static_cast<std::size_t>(std::max(1, default_symbols)),
                                                                         1.0 / std::max(1, default_symbols)));
    return ErgodicSystem::bernoulli_shift(p, seed);
  }
  if (kind == "rotation") return ErgodicSystem::circle_rotation(c.real("angle"), seed);
  if (kind == "doubling") return ErgodicSystem::doubling_map(seed);
  if (kind == "markov") {
    const Matrix t = c.matrix(c.str("transition"));
    const auto st = c.reals("stationary");
    return ErgodicSystem::markov_shift(t, Eigen::Map<const Vector>(st.data(), static_cast<Eigen::Index>(st.size())), seed);
  }
  throw PreconditionError("config: field 'system' has unknown value '" + kind + "'");
}

inline State initial_state(const Config& c, const ErgodicSystem& sys, std::uint64_t seed) {
  switch (sys.kind()) {
    case SystemKind::bernoulli_shift:
    case SystemKind::markov_shift:
      return sys.start_at(c.integer("start", 0));
    default:
      return sys.start(c.real("start", to_unit(hash_at(seed, 1))));
  }
}

inline StructureTag make_tag(const Config& c) {
  const auto w = c.has("structure") ? c.list("structure") : std::vector<std::string>{"none"};
  if (w[0] == "none") return StructureTag::none();
  if (w[0] == "det1") return StructureTag::determinant_one();
  if (w[0] == "symplectic" && w.size() == 2) return StructureTag::symplectic(std::stoi(w[1]));
  if (w[0] == "orthogonal" && w.size() == 3) return StructureTag::orthogonal(std::stoi(w[1]), std::stoi(w[2]));
  throw PreconditionError("config: field 'structure' must be none, det1, symplectic <g> or orthogonal <p> <q>");
}

inline MatrixCocycle make_cocycle(const Config& c, const ErgodicSystem& sys) {
  auto mats = c.matrices();
  const auto tag = make_tag(c);
  MatrixCocycle base = mats.size() == 1 ? MatrixCocycle::constant(sys, mats[0], tag)
                                        : MatrixCocycle::symbolic(sys, mats, tag);
  const std::string f = c.str("functor", "none");
  if (f == "none") return base;
  if (f == "dual") return construct_functorial(base, Dual{});
  if (f == "wedge2") return construct_functorial(base, Wedge{2});
  if (f == "tensor") return construct_functorial(base, Tensor{base});
  if (f == "determinant") return determinant_line(base);
  throw PreconditionError("config: field 'functor' must be none, dual, wedge2, tensor or determinant");
}

inline SpectrumMethod make_method(const Config& c) {
  const std::string m = c.str("method", "qr");
  if (m == "qr") return SpectrumMethod::qr;
  if (m == "svd") return SpectrumMethod::svd_wedge;
  throw PreconditionError("config: field 'method' must be qr or svd");
}

inline int symbol_hint(const Config& c) { return c.has("matrices") ? static_cast<int>(c.list("matrices").size()) : 2; }

inline Vector unit_alpha(const Config& c) {
  const auto a = c.reals("alpha");
  Vector v = Eigen::Map<const Vector>(a.data(), static_cast<Eigen::Index>(a.size()));
  if (v.size() < 2) throw PreconditionError("config: field 'alpha' needs at least two entries");
  v.array() -= v.mean();
  if (v.norm() == 0) throw PreconditionError("config: field 'alpha' must not be constant");
  return v / v.norm();
}

// ---- experiments, one seed each

inline ResultTable run_lyapunov(const Config& c, std::uint64_t seed) {
  ResultTable t;
  const auto sys = make_system(c, seed, symbol_hint(c));
  const auto coc = make_cocycle(c, sys);
  const auto sp = lyapunov_spectrum(coc, initial_state(c, sys, seed), c.positive_integer("n"), make_method(c));
  for (int i = 0; i < sp.exponents.size(); ++i) t.add(seed, "exponent", i + 1, sp.exponents(i));
  for (std::size_t g = 0; g < sp.groups.size(); ++g) t.add(seed, "multiplicity", static_cast<long>(g + 1), sp.groups[g].multiplicity);
  t.add(seed, "exponent_sum", 0, sp.exponents.sum());
  t.add(seed, "low_confidence", 0, sp.low_confidence ? 1.0 : 0.0);
  return t;
}

inline ResultTable run_filtration(const Config& c, std::uint64_t seed) {
  ResultTable t;
  const auto sys = make_system(c, seed, symbol_hint(c));
  const auto coc = make_cocycle(c, sys);
  const long n = c.positive_integer("n");
  const State w = initial_state(c, sys, seed);
  const auto sp = lyapunov_spectrum(coc, w, n);
  const auto f = forward_filtration(coc, w, n, sp);
  for (std::size_t i = 0; i < f.dims.size(); ++i) {
    t.add(seed, "level_dimension", static_cast<long>(i + 1), f.dims[i]);
    t.add(seed, "level_exponent", static_cast<long>(i + 1), f.exponents[i]);
  }
  if (sys.invertible() && sp.groups.size() > 1) {
    const auto s = oseledets_splitting(coc, w, n);
    for (std::size_t i = 0; i < s.principal_angles.size(); ++i)
      t.add(seed, "intersection_angle", static_cast<long>(i + 1),
            s.principal_angles[i].size() ? s.principal_angles[i].maxCoeff() : 0.0);
  }
  return t;
}

inline ResultTable run_splitting(const Config& c, std::uint64_t seed) {
  ResultTable t;
  const auto sys = make_system(c, seed, symbol_hint(c));
  const auto coc = make_cocycle(c, sys);
  const int dim_e = static_cast<int>(c.positive_integer("dim_e", 1));
  SplittingOptions opt;
  opt.max_terms = static_cast<int>(c.positive_integer("n", 50));
  opt.tempered_horizon = c.positive_integer("probe_k", 4096);
  const auto m = splitting_map(BlockCocycle::from_upper(coc, dim_e), initial_state(c, sys, seed), opt);
  for (int i = 0; i < m.tau.rows(); ++i)
    for (int j = 0; j < m.tau.cols(); ++j) t.add(seed, "tau", i * m.tau.cols() + j + 1, m.tau(i, j));
  t.add(seed, "residual", 0, m.residual);
  t.add(seed, "last_increment", 0, m.last_increment);
  for (auto [k, v] : m.temperedness) t.add(seed, "temperedness", k, v);
  return t;
}

inline ResultTable run_regularity(const Config& c, std::uint64_t seed) {
  ResultTable t;
  const auto sys = make_system(c, seed, symbol_hint(c));
  const auto coc = make_cocycle(c, sys);
  const long n = c.positive_integer("n");
  const long probe = c.positive_integer("probe", n / 2);
  const auto rep = regularity_report(pullback_metric_sequence(coc, initial_state(c, sys, seed), n), {probe});
  t.add(seed, "theta", 0, rep.theta);
  for (const auto& r : rep.rows) {
    if (std::isfinite(r.step_ratio)) t.add(seed, "step_ratio", r.n, r.step_ratio);
    t.add(seed, "cartan_oscillation", r.n, r.cartan_oscillation);
    t.add(seed, "tracking_error", r.n, r.tracking_error);
  }
  const auto& p = rep.at(probe);
  t.add(seed, "probe_step_ratio", probe, p.step_ratio);
  t.add(seed, "probe_cartan_oscillation", probe, p.cartan_oscillation);
  t.add(seed, "probe_tracking_ratio", probe, rep.theta > 0 ? p.tracking_error / rep.theta : p.tracking_error);
  return t;
}

inline ResultTable run_busemann(const Config& c, std::uint64_t seed) {
  ResultTable t;
  const Vector alpha = unit_alpha(c);
  const auto b = make_busemann(alpha);
  const int dim = static_cast<int>(alpha.size());
  const long points = c.positive_integer("points", 50);
  const double t_max = c.positive_real("t_max", 1000.0);
  const double scale = c.positive_real("scale", 1.0);
  Rng rng(seed);
  double worst = 0, worst_x = 0, worst_inv = 0;
  for (long k = 1; k <= points; ++k) {
    const auto p = SpdPoint::from_matrix(random_spd(dim, rng, scale));
    const double h = busemann_value(b, p);
    const auto o = busemann_limit_oracle(b, p, t_max);
    Matrix nm = Matrix::Identity(dim, dim);
    int s0 = 0;
    for (int sz : b.partition) {
      for (int i = 0; i < s0; ++i)
        for (int j = s0; j < s0 + sz; ++j) nm(i, j) = random_gaussian(1, 1, rng)(0, 0);
      s0 += sz;
    }
    const double moved = busemann_value(b, Matrix(nm * p.matrix() * nm.transpose()));
    t.add(seed, "closed_form", k, h);
    t.add(seed, "oracle", k, o.value);
    t.add(seed, "oracle_increment", k, o.increment);
    t.add(seed, "oracle_extrapolated", k, o.extrapolated);
    worst = std::max(worst, std::abs(h - o.value));
    worst_x = std::max(worst_x, std::abs(h - o.extrapolated));
    worst_inv = std::max(worst_inv, std::abs(moved - h));
  }
  t.add(seed, "max_difference", 0, worst);
  t.add(seed, "max_difference_extrapolated", 0, worst_x);
  t.add(seed, "max_nalpha_change", 0, worst_inv);
  return t;
}

template <MetricSpace S>
void add_karlsson_rows(ResultTable& t, std::uint64_t seed, const KarlssonResult<typename S::Point>& r) {
  const double l = r.drift.drift;
  t.add(seed, "drift", 0, l);
  t.add(seed, "tail_slope", 0, r.drift.tail_slope);
  t.add(seed, "record_count", 0, static_cast<double>(r.records.size()));
  t.add(seed, "lower_violation", 0, r.lower_violation);
  double rel = 0.0;
  for (auto [k, h] : r.values) {
    t.add(seed, "h", k, h);
    if (l > 0) rel = std::max(rel, (h + l * static_cast<double>(k)) / (l * static_cast<double>(k)));
  }
  t.add(seed, "relative_upper_violation", 0, rel);
}

inline ResultTable run_drift(const Config& c, std::uint64_t seed) {
  ResultTable t;
  const long n = c.positive_integer("n");
  const std::string space = c.str("space", "spd");
  if (space == "spd") {
    const Matrix g = c.matrices()[0];
    SpdSpace s{static_cast<int>(g.rows())};
    const SpdIsometry iso(g);
    add_karlsson_rows<SpdSpace>(t, seed, karlsson_horofunction(s, SelfMap<SpdPoint>([iso](const SpdPoint& p) { return iso(p); }), n));
  } else if (space == "euclidean") {
    const auto v = c.reals("translation");
    EuclideanSpace s{static_cast<int>(v.size())};
    const Vector shift = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    add_karlsson_rows<EuclideanSpace>(t, seed, karlsson_horofunction(s, SelfMap<Vector>([shift](const Vector& x) { return Vector(x + shift); }), n));
  } else if (space == "dline") {
    DMetricLine s(c.real("p", 0.5));
    const double shift = c.real("translation");
    auto r = drift(s, SelfMap<double>([shift](double x) { return x + shift; }), n);
    t.add(seed, "drift", 0, r.drift);
    t.add(seed, "tail_slope", 0, r.tail_slope);
  } else {
    throw PreconditionError("config: field 'space' must be spd, euclidean or dline");
  }
  return t;
}

inline ResultTable run_ncet(const Config& c, std::uint64_t seed) {
  ResultTable t;
  const auto mats = c.matrices();
  const auto sys = make_system(c, seed, static_cast<int>(mats.size()));
  std::vector<SpdIsometry> isos;
  for (const auto& m : mats) isos.emplace_back(m);
  const auto coc = symbolic_isometry_cocycle(sys, isos);
  SpdSpace s{static_cast<int>(mats[0].rows())};
  const long n = c.positive_integer("n");
  const State w = initial_state(c, sys, seed);
  const auto d = ncet_drift(s, coc, w, n, c.positive_integer("integrability_samples", 1000));
  for (auto [k, v] : d.trace) t.add(seed, "drift_trace", k, v);
  t.add(seed, "drift", 0, d.drift);
  t.add(seed, "integrability", 0, d.integrability, d.integrability_stderr);
  const auto sp = lyapunov_spectrum(MatrixCocycle::symbolic(sys, mats), w, n);
  t.add(seed, "matrix_top_exponent", 0, sp.exponents(0));
  t.add(seed, "drift_minus_twice_top", 0, d.drift - 2.0 * sp.exponents(0));
  t.add(seed, "drift_minus_twice_norm", 0, d.drift - 2.0 * sp.exponents.norm());
  const auto h = ncet_horofunction(s, coc, w, n);
  t.add(seed, "horofunction_diagnostic", 0, h.diagnostic);
  return t;
}

template <class P>
void add_tracking_rows(ResultTable& t, std::uint64_t seed, const TrackingReport<P>& r) {
  t.add(seed, "drift", 0, r.drift);
  t.add(seed, "degenerate", 0, r.degenerate ? 1.0 : 0.0);
  t.add(seed, "levels", 0, static_cast<double>(r.levels.size()));
  t.add(seed, "bounds_hold", 0, r.bounds_hold() ? 1.0 : 0.0);
  for (std::size_t i = 0; i < r.levels.size(); ++i) t.add(seed, "record_time", static_cast<long>(i + 1), static_cast<double>(r.levels[i].record));
  for (auto [k, v] : r.tracking) t.add(seed, "tracking_error", k, v);
}

inline ResultTable run_tracking(const Config& c, std::uint64_t seed) {
  ResultTable t;
  const long n = c.positive_integer("n");
  const std::string space = c.str("space", "spd");
  TrackingOptions opt;
  if (c.has("schedule")) opt.schedule = c.reals("schedule");
  if (space == "spd" && c.has("alpha")) {
    // x_n = exp(n X + E_n) with X traceless of unit norm in a seeded frame and E_n
    // traceless in the same frame, |E_n| <= noise
    const Vector alpha = unit_alpha(c);
    const int d = static_cast<int>(alpha.size());
    const double noise = c.real("noise", 0.0);
    if (noise < 0) throw PreconditionError("config: field 'noise' must be nonnegative");
    Rng rng(seed);
    const Matrix frame = random_orthogonal(d, rng);
    std::vector<SpdPoint> xs;
    for (long k = 0; k <= n; ++k) {
      Vector e = Vector::Zero(d);
      if (noise > 0) {
        e = random_gaussian(d, 1, rng).col(0);
        e.array() -= e.mean();
        e *= noise * to_unit(rng()) / e.norm();
      }
      xs.push_back(SpdPoint::from_eigen(frame, static_cast<double>(k) * alpha + e));
    }
    add_tracking_rows(t, seed, km_tracking_ray(SpdSpace{d}, xs, opt));
  } else if (space == "spd") {
    const Matrix g = c.matrices()[0];
    const SpdIsometry iso(g);
    add_tracking_rows(t, seed, km_tracking_ray(SpdSpace{static_cast<int>(g.rows())},
                                               SelfMap<SpdPoint>([iso](const SpdPoint& p) { return iso(p); }), n, opt));
  } else if (space == "euclidean") {
    const auto v = c.reals("translation");
    const Vector shift = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    EuclideanSpace s{static_cast<int>(v.size())};
    const auto r = km_tracking_ray(s, SelfMap<Vector>([shift](const Vector& x) { return Vector(x + shift); }), n, opt);
    add_tracking_rows(t, seed, r);
    if (!r.degenerate) t.add(seed, "direction_error", 0, ((r.ray_end - r.ray_start) / r.ray_length - shift / shift.norm()).norm());
  } else {
    throw PreconditionError("config: field 'space' must be spd or euclidean");
  }
  return t;
}

inline std::vector<int> cycle_map(int m) {
  std::vector<int> p(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) p[static_cast<std::size_t>(i)] = (i + 1) % m;
  return p;
}

inline ResultTable run_direct_integral(const Config& c, std::uint64_t seed) {
  ResultTable t;
  const long n = c.positive_integer("n");
  if (c.has("translation")) {
    const auto tr = c.reals("translation");
    const int m = static_cast<int>(tr.size());
    auto di = DirectIntegral<EuclideanSpace>::uniform(EuclideanSpace{1}, m);
    std::vector<EuclideanIsometry> maps;
    for (double v : tr) maps.push_back(EuclideanIsometry::translation(Vector::Constant(1, v)));
    add_tracking_rows(t, seed, km_tracking_ray(di, induced_orbit(di, maps, cycle_map(m), n)));
  } else {
    const auto mats = c.matrices();
    const int m = static_cast<int>(mats.size());
    auto di = DirectIntegral<SpdSpace>::uniform(SpdSpace{static_cast<int>(mats[0].rows())}, m);
    std::vector<SpdIsometry> maps;
    for (const auto& g : mats) maps.emplace_back(g);
    add_tracking_rows(t, seed, km_tracking_ray(di, induced_orbit(di, maps, cycle_map(m), n)));
  }
  return t;
}

// f_n(w) = d(x0, g_w g_{Tw} ... g_{T^{n-1} w} x0) over the cyclic base w -> w + 1.
inline std::vector<std::vector<double>> cyclic_isometry_table(const std::vector<Matrix>& mats, long n) {
  const int m = static_cast<int>(mats.size());
  SpdSpace s{static_cast<int>(mats[0].rows())};
  std::vector<SpdIsometry> inv;
  for (const auto& g : mats) inv.push_back(SpdIsometry(g).inverse());
  std::vector<std::vector<double>> table(static_cast<std::size_t>(m));
  for (int w = 0; w < m; ++w) {
    SpdPoint z = s.basepoint();
    for (long k = 0; k < n; ++k) {
      z = inv[static_cast<std::size_t>((w + k) % m)](z);
      table[static_cast<std::size_t>(w)].push_back(distance_to_identity(z));
    }
  }
  return table;
}

inline ResultTable run_mean_kingman(const Config& c, std::uint64_t seed) {
  ResultTable t;
  const auto mats = c.matrices();
  const long n = c.positive_integer("n");
  const int m = static_cast<int>(mats.size());
  const auto r = mean_kingman_check(std::vector<double>(static_cast<std::size_t>(m), 1.0 / m), cycle_map(m),
                                    cyclic_isometry_table(mats, n));
  t.add(seed, "drift", 0, r.drift);
  for (auto [k, v] : r.trace) {
    t.add(seed, "l2_error", k, v);
    if (r.drift > 0) t.add(seed, "relative_l2_error", k, v / r.drift);
  }
  return t;
}

inline ResultTable run_mz_check(const Config& c, std::uint64_t seed) {
  ResultTable t;
  const auto sys = make_system(c, seed, 2);
  const auto r = dmetric_mz_check(c.real("p", 0.5), sys, truncated_cauchy(c.positive_real("cap", 1e12)),
                                  initial_state(c, sys, seed), c.positive_integer("n"),
                                  c.positive_integer("integrability_samples", 10000));
  for (auto [k, v] : r.trace) t.add(seed, "ratio", k, v);
  t.add(seed, "integrability", 0, r.integrability, r.integrability_stderr);
  return t;
}

using ExperimentFn = std::function<ResultTable(const Config&, std::uint64_t)>;

inline const std::map<std::string, ExperimentFn>& experiments() {
  static const std::map<std::string, ExperimentFn> table{
      {"lyapunov", run_lyapunov},       {"filtration", run_filtration},
      {"splitting", run_splitting},     {"regularity", run_regularity},
      {"busemann", run_busemann},       {"drift", run_drift},
      {"ncet", run_ncet},               {"tracking", run_tracking},
      {"direct-integral", run_direct_integral}, {"mean-kingman", run_mean_kingman},
      {"mz-check", run_mz_check}};
  return table;
}

inline unsigned worker_count(std::size_t jobs) {
  unsigned w = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MET_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) w = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<std::size_t>(w, std::max<std::size_t>(1, jobs)));
}

// Seeds run in parallel; assembly is ordered by (seed, quantity, index).
inline ResultTable run_experiment(const Config& c) {
  const auto start = std::chrono::steady_clock::now();
  const auto& fn = experiments().at(c.str("experiment"));
  const auto seeds = c.seeds();
  std::vector<ResultTable> parts(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        parts[i] = fn(c, seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned workers = worker_count(seeds.size());
  for (unsigned k = 1; k < workers; ++k) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  ResultTable out;
  for (const auto& p : parts) out.append(p);
  out.sort();
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(c.hash()));
  out.set_meta("config_hash", hash);
  out.set_meta("experiment", c.str("experiment"));
  out.set_meta("version", MET_VERSION);
  for (const auto& [k, v] : c.values())
    if (k.rfind("expect.", 0) == 0 || k.rfind("tol.", 0) == 0 || k.rfind("bound.", 0) == 0) out.set_meta(k, v);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", wall);
  out.set_meta("wall_time", buf);
  return out;
}

}  // namespace met::cli
