#include <gtest/gtest.h>

#include <cmath>

#include "met/horofunctions.hpp"
#include "met/oseledets.hpp"
#include "met/random.hpp"

using namespace met;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

EuclideanIsometry random_planar_isometry(Rng& rng) {
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  std::normal_distribution<double> g;
  const double t = u(rng);
  Matrix r(2, 2);
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  if (g(rng) < 0) r.col(1) *= -1;
  return EuclideanIsometry(r, vec2(3 * g(rng), 3 * g(rng)));
}

std::vector<Vector> planar_probes(Rng& rng, int count) {
  std::normal_distribution<double> g;
  std::vector<Vector> out;
  for (int i = 0; i < count; ++i) out.push_back(vec2(5 * g(rng), 5 * g(rng)));
  return out;
}

}  // namespace

TEST(Spaces, MetricAudits) {
  Rng rng(1);
  EuclideanSpace e{3};
  std::vector<Vector> pts;
  for (int i = 0; i < 50; ++i) pts.push_back(random_gaussian(3, 1, rng));
  EXPECT_TRUE(audit_metric(e, pts, 1000).ok);

  SpdSpace s{3};
  std::vector<SpdPoint> spd;
  for (int i = 0; i < 50; ++i) spd.push_back(SpdPoint::from_matrix(random_spd(3, rng)));
  EXPECT_TRUE(audit_metric(s, spd, 1000).ok);

  DMetricLine d(0.5);
  std::vector<double> line;
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) line.push_back(10 * g(rng));
  EXPECT_TRUE(audit_metric(d, line, 1000).ok);

  FiniteMetricSpace graph(4, {{0, 1, 1.0}, {1, 2, 2.0}, {2, 3, 1.0}, {0, 3, 5.0}});
  EXPECT_EQ(graph.distance(0, 3), 4.0);
  EXPECT_TRUE(audit_metric(graph, std::vector<int>{0, 1, 2, 3}, 1000).ok);
}

TEST(Spaces, DMetricRejectsBadExponent) {
  EXPECT_THROW(DMetricLine(0.0), PreconditionError);
  EXPECT_THROW(DMetricLine(1.5), PreconditionError);
}

TEST(Spaces, TreeDistances) {
  // root 0, chain 0-1-2 and a branch 1-3
  MetricTree t({-1, 0, 1, 1}, {0.0, 1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(t.distance(t.vertex(2), t.vertex(3)), 5.0);
  EXPECT_DOUBLE_EQ(t.distance(t.vertex(0), t.vertex(2)), 3.0);
  auto m = t.midpoint(t.vertex(2), t.vertex(3));
  EXPECT_NEAR(t.distance(m, t.vertex(2)), 2.5, 1e-12);
  EXPECT_NEAR(t.distance(m, t.vertex(3)), 2.5, 1e-12);
  std::vector<TreePoint> pts;
  for (int v = 0; v < 4; ++v)
    for (double f : {0.25, 0.5, 1.0}) pts.push_back(t.geodesic(t.vertex(0), t.vertex(v), f));
  EXPECT_TRUE(audit_metric(t, pts, 1000).ok);
}

TEST(Spaces, EuclideanIsometryChecksOrthogonality) {
  EXPECT_THROW(EuclideanIsometry(diag2(2, 1), vec2(0, 0)), PreconditionError);
  Rng rng(2);
  auto g = random_planar_isometry(rng);
  auto probes = planar_probes(rng, 20);
  EXPECT_LT(isometry_defect(EuclideanSpace{2}, g, probes, 100), 1e-9);
  for (const auto& x : probes) EXPECT_LT((g.inverse()(g(x)) - x).norm(), 1e-12);
}

TEST(Phi, BasepointAnchor) {
  EuclideanSpace e{2};
  auto h = phi_embed(e, e.basepoint());
  EXPECT_EQ(h(e.basepoint()), 0.0);
  EXPECT_NEAR(h(vec2(3, 4)), 5.0, 1e-12);
}

TEST(Phi, FarPointsApproachLinearFunctional) {
  EuclideanSpace e{2};
  for (double r : {1e2, 1e4, 1e6}) {
    auto h = phi_embed(e, vec2(r, 0));
    EXPECT_NEAR(h(vec2(1, 0)), -1.0, 1e-12);
    EXPECT_NEAR(h(vec2(1, 1)), -1.0, 1.0 / r);
  }
}

TEST(Phi, Injective) {
  Rng rng(3);
  EuclideanSpace e{2};
  auto pts = planar_probes(rng, 1000);
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    auto hx = phi_embed(e, pts[i]);
    auto hy = phi_embed(e, pts[i + 1]);
    const double diff = std::max(std::abs(hx(pts[i]) - hy(pts[i])), std::abs(hx(pts[i + 1]) - hy(pts[i + 1])));
    ASSERT_GT(diff, 1e-9);
  }
}

TEST(Horofunction, InvariantsOnProbes) {
  Rng rng(4);
  EuclideanSpace e{2};
  auto probes = planar_probes(rng, 100);
  probes.push_back(e.basepoint());
  auto h = anchored_horofunction(e, {vec2(10, 1), vec2(100, 3), vec2(1000, 7)}, probes);
  EXPECT_TRUE(audit_horofunction(e, h, probes).ok);
  EXPECT_GT(h.cauchy_gap, 0.0);
  EXPECT_TRUE(audit_horofunction(e, linear_horofunction(vec2(0.6, 0.8), e.basepoint()), probes).ok);
  EXPECT_THROW(linear_horofunction(vec2(1, 1), e.basepoint()), PreconditionError);
}

TEST(Action, IdentityAndTranslation) {
  EuclideanSpace line{1};
  Vector x(1), t(1);
  x << 2.0;
  t << 3.5;
  auto h = phi_embed(line, x);
  auto id = EuclideanIsometry::translation(Vector::Zero(1));
  auto moved = isometry_act(line, EuclideanIsometry::translation(t), h);
  auto expected = phi_embed(line, Vector(x + t));
  for (double y = -10; y <= 10; y += 0.5) {
    Vector p(1);
    p << y;
    EXPECT_NEAR(isometry_act(line, id, h)(p), h(p), 1e-12);
    EXPECT_NEAR(moved(p), expected(p), 1e-9);
  }
}

TEST(Action, CompatibleWithPhiAndGroupLaw) {
  Rng rng(5);
  EuclideanSpace e{2};
  for (int trial = 0; trial < 1000; ++trial) {
    auto g1 = random_planar_isometry(rng), g2 = random_planar_isometry(rng);
    auto probes = planar_probes(rng, 5);
    const Vector x = probes[0];
    auto h = phi_embed(e, x);
    auto lhs = isometry_act(e, g1 * g2, h);
    auto rhs = isometry_act(e, g1, isometry_act(e, g2, h));
    auto phi = phi_embed(e, g1(x));
    auto acted = isometry_act(e, g1, h);
    for (const auto& y : probes) {
      ASSERT_NEAR(lhs(y), rhs(y), 1e-9);
      ASSERT_NEAR(acted(y), phi(y), 1e-9);
    }
  }
}

TEST(Cocycle, CocycleIdentityOfF) {
  Rng rng(6);
  EuclideanSpace e{2};
  for (int trial = 0; trial < 1000; ++trial) {
    auto g1 = random_planar_isometry(rng), g2 = random_planar_isometry(rng);
    auto anchors = planar_probes(rng, 3);
    auto h = anchored_horofunction(e, anchors, {});
    const double whole = horofunction_cocycle(e, g1 * g2, h);
    const double parts = horofunction_cocycle(e, g1, isometry_act(e, g2, h)) + horofunction_cocycle(e, g2, h);
    ASSERT_NEAR(whole, parts, 1e-9);
  }
}

TEST(Cocycle, DisplacementBound) {
  Rng rng(7);
  EuclideanSpace e{2};
  for (int trial = 0; trial < 1000; ++trial) {
    auto g = random_planar_isometry(rng);
    auto h = anchored_horofunction(e, planar_probes(rng, 2), {});
    const double moved = e.distance(e.basepoint(), g(e.basepoint()));
    ASSERT_LE(horofunction_cocycle(e, g, h), moved + 1e-9);
    auto extremal = phi_embed(e, g.inverse()(e.basepoint()));
    ASSERT_NEAR(horofunction_cocycle(e, g, extremal), moved, 1e-12);
  }
}

TEST(Drift, Examples) {
  EuclideanSpace e{3};
  Vector v(3);
  v << 1, 2, 2;
  auto t = drift(e, SelfMap<Vector>([v](const Vector& x) { return Vector(x + v); }), 1000);
  EXPECT_NEAR(t.drift, 3.0, 1e-12);

  EuclideanSpace line{1};
  auto half = drift(line, SelfMap<Vector>([](const Vector& x) { return Vector(0.5 * x); }), 1000);
  EXPECT_EQ(half.drift, 0.0);

  DMetricLine d(0.5);
  const double c = 2.0;
  auto dl = drift(d, SelfMap<double>([c](double x) { return x + c; }), 10000);
  EXPECT_NEAR(dl.drift, std::sqrt(c / 10000.0), 1e-12);
  EXPECT_LT(dl.drift, 0.02);
}

TEST(Drift, AuditRejectsExpansion) {
  EuclideanSpace line{1};
  Vector one(1);
  one << 1.0;
  EXPECT_THROW(drift(line, SelfMap<Vector>([](const Vector& x) { return Vector(2 * x); }), 100, {one, Vector(2 * one)}),
               PreconditionError);
  EXPECT_THROW(drift(line, SelfMap<Vector>([](const Vector& x) { return x; }), 0), PreconditionError);
}

TEST(Karlsson, StraightOrbit) {
  EuclideanSpace line{1};
  Vector one(1);
  one << 1.0;
  auto r = karlsson_horofunction(line, SelfMap<Vector>([one](const Vector& x) { return Vector(x + one); }), 1024);
  EXPECT_NEAR(r.drift.drift, 1.0, 1e-12);
  for (auto [k, v] : r.values) EXPECT_NEAR(v, -static_cast<double>(k), 1e-9);
  Vector y(1);
  y << -3.0;
  EXPECT_NEAR(r.h(y), 3.0, 1e-9);
}

TEST(Karlsson, ZeroDriftGivesZeroFunction) {
  EuclideanSpace line{1};
  auto r = karlsson_horofunction(line, SelfMap<Vector>([](const Vector& x) { return Vector(0.5 * x); }), 256);
  EXPECT_EQ(r.h.kind, HorofunctionKind::zero);
  Vector y(1);
  y << 4.0;
  EXPECT_EQ(r.h(y), 0.0);
}

TEST(Karlsson, SpdDiagonalMap) {
  SpdSpace s{2};
  SpdIsometry g(diag2(2.0, 0.5));
  const long n = 1024;
  auto r = karlsson_horofunction(s, SelfMap<SpdPoint>([g](const SpdPoint& p) { return g(p); }), n);
  const double l = 2.0 * std::sqrt(2.0) * std::log(2.0);
  EXPECT_NEAR(l, 1.960516, 1e-6);
  EXPECT_NEAR(r.drift.drift, l, 1e-9);
  bool seen = false;
  for (auto [k, v] : r.values) {
    if (k == 512) {
      seen = true;
      EXPECT_LE(v, -l * 512 + 0.01 * l * 512);
    }
  }
  EXPECT_TRUE(seen);
  EXPECT_LE(r.lower_violation, 1e-9);
}

TEST(Karlsson, LowerBoundOnRandomSemiContraction) {
  EuclideanSpace e{2};
  Matrix refl = diag2(1, -1);
  EuclideanIsometry g(refl, vec2(1.5, 0.7));  // glide reflection along the x axis
  auto k = karlsson_horofunction(e, SelfMap<Vector>([g](const Vector& x) { return g(x); }), 4096);
  EXPECT_NEAR(k.drift.drift, 1.5, 1e-3);
  EXPECT_LE(k.lower_violation, 1e-9);
  EXPECT_LE(k.upper_violation, 0.01 * 1.5 * 2048);
  EXPECT_GE(k.records.size(), 3u);
}

TEST(Karlsson, NearlySublinearOrbit) {
  // a_n = n^{0.999} on the D-line: a tiny positive Fekete infimum
  DMetricLine d(0.999);
  auto f = SelfMap<double>([](double x) { return x + 1.0; });
  auto r = karlsson_horofunction(d, f, 64);
  EXPECT_GE(r.records.size(), 3u);
  EXPECT_LE(r.lower_violation, 1e-9);
}

TEST(Ncet, TranslationsOfTheLine) {
  EuclideanSpace line{1};
  auto sys = ErgodicSystem::bernoulli_shift({0.3, 0.7}, 3);
  Vector a(1), b(1);
  a << -0.2;
  b << 0.8;
  auto c = symbolic_isometry_cocycle<EuclideanIsometry>(sys, {EuclideanIsometry::translation(a), EuclideanIsometry::translation(b)});
  auto r = ncet_drift(line, c, sys.start_at(0), 100000);
  EXPECT_NEAR(r.drift, 0.5, 2e-2);
  EXPECT_GT(r.integrability, 0.0);
  EXPECT_GT(r.audited_triples, 0);
}

TEST(Ncet, DeterministicTranslation) {
  EuclideanSpace line{1};
  auto rot = ErgodicSystem::circle_rotation(0.1);
  Vector v(1);
  v << 2.0;
  auto c = constant_isometry_cocycle(rot, EuclideanIsometry::translation(v));
  auto r = ncet_drift(line, c, rot.start(0.0), 1000);
  EXPECT_NEAR(r.drift, 2.0, 1e-12);
  auto h = ncet_horofunction(line, c, rot.start(0.0), 1000);
  EXPECT_NEAR(h.diagnostic, 2.0, 1e-12);
  Vector y(1);
  y << 5.0;
  EXPECT_NEAR(h.h(y), -5.0, 1e-9);
}

TEST(Ncet, ConstantSpdIsometryMatchesDrift) {
  SpdSpace s{2};
  auto rot = ErgodicSystem::circle_rotation(0.1);
  SpdIsometry g(diag2(3.0, 1.0 / 3.0));
  auto c = constant_isometry_cocycle(rot, g);
  auto r = ncet_drift(s, c, rot.start(0.0), 2000);
  auto d = drift(s, SelfMap<SpdPoint>([g](const SpdPoint& p) { return g(p); }), 2000);
  EXPECT_NEAR(r.drift, d.drift, 1e-9);
}

TEST(Ncet, BernoulliSl2PairIsTwiceTheCartanSlope) {
  // d(I, g g^t) = 2 |r(g)|_2 and |r(g)|_2 = sqrt(2) lambda_1 for SL(2), so l = 2 sqrt(2) lambda_1
  Matrix a(2, 2), b(2, 2);
  a << 2, 1, 1, 1;
  b << 1, 1, 1, 2;
  auto sys = ErgodicSystem::bernoulli_shift({0.5, 0.5}, 5);
  auto c = symbolic_isometry_cocycle<SpdIsometry>(sys, {SpdIsometry(a), SpdIsometry(b)});
  const long n = 100000;
  auto r = ncet_drift(SpdSpace{2}, c, sys.start_at(0), n);
  auto m = MatrixCocycle::symbolic(sys, {a, b});
  const double lambda = lyapunov_spectrum(m, sys.start_at(0), n).exponents(0);
  EXPECT_NEAR(r.drift, 2.0 * std::sqrt(2.0) * lambda, 5e-2);
}

TEST(Ncet, HorofunctionOfConstantDiagonalIsBusemann) {
  SpdSpace s{2};
  auto rot = ErgodicSystem::circle_rotation(0.1);
  SpdIsometry g(diag2(2.0, 0.5));
  auto c = constant_isometry_cocycle(rot, g);
  Rng rng(8);
  std::vector<SpdPoint> probes;
  for (int i = 0; i < 20; ++i) probes.push_back(SpdPoint::from_matrix(random_spd(2, rng)));
  auto h = ncet_horofunction(s, c, rot.start(0.0), 2000, probes);
  Vector alpha(2);
  alpha << 1.0, -1.0;
  auto b = make_busemann(alpha / std::sqrt(2.0));
  for (const auto& p : probes) {
    EXPECT_NEAR(h.h(p), busemann_value(b, p), 1e-3);
    EXPECT_NEAR(busemann_limit_oracle(b, p, 1000).value, busemann_value(b, p), 1e-6);
  }
  EXPECT_NEAR(h.diagnostic, h.drift, 1e-9);
}

TEST(Ncet, ZeroDriftGivesZeroRepresentative) {
  EuclideanSpace e{2};
  auto rot = ErgodicSystem::circle_rotation(0.1);
  Matrix r(2, 2);
  r << 0, -1, 1, 0;
  auto c = constant_isometry_cocycle(rot, EuclideanIsometry(r, vec2(0, 0)));
  auto h = ncet_horofunction(e, c, rot.start(0.0), 100);
  EXPECT_EQ(h.h.kind, HorofunctionKind::zero);
}

TEST(Ncet, EquivarianceGapIsReported) {
  EuclideanSpace line{1};
  auto sys = ErgodicSystem::bernoulli_shift({0.5, 0.5}, 9);
  Vector a(1), b(1);
  a << 1.0;
  b << 0.2;
  auto c = symbolic_isometry_cocycle<EuclideanIsometry>(sys, {EuclideanIsometry::translation(a), EuclideanIsometry::translation(b)});
  std::vector<Vector> probes;
  for (double y : {-2.0, 0.0, 3.0}) probes.push_back(Vector::Constant(1, y));
  const double gap = ncet_equivariance_gap(line, c, sys.start_at(0), 4096, probes);
  EXPECT_TRUE(std::isfinite(gap));
}

TEST(DMetric, BordificationCollapses) {
  DMetricLine d(0.5);
  for (double sign : {-1.0, 1.0}) {
    auto h = phi_embed(d, sign * 1e6);
    for (double y = -1; y <= 1; y += 0.125) EXPECT_LT(std::abs(h(y)), 1e-3);
  }
}

TEST(DMetric, MzZeroObservable) {
  auto sys = ErgodicSystem::bernoulli_shift({0.5, 0.5}, 1);
  auto r = dmetric_mz_check(0.5, sys, [](const State&) { return 0.0; }, sys.start_at(0), 1000);
  for (auto [n, v] : r.trace) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(dmetric_mz_check(1.0, sys, [](const State&) { return 0.0; }, sys.start_at(0), 10), PreconditionError);
}

TEST(DMetric, MzBoundedMeanZero) {
  auto sys = ErgodicSystem::bernoulli_shift({0.5, 0.5}, 2);
  auto f = [](const State& s) { return s.symbol == 0 ? 1.0 : -1.0; };
  auto r = dmetric_mz_check(0.5, sys, f, sys.start_at(0), 1 << 16);
  for (auto [n, v] : r.trace) EXPECT_LE(v, 1.0 / static_cast<double>(n) + 1e-15);
  EXPECT_LT(r.trace.back().second, 1e-4);
}

TEST(DMetric, MzHeavyTail) {
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto sys = ErgodicSystem::bernoulli_shift({0.5, 0.5}, seed);
    auto r = dmetric_mz_check(0.5, sys, truncated_cauchy(1e12), sys.start_at(0), 1000000);
    worst = std::max(worst, r.trace.back().second);
    EXPECT_TRUE(std::isfinite(r.integrability));
  }
  EXPECT_LT(worst, 0.1);
}
