#include <gtest/gtest.h>

#include <cmath>

#include "met/cocycle.hpp"
#include "met/dynsys.hpp"

using namespace met;

TEST(Orbit, DoublingMapDoubles) {
  auto sys = ErgodicSystem::doubling_map(1);
  auto o = orbit(sys, sys.start(0.1), 3);
  EXPECT_NEAR(o[0].x, 0.1, 1e-15);
  EXPECT_NEAR(o[1].x, 0.2, 1e-15);
  EXPECT_NEAR(o[2].x, 0.4, 1e-15);
}

TEST(Orbit, RotationByQuarter) {
  auto sys = ErgodicSystem::circle_rotation(0.25);
  auto o = orbit(sys, sys.start(0.0), 4);
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(o[k].x, 0.25 * k);
}

TEST(Orbit, BernoulliIsDeterministic) {
  auto a = ErgodicSystem::bernoulli_shift({0.5, 0.5}, 42);
  auto b = ErgodicSystem::bernoulli_shift({0.5, 0.5}, 42);
  auto oa = orbit(a, a.start_at(0), 1000);
  auto ob = orbit(b, b.start_at(0), 1000);
  for (std::size_t k = 0; k < oa.size(); ++k) {
    EXPECT_EQ(oa[k].symbol, ob[k].symbol);
    EXPECT_EQ(oa[k].x, ob[k].x);
  }
}

TEST(Orbit, BernoulliShiftIsInvertible) {
  auto sys = ErgodicSystem::bernoulli_shift({0.3, 0.7}, 5);
  State s = sys.start_at(10);
  State t = sys.step_back(sys.step(s));
  EXPECT_EQ(t.time, s.time);
  EXPECT_EQ(t.symbol, s.symbol);
}

TEST(Orbit, RejectsInitialOutsideInterval) {
  auto sys = ErgodicSystem::doubling_map(0);
  EXPECT_THROW(sys.start(1.5), DomainError);
  EXPECT_THROW(orbit(sys, sys.start(0.2), 0), PreconditionError);
}

TEST(Systems, ValidateParameters) {
  EXPECT_THROW(ErgodicSystem::bernoulli_shift({0.5, 0.6}, 0), PreconditionError);
  EXPECT_THROW(ErgodicSystem::bernoulli_shift({1.5, -0.5}, 0), PreconditionError);
  Eigen::MatrixXd p(2, 2);
  p << 0.9, 0.1, 0.5, 0.5;
  Eigen::VectorXd pi(2);
  pi << 5.0 / 6.0, 1.0 / 6.0;
  EXPECT_NO_THROW(ErgodicSystem::markov_shift(p, pi, 0));
  pi << 0.5, 0.5;
  EXPECT_THROW(ErgodicSystem::markov_shift(p, pi, 0), PreconditionError);
}

TEST(Birkhoff, DoublingMapMean) {
  auto sys = ErgodicSystem::doubling_map(3);
  auto r = birkhoff_average(sys, [](const State& s) { return s.x; }, sys.start(0.1234), 1000000);
  EXPECT_NEAR(r.value, 0.5, 2e-3);
}

TEST(Birkhoff, RotationCosine) {
  auto sys = ErgodicSystem::circle_rotation(std::sqrt(2.0) - 1.0);
  auto r = birkhoff_average(sys, [](const State& s) { return std::cos(2 * M_PI * s.x); }, sys.start(0.0), 1000000);
  EXPECT_NEAR(r.value, 0.0, 2e-3);
}

TEST(Birkhoff, ConstantObservableIsExact) {
  auto sys = ErgodicSystem::bernoulli_shift({0.2, 0.8}, 9);
  auto r = birkhoff_average(sys, [](const State&) { return 1.75; }, sys.start_at(0), 1000);
  EXPECT_EQ(r.value, 1.75);
  auto m = birkhoff_average(sys, [](const State&) { return 2.0; }, sys.start_at(0), 1000, true);
  EXPECT_NEAR(m.value, 2.0, 1e-14);
}

TEST(Birkhoff, MultiplicativeDivergenceIsFlagged) {
  auto sys = ErgodicSystem::bernoulli_shift({0.5, 0.5}, 1);
  auto r = birkhoff_average(sys, [](const State& s) { return static_cast<double>(s.symbol); }, sys.start_at(0), 1000, true);
  EXPECT_TRUE(r.diverged);
  EXPECT_TRUE(std::isinf(r.log_mean));
  EXPECT_THROW(birkhoff_average(sys, [](const State&) { return -1.0; }, sys.start_at(0), 10, true), DomainError);
}

TEST(Birkhoff, ConsistencyAcrossHorizons) {
  const long n = 100000;
  const double c = 5.0;
  auto f = [](const State& s) { return std::sin(2 * M_PI * s.x) + s.x * s.x; };
  std::vector<ErgodicSystem> systems{ErgodicSystem::circle_rotation(std::sqrt(2.0) - 1.0),
                                     ErgodicSystem::doubling_map(4),
                                     ErgodicSystem::bernoulli_shift({0.5, 0.5}, 4)};
  for (const auto& sys : systems) {
    State s0 = sys.kind() == SystemKind::bernoulli_shift ? sys.start_at(0) : sys.start(0.3);
    const double a = birkhoff_average(sys, f, s0, n).value;
    const double b = birkhoff_average(sys, f, s0, 2 * n).value;
    EXPECT_LE(std::abs(a - b), c / std::sqrt(static_cast<double>(n)));
  }
}

TEST(Fekete, AdditiveSequence) {
  std::vector<double> a;
  for (int n = 1; n <= 500; ++n) a.push_back(n);
  auto r = fekete_limit(SubadditiveSequence(a));
  EXPECT_NEAR(r.infimum, 1.0, 1e-15);
  EXPECT_NEAR(r.gap, 0.0, 1e-15);
}

TEST(Fekete, SqrtCorrection) {
  std::vector<double> a;
  for (int n = 1; n <= 10000; ++n) a.push_back(n + std::sqrt(static_cast<double>(n)));
  auto r = fekete_limit(SubadditiveSequence(a));
  EXPECT_LE(r.infimum, 1.01);
  EXPECT_GE(r.infimum, 1.0);
}

TEST(Fekete, LogarithmicSequenceIsSublinear) {
  // log n itself fails subadditivity at n = 1 (log 2 > 0 + 0); log(1 + n) is the subadditive version
  std::vector<double> a;
  for (int n = 1; n <= 10000; ++n) a.push_back(std::log1p(static_cast<double>(n)));
  auto r = fekete_limit(SubadditiveSequence(a));
  EXPECT_NEAR(r.infimum, 0.0, 1e-3);
  std::vector<double> bad;
  for (int n = 1; n <= 100; ++n) bad.push_back(std::log(static_cast<double>(n)));
  EXPECT_THROW(fekete_limit(SubadditiveSequence(bad)), PreconditionError);
}

TEST(Fekete, MinusInfinityFlag) {
  std::vector<double> a;
  for (int n = 1; n <= 100; ++n) a.push_back(-1e12 * n);
  auto r = fekete_limit(SubadditiveSequence(a));
  EXPECT_TRUE(r.minus_infinity);
}

TEST(Fekete, ViolationIsReported) {
  std::vector<double> a{1.0, 5.0, 3.0};
  EXPECT_THROW(fekete_limit(SubadditiveSequence(a)), PreconditionError);
}

TEST(Kingman, AdditiveFamily) {
  auto sys = ErgodicSystem::bernoulli_shift({0.5, 0.5}, 2);
  auto r = kingman_estimate(sys, [](long n, const State&) { return 0.3 * n; }, sys.start_at(0), 1000);
  EXPECT_NEAR(r.estimate, 0.3, 1e-12);
  EXPECT_EQ(r.trace.back().first, 1000);
}

TEST(Kingman, OperatorNormOfDiagonalPowers) {
  auto sys = ErgodicSystem::circle_rotation(0.1);
  auto r = kingman_estimate(sys, [](long n, const State&) { return n * std::log(3.0); }, sys.start(0.0), 1000);
  EXPECT_NEAR(r.estimate, std::log(3.0), 1e-6);
}

TEST(Kingman, TranslationsOfTheLine) {
  // f(w) = symbol - 0.2 with P(1) = 0.7 has mean 0.5
  auto sys = ErgodicSystem::bernoulli_shift({0.3, 0.7}, 8);
  auto f = [&](long n, const State& s) {
    double sum = 0;
    State t = s;
    for (long k = 0; k < n; ++k) {
      sum += t.symbol - 0.2;
      t = sys.step(t);
    }
    return std::abs(sum);
  };
  auto r = kingman_estimate(sys, f, sys.start_at(0), 20000);
  EXPECT_NEAR(r.estimate, 0.5, 2e-2);
}

TEST(Kingman, AuditNamesViolation) {
  auto sys = ErgodicSystem::bernoulli_shift({0.5, 0.5}, 2);
  try {
    kingman_estimate(sys, [](long n, const State&) { return static_cast<double>(n * n); }, sys.start_at(0), 100);
    FAIL() << "expected a precondition error";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("i="), std::string::npos);
  }
}

TEST(Kingman, AgreesWithFeketeOnIntegratedSequence) {
  Matrix a(2, 2), b(2, 2);
  a << 2, 1, 1, 1;
  b << 1, 1, 1, 2;
  auto sys = ErgodicSystem::bernoulli_shift({0.5, 0.5}, 21);
  auto c = MatrixCocycle::symbolic(sys, {a, b});
  const long n = 10000;
  auto norms = [&](const State& w) {
    std::vector<double> out;
    ProductAccumulator acc(2);
    State s = w;
    for (long k = 0; k < n; ++k) {
      acc.push(c(s));
      s = sys.step(s);
      out.push_back(acc.singular().log_sigma(0));
    }
    return out;
  };
  const auto path = norms(sys.start_at(0));
  const auto km = kingman_from_path(path);
  std::vector<double> mean(n, 0.0);
  const int orbits = 16;
  for (int j = 0; j < orbits; ++j) {
    auto p = norms(sys.start_at(1000000 * (j + 1)));
    for (long k = 0; k < n; ++k) mean[k] += p[k] / orbits;
  }
  auto fk = fekete_limit(SubadditiveSequence(mean), false);
  EXPECT_NEAR(km.estimate, fk.infimum, 5e-2);
}

TEST(Dyadic, IndicesIncludeEnd) {
  auto d = dyadic_indices(10);
  std::vector<long> expect{1, 2, 4, 8, 10};
  EXPECT_EQ(d, expect);
}
