#include <gtest/gtest.h>

#include <cmath>

#include "met/cocycle.hpp"
#include "met/random.hpp"

using namespace met;

namespace {

Matrix diag(std::initializer_list<double> v) {
  Vector d(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

Matrix random_matrix(Rng& rng, int n) {
  std::normal_distribution<double> g;
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  return m;
}

ErgodicSystem rotation() { return ErgodicSystem::circle_rotation(std::sqrt(2.0) - 1.0); }

Matrix symplectic_form(int g) {
  Matrix j = Matrix::Zero(2 * g, 2 * g);
  j.topRightCorner(g, g) = Matrix::Identity(g, g);
  j.bottomLeftCorner(g, g) = -Matrix::Identity(g, g);
  return j;
}

}  // namespace

TEST(Product, IdentityCocycle) {
  auto c = MatrixCocycle::constant(rotation(), Matrix::Identity(3, 3));
  auto p = product(c, c.base().start(0.0), 25);
  EXPECT_LT((p.q - Matrix::Identity(3, 3)).norm(), 1e-14);
  EXPECT_LT(p.log_diag.norm(), 1e-14);
}

TEST(Product, DiagonalPowers) {
  auto c = MatrixCocycle::constant(rotation(), diag({2.0, 0.5}));
  auto p = product(c, c.base().start(0.0), 10);
  Vector ld = p.log_diag;
  std::sort(ld.data(), ld.data() + ld.size(), std::greater<>());
  EXPECT_NEAR(ld(0), 10 * std::log(2.0), 1e-12);
  EXPECT_NEAR(ld(1), -10 * std::log(2.0), 1e-12);
}

TEST(Product, UnipotentSquare) {
  Matrix a(2, 2);
  a << 1, 1, 0, 1;
  auto c = MatrixCocycle::constant(rotation(), a);
  Matrix expect(2, 2);
  expect << 1, 2, 0, 1;
  EXPECT_LT((product(c, c.base().start(0.0), 2).reconstruct() - expect).norm(), 1e-12);
}

TEST(Product, MatchesDenseProduct) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Matrix> mats{random_matrix(rng, 3), random_matrix(rng, 3)};
    auto c = MatrixCocycle::symbolic(ErgodicSystem::bernoulli_shift({0.5, 0.5}, trial), mats);
    const State w = c.base().start_at(0);
    for (long n : {1L, 7L, 30L, 50L}) {
      const Matrix dense = dense_product(c, w, n);
      const Matrix stable = product(c, w, n).reconstruct();
      EXPECT_LT((dense - stable).norm() / dense.norm(), 1e-8) << "trial " << trial << " N " << n;
    }
  }
}

TEST(Product, CocycleIdentity) {
  Rng rng(4);
  std::vector<Matrix> mats{random_matrix(rng, 3), random_matrix(rng, 3)};
  auto c = MatrixCocycle::symbolic(ErgodicSystem::bernoulli_shift({0.4, 0.6}, 4), mats);
  const State w = c.base().start_at(0);
  for (auto [n, m] : {std::pair{5L, 7L}, std::pair{12L, 20L}}) {
    auto first = product(c, w, n);
    auto second = product(c, first.end, m);
    const Matrix composed = second.reconstruct() * first.reconstruct();
    const Matrix whole = product(c, w, n + m).reconstruct();
    EXPECT_LT((composed - whole).norm() / whole.norm(), 1e-8);
  }
}

TEST(Product, NoOverflowOnLongHorizons) {
  auto c = MatrixCocycle::constant(rotation(), diag({1e3, 1e-3}));
  auto p = product(c, c.base().start(0.0), 1000000);
  EXPECT_TRUE(std::isfinite(p.log_diag.maxCoeff()));
  EXPECT_NEAR(p.log_diag.maxCoeff(), 1e6 * std::log(1e3), 1e-3);
}

TEST(Product, SingularGeneratorNamesStep) {
  Matrix z = Matrix::Zero(2, 2);
  auto c = MatrixCocycle(rotation(), 2, [z](const State& s) { return s.x > 0.5 ? z : Matrix(Matrix::Identity(2, 2)); });
  try {
    product(c, c.base().start(0.0), 10);
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
  EXPECT_THROW(product(c, c.base().start(0.0), 0), PreconditionError);
}

TEST(Structure, TagsAreChecked) {
  Matrix a(2, 2);
  a << 2, 0, 0, 0.5;
  EXPECT_NO_THROW(MatrixCocycle::constant(rotation(), a, StructureTag::symplectic(1)));
  EXPECT_NO_THROW(MatrixCocycle::constant(rotation(), a, StructureTag::determinant_one()));
  Matrix b = diag({2.0, 1.0});
  EXPECT_THROW(MatrixCocycle::constant(rotation(), b, StructureTag::symplectic(1)), PreconditionError);
  EXPECT_THROW(MatrixCocycle::constant(rotation(), b, StructureTag::orthogonal(2, 1)), PreconditionError);
  const double t = 0.7;
  Matrix boost = Matrix::Identity(3, 3);
  boost(0, 0) = boost(2, 2) = std::cosh(t);
  boost(0, 2) = boost(2, 0) = std::sinh(t);
  EXPECT_NO_THROW(MatrixCocycle::constant(rotation(), boost, StructureTag::orthogonal(2, 1)));
}

TEST(Integrability, Identity) {
  auto c = MatrixCocycle::constant(rotation(), Matrix::Identity(2, 2));
  auto r = integrability_check(c, 100);
  EXPECT_EQ(r.forward, 0.0);
  EXPECT_EQ(r.inverse, 0.0);
}

TEST(Integrability, DiagonalE) {
  auto c = MatrixCocycle::constant(rotation(), diag({M_E, 1.0 / M_E}));
  auto r = integrability_check(c, 100);
  EXPECT_NEAR(r.forward, 1.0, 1e-12);
  EXPECT_NEAR(r.inverse, 1.0, 1e-12);
}

TEST(Integrability, BernoulliChoice) {
  // A = diag(e^2, e^-2) or its inverse: log+ ||A|| = 2 and log+ ||A^-1|| = 2 on every sample
  Matrix a = diag({std::exp(2.0), std::exp(-2.0)});
  auto c = MatrixCocycle::symbolic(ErgodicSystem::bernoulli_shift({0.5, 0.5}, 11), {a, a.inverse()});
  const long samples = 4000;
  auto r = integrability_check(c, samples);
  double oracle = 0;
  for (long k = 0; k < samples; ++k) {
    Matrix m = c(c.base().sample(static_cast<std::uint64_t>(k)));
    oracle += std::max(0.0, std::log(std::max(std::abs(m(0, 0)), std::abs(m(1, 1)))));
  }
  EXPECT_NEAR(r.forward, oracle / samples, 1e-12);
  EXPECT_NEAR(r.forward, 2.0, 3.0 / std::sqrt(static_cast<double>(samples)));
  EXPECT_NEAR(r.inverse, 2.0, 3.0 / std::sqrt(static_cast<double>(samples)));
}

TEST(Functorial, DualOfDiagonal) {
  auto c = MatrixCocycle::constant(rotation(), diag({2.0, 0.5}));
  auto d = construct_functorial(c, Dual{});
  EXPECT_LT((d(c.base().start(0.1)) - diag({0.5, 2.0})).norm(), 1e-15);
}

TEST(Functorial, WedgeOfDiagonal) {
  auto c = MatrixCocycle::constant(rotation(), diag({2.0, 3.0, 5.0}));
  auto w = construct_functorial(c, Wedge{2});
  EXPECT_EQ(w.dim(), 3);
  EXPECT_LT((w(c.base().start(0.1)) - diag({6.0, 10.0, 15.0})).norm(), 1e-12);
  EXPECT_THROW(construct_functorial(c, Wedge{4}), PreconditionError);
  EXPECT_THROW(construct_functorial(c, Wedge{0}), PreconditionError);
}

TEST(Functorial, TensorOfDiagonals) {
  auto c1 = MatrixCocycle::constant(rotation(), diag({2.0, 0.5}));
  auto c2 = MatrixCocycle::constant(rotation(), diag({3.0, 1.0 / 3.0}));
  auto t = construct_functorial(c1, Tensor{c2});
  EXPECT_LT((t(c1.base().start(0.2)) - diag({6.0, 2.0 / 3.0, 1.5, 1.0 / 6.0})).norm(), 1e-14);
}

TEST(Functorial, HomIsDualTensor) {
  Rng rng(8);
  Matrix a = random_matrix(rng, 2), b = random_matrix(rng, 2);
  auto c1 = MatrixCocycle::constant(rotation(), a);
  auto c2 = MatrixCocycle::constant(rotation(), b);
  auto h = construct_functorial(c1, Hom{c2});
  EXPECT_LT((h(c1.base().start(0.0)) - kron(a.inverse().transpose(), b)).norm(), 1e-12);
}

TEST(Functorial, MismatchedBasesAreRejected) {
  auto c1 = MatrixCocycle::constant(rotation(), diag({2.0, 0.5}));
  auto c2 = MatrixCocycle::constant(ErgodicSystem::circle_rotation(0.1), diag({2.0, 0.5}));
  EXPECT_THROW(construct_functorial(c1, Tensor{c2}), PreconditionError);
  EXPECT_THROW(construct_functorial(c1, Hom{c2}), PreconditionError);
}

TEST(Functorial, DoubleDualIsIdentity) {
  Rng rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    Matrix a = random_matrix(rng, 3);
    auto c = MatrixCocycle::constant(rotation(), a);
    auto dd = construct_functorial(construct_functorial(c, Dual{}), Dual{});
    const Matrix back = dd(c.base().start(0.0));
    ASSERT_LT((back - a).norm(), 1e-12 * std::max(1.0, a.norm() * a.inverse().norm())) << "trial " << trial;
  }
}

TEST(Functorial, TopWedgeOfDeterminantOne) {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a = random_matrix(rng, 4);
    a /= std::pow(std::abs(a.determinant()), 0.25);
    if (a.determinant() < 0) a.row(0) *= -1;
    auto c = MatrixCocycle::constant(rotation(), a, StructureTag::determinant_one());
    auto w = construct_functorial(c, Wedge{4});
    EXPECT_NEAR(w(c.base().start(0.0))(0, 0), 1.0, 1e-12);
  }
}

TEST(Functorial, DualPreservesSymplecticTag) {
  Matrix a(4, 4);
  a << 2, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0.5, 0, 0, 0, -0.5, 1;
  const Matrix j = symplectic_form(2);
  ASSERT_LT((a.transpose() * j * a - j).norm(), 1e-12);
  auto c = MatrixCocycle::constant(rotation(), a, StructureTag::symplectic(2));
  auto d = construct_functorial(c, Dual{});
  EXPECT_EQ(d.tag().kind, StructureKind::symplectic);
  const Matrix m = d.checked(c.base().start(0.0));
  EXPECT_LT((m.transpose() * j * m - j).norm(), 1e-10);
}

TEST(Functorial, WedgeBasisIsLexicographic) {
  Rng rng(12);
  Matrix a = random_matrix(rng, 3);
  const Matrix w = compound_matrix(a, 2);
  // rows and columns ordered {0,1}, {0,2}, {1,2}
  EXPECT_NEAR(w(1, 2), a(0, 1) * a(2, 2) - a(0, 2) * a(2, 1), 1e-12);
  EXPECT_NEAR(w(2, 0), a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0), 1e-12);
}

TEST(DeterminantLine, ConstantDiagonal) {
  auto c = MatrixCocycle::constant(rotation(), diag({2.0, 0.5, 3.0}));
  auto d = determinant_line(c);
  EXPECT_EQ(d.dim(), 1);
  auto p = product(d, c.base().start(0.0), 1000);
  EXPECT_NEAR(p.log_diag(0) / 1000, std::log(3.0), 1e-12);
}

TEST(DeterminantLine, DeterminantOneCocycle) {
  Matrix a(2, 2);
  a << 2, 1, 1, 1;
  auto c = MatrixCocycle::constant(rotation(), a, StructureTag::determinant_one());
  auto p = product(determinant_line(c), c.base().start(0.0), 10000);
  EXPECT_NEAR(p.log_diag(0) / 10000, 0.0, 1e-10);
}

TEST(DeterminantLine, BernoulliBalancedDeterminants) {
  auto sys = ErgodicSystem::bernoulli_shift({0.5, 0.5}, 13);
  auto c = MatrixCocycle::symbolic(sys, {diag({2.0, 1.0}), diag({0.5, 1.0})});
  const long n = 100000;
  auto p = product(determinant_line(c), sys.start_at(0), n);
  // random walk with steps +-log 2
  EXPECT_NEAR(p.log_diag(0) / n, 0.0, 4 * std::log(2.0) / std::sqrt(static_cast<double>(n)));
  auto b = birkhoff_average(sys, [&](const State& s) { return std::log(std::abs(c(s).determinant())); }, sys.start_at(0), n);
  EXPECT_NEAR(p.log_diag(0) / n, b.value, 1e-12);
}
