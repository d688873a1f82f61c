#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace met {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream: the value at (seed, counter) does not depend on call order.
inline std::uint64_t hash_at(std::uint64_t seed, std::uint64_t counter) {
  return splitmix64(splitmix64(seed) ^ (counter * 0xd1b54a32d192ed03ULL));
}

// Uniform in [0, 1) with 53 random bits.
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

using Rng = std::mt19937_64;

inline Eigen::MatrixXd random_gaussian(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

inline Eigen::MatrixXd random_orthogonal(int n, Rng& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_gaussian(n, n, rng));
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

// Random symmetric traceless matrix with unit Frobenius norm.
inline Eigen::MatrixXd random_direction(int n, Rng& rng) {
  Eigen::MatrixXd g = random_gaussian(n, n, rng);
  Eigen::MatrixXd s = 0.5 * (g + g.transpose());
  s -= (s.trace() / n) * Eigen::MatrixXd::Identity(n, n);
  return s / s.norm();
}

// exp of a symmetric matrix through its eigen-decomposition.
inline Eigen::MatrixXd sym_exp(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  return es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
         es.eigenvectors().transpose();
}

// Random SPD matrix exp(scale * X) with X symmetric traceless of unit norm.
inline Eigen::MatrixXd random_spd(int n, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return sym_exp(scale * u(rng) * random_direction(n, rng));
}

// Random matrix of determinant one.
inline Eigen::MatrixXd random_sl(int n, Rng& rng) {
  Eigen::MatrixXd g = random_gaussian(n, n, rng);
  double det = g.determinant();
  if (det < 0) {
    g.row(0) = -g.row(0);
    det = -det;
  }
  return g / std::pow(det, 1.0 / n);
}

inline Eigen::MatrixXd standard_symplectic_form(int g) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * g, 2 * g);
  j.topRightCorner(g, g) = Eigen::MatrixXd::Identity(g, g);
  j.bottomLeftCorner(g, g) = -Eigen::MatrixXd::Identity(g, g);
  return j;
}

// Product of elementary symplectic generators [[I, S], [0, I]], [[I, 0], [S, I]]
// and diag(M, M^{-T}).
inline Eigen::MatrixXd random_symplectic(int g, Rng& rng, double scale = 1.0) {
  using Eigen::MatrixXd;
  auto sym = [&] {
    MatrixXd a = scale * random_gaussian(g, g, rng);
    return MatrixXd(0.5 * (a + a.transpose()));
  };
  MatrixXd id = MatrixXd::Identity(g, g);
  MatrixXd upper = MatrixXd::Identity(2 * g, 2 * g);
  upper.topRightCorner(g, g) = sym();
  MatrixXd lower = MatrixXd::Identity(2 * g, 2 * g);
  lower.bottomLeftCorner(g, g) = sym();
  MatrixXd m = id + 0.5 * scale * random_gaussian(g, g, rng);
  MatrixXd block = MatrixXd::Zero(2 * g, 2 * g);
  block.topLeftCorner(g, g) = m;
  block.bottomRightCorner(g, g) = m.inverse().transpose();
  return upper * block * lower;
}

}  // namespace met
