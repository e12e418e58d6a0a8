#pragma once

// Shared fixtures for the test binaries: seeded random draws and dense-matrix
// oracles that never touch the library's own projection code.

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "gu/linalg.hpp"
#include "gu/metric.hpp"
#include "gu/subspace.hpp"

namespace gu::testing {

using Rng = std::mt19937_64;

inline Vector gaussian(Rng& rng, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Diagonal entries spread over four decades.
inline DiagonalMetric random_metric(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> log_h(-2.0, 2.0);
  Vector h(n);
  for (double& x : h) x = std::pow(10.0, log_h(rng));
  return DiagonalMetric::from_diagonal(h);
}

inline RetainBasis random_basis(Rng& rng, std::size_t n, std::size_t k) {
  RetainBasis b(n, k, 1e-6);
  while (b.rank() < k) b.insert_retain_gradient(gaussian(rng, n));
  return b;
}

inline Eigen::VectorXd to_eigen(const Vector& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Vector from_eigen(const Eigen::VectorXd& v) {
  return Vector(v.data(), v.data() + v.size());
}

inline Vector unit(std::size_t n, std::size_t i, double scale = 1.0) {
  Vector v(n, 0.0);
  v[i] = scale;
  return v;
}

// Raw-coordinate H-orthogonal projector P = U (U^T H U)^{-1} U^T H, where U
// holds arbitrary raw spanning vectors (not necessarily orthonormal).
inline Eigen::MatrixXd dense_projector(const Eigen::MatrixXd& u, const Vector& diag_h) {
  const Eigen::VectorXd h = to_eigen(diag_h);
  const Eigen::MatrixXd hu = h.asDiagonal() * u;
  const Eigen::MatrixXd gram = u.transpose() * hu;
  return u * gram.fullPivLu().solve(hu.transpose());
}

// Raw spanning vectors of the basis: W^{-1} u_i.
inline Eigen::MatrixXd raw_columns(const RetainBasis& b, const DiagonalMetric& m) {
  Eigen::MatrixXd u(static_cast<Eigen::Index>(b.dimension()),
                    static_cast<Eigen::Index>(b.rank()));
  for (std::size_t j = 0; j < b.rank(); ++j) {
    u.col(static_cast<Eigen::Index>(j)) = to_eigen(dewhiten(b.columns()[j], m));
  }
  return u;
}

inline double rel_err(const Vector& a, const Vector& b) {
  const double d = (to_eigen(a) - to_eigen(b)).norm();
  return d / std::max(1e-300, std::max(to_eigen(a).norm(), to_eigen(b).norm()));
}

}  // namespace gu::testing
