#pragma once

// Diagonal SPD metric H = W^T W induced by an adaptive optimizer's second
// moments, with W = diag(1 / sqrt(v_hat + eps)).
//
// A metric is an immutable value: callers take a snapshot before a step and
// use it for every projection and report inside that step.

#include <span>

#include "gu/linalg.hpp"

namespace gu {

inline constexpr double kDefaultMetricEpsilon = 1e-8;

class DiagonalMetric {
 public:
  // Builds from explicit diagonal entries; every entry must be finite and > 0.
  static DiagonalMetric from_diagonal(ConstSpan diag_h);
  static DiagonalMetric identity(std::size_t dimension);

  std::size_t dimension() const { return diag_h_.size(); }
  const Vector& diag_h() const { return diag_h_; }
  // W entries, sqrt(diag_h).
  const Vector& whitener() const { return whitener_; }
  double epsilon() const { return epsilon_; }

 private:
  friend DiagonalMetric metric_from_second_moments(ConstSpan v_hat,
                                                   double epsilon);
  DiagonalMetric(Vector diag_h, Vector whitener, double epsilon)
      : diag_h_(std::move(diag_h)),
        whitener_(std::move(whitener)),
        epsilon_(epsilon) {}

  Vector diag_h_;
  Vector whitener_;
  double epsilon_ = 0.0;
};

// Throws std::invalid_argument on negative or non-finite v_hat, or eps <= 0.
DiagonalMetric metric_from_second_moments(ConstSpan v_hat,
                                          double epsilon = kDefaultMetricEpsilon);

// u^T H v
double inner(ConstSpan u, ConstSpan v, const DiagonalMetric& m);
// sqrt(u^T H u)
double norm(ConstSpan v, const DiagonalMetric& m);

// W v and W^{-1} v. Euclidean geometry of whitened vectors is H-geometry of
// raw vectors.
Vector whiten(ConstSpan v, const DiagonalMetric& m);
Vector dewhiten(ConstSpan v, const DiagonalMetric& m);

// H^{-1} g: the representer of the directional derivative under <.,.>_H.
Vector h_gradient(ConstSpan euclidean_grad, const DiagonalMetric& m);

}  // namespace gu
