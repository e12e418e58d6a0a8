#pragma once

// Base optimizers that consume the composed GU gradient. The adaptive
// optimizer exposes its second moments so the metric can bind to them.

#include <cstddef>
#include <utility>

#include "gu/linalg.hpp"
#include "gu/metric.hpp"

namespace gu {

Vector sgd_step(ConstSpan theta, ConstSpan gradient, double learning_rate);

struct AdaptiveState {
  Vector first_moment;
  Vector second_moment;
  std::size_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double learning_rate = 1e-3;
  double epsilon = 1e-8;
  // Metric built from bias-corrected v_hat (true) or the raw accumulator.
  bool bias_corrected_metric = true;

  static AdaptiveState fresh(std::size_t dimension, double learning_rate,
                             double beta1 = 0.9, double beta2 = 0.999,
                             double epsilon = 1e-8);

  void validate() const;

  // Second moments with bias correction; all zeros before the first step.
  Vector corrected_second_moment() const;
};

// EMA moment update with bias correction, then
// theta - lr * m_hat / (sqrt(v_hat) + eps). Throws std::domain_error on a
// non-finite gradient; the input state is never modified.
std::pair<Vector, AdaptiveState> adaptive_step(const AdaptiveState& state,
                                               ConstSpan theta,
                                               ConstSpan gradient);

// Frozen metric from the (bias-corrected, unless disabled) second moments.
DiagonalMetric snapshot_metric(const AdaptiveState& state);

}  // namespace gu
