#include "gu/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace gu {

Vector sgd_step(ConstSpan theta, ConstSpan gradient, double learning_rate) {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning rate must be > 0");
  }
  require_same_size(theta, gradient, "sgd_step");
  Vector out(theta.begin(), theta.end());
  axpy(-learning_rate, gradient, out);
  return out;
}

AdaptiveState AdaptiveState::fresh(std::size_t dimension, double learning_rate,
                                   double beta1, double beta2, double epsilon) {
  AdaptiveState s;
  s.first_moment.assign(dimension, 0.0);
  s.second_moment.assign(dimension, 0.0);
  s.learning_rate = learning_rate;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  s.validate();
  return s;
}

void AdaptiveState::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("decay rates must be in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  require_same_size(first_moment, second_moment, "adaptive state");
}

Vector AdaptiveState::corrected_second_moment() const {
  if (step_count == 0) return Vector(second_moment.size(), 0.0);
  const double c = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  return scaled(second_moment, 1.0 / c);
}

std::pair<Vector, AdaptiveState> adaptive_step(const AdaptiveState& state,
                                               ConstSpan theta,
                                               ConstSpan gradient) {
  state.validate();
  require_same_size(theta, gradient, "adaptive_step");
  require_same_size(theta, state.first_moment, "adaptive_step");
  if (!all_finite(gradient)) {
    throw std::domain_error("adaptive_step: non-finite gradient");
  }
  AdaptiveState next = state;
  next.step_count += 1;
  const double t = static_cast<double>(next.step_count);
  const double c1 = 1.0 - std::pow(next.beta1, t);
  const double c2 = 1.0 - std::pow(next.beta2, t);
  Vector out(theta.begin(), theta.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = gradient[i];
    next.first_moment[i] = next.beta1 * next.first_moment[i] + (1.0 - next.beta1) * g;
    next.second_moment[i] =
        next.beta2 * next.second_moment[i] + (1.0 - next.beta2) * g * g;
    const double m_hat = next.first_moment[i] / c1;
    const double v_hat = next.second_moment[i] / c2;
    out[i] -= next.learning_rate * m_hat / (std::sqrt(v_hat) + next.epsilon);
  }
  return {std::move(out), std::move(next)};
}

DiagonalMetric snapshot_metric(const AdaptiveState& state) {
  if (state.bias_corrected_metric) {
    return metric_from_second_moments(state.corrected_second_moment(), state.epsilon);
  }
  return metric_from_second_moments(state.second_moment, state.epsilon);
}

}  // namespace gu
