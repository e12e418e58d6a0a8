#include "gu/metric.hpp"

#include <cmath>
#include <stdexcept>

namespace gu {

DiagonalMetric DiagonalMetric::from_diagonal(ConstSpan diag_h) {
  Vector h(diag_h.begin(), diag_h.end());
  Vector w(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!std::isfinite(h[i]) || h[i] <= 0.0) {
      throw std::invalid_argument("metric diagonal must be finite and > 0");
    }
    w[i] = std::sqrt(h[i]);
  }
  return DiagonalMetric(std::move(h), std::move(w), 0.0);
}

DiagonalMetric DiagonalMetric::identity(std::size_t dimension) {
  return DiagonalMetric(Vector(dimension, 1.0), Vector(dimension, 1.0), 0.0);
}

DiagonalMetric metric_from_second_moments(ConstSpan v_hat, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("metric epsilon must be finite and > 0");
  }
  Vector h(v_hat.size());
  Vector w(v_hat.size());
  for (std::size_t i = 0; i < v_hat.size(); ++i) {
    if (!std::isfinite(v_hat[i]) || v_hat[i] < 0.0) {
      throw std::invalid_argument(
          "second moments must be finite and nonnegative");
    }
    w[i] = 1.0 / std::sqrt(v_hat[i] + epsilon);
    h[i] = w[i] * w[i];
  }
  return DiagonalMetric(std::move(h), std::move(w), epsilon);
}

double inner(ConstSpan u, ConstSpan v, const DiagonalMetric& m) {
  require_same_size(u, v, "inner");
  require_same_size(u, m.diag_h(), "inner");
  const Vector& h = m.diag_h();
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * h[i] * v[i];
  return s;
}

double norm(ConstSpan v, const DiagonalMetric& m) {
  return std::sqrt(inner(v, v, m));
}

Vector whiten(ConstSpan v, const DiagonalMetric& m) {
  require_same_size(v, m.whitener(), "whiten");
  Vector out(v.begin(), v.end());
  const Vector& w = m.whitener();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= w[i];
  return out;
}

Vector dewhiten(ConstSpan v, const DiagonalMetric& m) {
  require_same_size(v, m.whitener(), "dewhiten");
  Vector out(v.begin(), v.end());
  const Vector& w = m.whitener();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= w[i];
  return out;
}

Vector h_gradient(ConstSpan euclidean_grad, const DiagonalMetric& m) {
  require_same_size(euclidean_grad, m.diag_h(), "h_gradient");
  Vector out(euclidean_grad.begin(), euclidean_grad.end());
  const Vector& h = m.diag_h();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= h[i];
  return out;
}

}  // namespace gu
