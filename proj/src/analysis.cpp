#include "gu/analysis.hpp"

#include <cmath>
#include <stdexcept>

#include "gu/models.hpp"

namespace gu {

double predicted_retain_change(double rho, double beta, ConstSpan retain_h_grad,
                               const DiagonalMetric& metric) {
  const double r = inner(retain_h_grad, retain_h_grad, metric);
  return -rho * beta * r;
}

FirstOrderReport predicted_joint_change(double rho, double alpha, double beta,
                                        ConstSpan forget_h_grad,
                                        ConstSpan retain_h_grad,
                                        const RetainBasis& basis,
                                        const DiagonalMetric& metric) {
  if (basis.dimension() != metric.dimension()) {
    throw DimensionError("basis/metric dimension mismatch");
  }
  const Vector gf = whiten(forget_h_grad, metric);
  const Vector gr = whiten(retain_h_grad, metric);
  const Vector tangent = basis.project_tangent(gf);
  const Vector normal = subtract(gf, tangent);

  FirstOrderReport rep;
  rep.rho = rho;
  rep.alpha = alpha;
  rep.beta = beta;
  rep.perp_energy = dot(normal, normal);
  rep.tangent_energy = dot(tangent, tangent);
  rep.retain_energy = dot(gr, gr);
  rep.cross_term = dot(tangent, gr);
  rep.predicted_retain_change = -rho * beta * rep.retain_energy;
  rep.predicted_joint_change =
      -rho * (rep.perp_energy + alpha * beta * rep.retain_energy +
              beta * rep.cross_term);
  return rep;
}

NonpositivityConditions nonpositivity_conditions(double alpha, double beta,
                                                 const FirstOrderReport& r) {
  NonpositivityConditions c;
  c.case_a = beta == 0.0;
  if (alpha > 0.0) {
    c.case_b = r.perp_energy + 0.5 * alpha * beta * r.retain_energy >=
               beta / (2.0 * alpha) * r.tangent_energy;
  }
  c.case_c = alpha * std::sqrt(r.retain_energy) >= std::sqrt(r.tangent_energy);
  return c;
}

double descent_stepsize_bound(double beta, double retain_energy,
                              double perp_energy, double lipschitz_h) {
  if (!(lipschitz_h > 0.0)) {
    throw std::invalid_argument("Lipschitz constant must be > 0");
  }
  if (beta == 0.0 || retain_energy == 0.0) return 0.0;
  return 2.0 * beta * retain_energy /
         (lipschitz_h * (perp_energy + beta * beta * retain_energy));
}

SteepestDirection steepest_feasible_direction(ConstSpan forget_h_grad,
                                              const RetainBasis& basis,
                                              const DiagonalMetric& metric) {
  const Vector gf = whiten(forget_h_grad, metric);
  const Vector normal = basis.project_normal(gf);
  const double n = norm2(normal);
  SteepestDirection out;
  if (n == 0.0 || n <= 1e-12 * norm2(gf)) {
    out.degenerate = true;
    return out;
  }
  out.direction = dewhiten(scaled(normal, -1.0 / n), metric);
  return out;
}

double finite_difference_directional(const DifferentiableObjective& objective,
                                     ConstSpan theta, ConstSpan direction,
                                     double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
  require_same_size(theta, direction, "finite_difference_directional");
  Vector plus(theta.begin(), theta.end());
  Vector minus(theta.begin(), theta.end());
  axpy(step, direction, plus);
  axpy(-step, direction, minus);
  const double lp = objective.loss(plus);
  const double lm = objective.loss(minus);
  if (!std::isfinite(lp) || !std::isfinite(lm)) {
    throw std::domain_error("non-finite loss in finite difference");
  }
  return (lp - lm) / (2.0 * step);
}

DirectionalEstimate richardson_directional(const DifferentiableObjective& objective,
                                           ConstSpan theta, ConstSpan direction) {
  const double d4 = finite_difference_directional(objective, theta, direction, 1e-4);
  const double d5 = finite_difference_directional(objective, theta, direction, 1e-5);
  const double d6 = finite_difference_directional(objective, theta, direction, 1e-6);
  // Central differences have O(h^2) truncation: combine the two coarse steps.
  const double extrapolated = d5 + (d5 - d4) / 99.0;
  return {extrapolated, std::max(std::abs(d5 - d4), std::abs(d6 - d5))};
}

double joint_descent_bound(double rho, double alpha,
                           const FirstOrderReport& report, double lipschitz_f,
                           double lipschitz_r, double step_norm_sq) {
  if (!(lipschitz_f > 0.0) || !(lipschitz_r > 0.0)) {
    throw std::invalid_argument("Lipschitz constants must be > 0");
  }
  const double first_order =
      -rho * (report.perp_energy + alpha * report.beta * report.retain_energy +
              report.beta * report.cross_term);
  return first_order + 0.5 * (lipschitz_f + alpha * lipschitz_r) * step_norm_sq;
}

double retain_descent_bound(double rho, double beta, double retain_energy,
                            double perp_energy, double lipschitz_r) {
  return -rho * beta * retain_energy +
         0.5 * lipschitz_r * rho * rho *
             (perp_energy + beta * beta * retain_energy);
}

double sign_aware_retain_bound(double rho, double beta, double retain_energy,
                               double tau, ConstSpan a, ConstSpan b,
                               const std::vector<std::size_t>& kept) {
  require_same_size(a, b, "sign_aware_retain_bound");
  double s = 0.0;
  for (std::size_t i : kept) s += std::abs(a[i]) * std::abs(b[i]);
  return -rho * beta * retain_energy - rho * tau * s;
}

}  // namespace gu
