#pragma once

// Closed-form first-order quantities of the split step and the smoothness
// bounds built on them, plus the finite-difference oracle used to check them.
// All gradients passed here are H-gradients (H^{-1} times Euclidean).

#include <optional>
#include <vector>

#include "gu/linalg.hpp"
#include "gu/metric.hpp"
#include "gu/subspace.hpp"

namespace gu {

class DifferentiableObjective;

struct FirstOrderReport {
  double predicted_retain_change = 0.0;  // -rho beta ||g_r||_H^2
  double predicted_joint_change = 0.0;   // -rho (perp + alpha beta r + beta c)
  double cross_term = 0.0;               // <P_T g_f, g_r>_H
  double perp_energy = 0.0;              // ||P_perp g_f||_H^2
  double tangent_energy = 0.0;           // ||P_T g_f||_H^2
  double retain_energy = 0.0;            // ||g_r||_H^2
  double rho = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

double predicted_retain_change(double rho, double beta, ConstSpan retain_h_grad,
                               const DiagonalMetric& metric);

// Exact when the whitened g_r lies in span(basis).
FirstOrderReport predicted_joint_change(double rho, double alpha, double beta,
                                        ConstSpan forget_h_grad,
                                        ConstSpan retain_h_grad,
                                        const RetainBasis& basis,
                                        const DiagonalMetric& metric);

struct NonpositivityConditions {
  bool case_a = false;                // beta == 0
  std::optional<bool> case_b;         // nullopt when alpha == 0
  bool case_c = false;                // alpha ||g_r|| >= ||P_T g_f||
  bool any() const { return case_a || case_b.value_or(false) || case_c; }
};

NonpositivityConditions nonpositivity_conditions(double alpha, double beta,
                                                 const FirstOrderReport& report);

// 2 beta r / (L (perp + beta^2 r)); 0 in the neutral regime beta == 0.
double descent_stepsize_bound(double beta, double retain_energy,
                              double perp_energy, double lipschitz_h);

struct SteepestDirection {
  Vector direction;  // unit H-norm, empty when degenerate
  bool degenerate = false;
};

// -P_perp g_f / ||P_perp g_f||_H. Degenerate when the normal part vanishes
// (to 1e-12 of ||g_f||_H): every feasible unit vector is then optimal.
SteepestDirection steepest_feasible_direction(ConstSpan forget_h_grad,
                                              const RetainBasis& basis,
                                              const DiagonalMetric& metric);

// (L(theta + h d) - L(theta - h d)) / (2h). Throws on non-finite losses.
double finite_difference_directional(const DifferentiableObjective& objective,
                                     ConstSpan theta, ConstSpan direction,
                                     double step);

// Richardson-checked central difference over h in {1e-4, 1e-5, 1e-6}: returns
// the extrapolated value and the spread between successive estimates.
struct DirectionalEstimate {
  double value = 0.0;
  double spread = 0.0;
};
DirectionalEstimate richardson_directional(const DifferentiableObjective& objective,
                                           ConstSpan theta, ConstSpan direction);

// Upper bound on L_joint(theta + dtheta) - L_joint(theta) for the split step
// with step size rho: first-order change plus (L_f + alpha L_r)/2 ||dtheta||_H^2.
double joint_descent_bound(double rho, double alpha,
                           const FirstOrderReport& report, double lipschitz_f,
                           double lipschitz_r, double step_norm_sq);

// Right-hand side of the retain descent lemma for the split step:
// -rho beta r + (L_r / 2) rho^2 (perp + beta^2 r).
double retain_descent_bound(double rho, double beta, double retain_energy,
                            double perp_energy, double lipschitz_r);

// Strengthened retain bound of the sign-aware theory step:
// -rho beta ||g_r||_H^2 - rho tau sum_{kept} |a_i||b_i|.
double sign_aware_retain_bound(double rho, double beta, double retain_energy,
                               double tau, ConstSpan a, ConstSpan b,
                               const std::vector<std::size_t>& kept);

}  // namespace gu
