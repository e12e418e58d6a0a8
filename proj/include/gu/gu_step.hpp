#pragma once

// One geometric-disentanglement update.
//
// Two forms live here:
//  * compose_gu_direction: the practical form. Takes Euclidean gradients,
//    whitens them, projects, and returns a de-whitened gradient that a base
//    optimizer consumes.
//  * split_step_direction: the theory form -rho (P_perp g_f + beta P_T g_r)
//    on H-gradients, applied directly as a parameter displacement.

#include <cstddef>
#include <vector>

#include "gu/linalg.hpp"
#include "gu/metric.hpp"
#include "gu/subspace.hpp"

namespace gu {

struct GUConfig {
  double gamma = 1.0;  // forget-loss weight, > 0
  double alpha = 1.0;  // retain-loss weight, >= 0
  double beta = 1.0;   // tangential repair weight (theory step), >= 0
  double kappa = 0.5;  // tangential cap, in [0, 1]
  double tau = 0.0;    // sign threshold, >= 0
  double rho = 0.1;    // step size of the theory step, > 0
  std::size_t rank_cap = kDefaultRankCap;
  double residual_keep_thresh = kDefaultResidualKeepThresh;
  std::size_t refresh_period = 8;
  bool sign_aware = false;

  // Throws std::invalid_argument naming the first bad field.
  void validate() const;

  bool operator==(const GUConfig&) const = default;
};

// Per-step gradients, raw and whitened under one metric snapshot.
struct GradientBundle {
  Vector total_grad;   // gamma * forget + alpha * retain
  Vector retain_grad;  // g_r
  Vector forget_grad;  // g_f, recovered from the total
  Vector total_whitened;
  Vector retain_whitened;
  Vector forget_whitened;
};

struct StepReport {
  double entanglement_before = 0.0;
  std::vector<std::size_t> kept_index_set;
  double tangential_keep_norm = 0.0;  // whitened
  double normal_norm = 0.0;           // whitened ||P_perp g~_f||
  bool cap_applied = false;
  bool empty_basis = false;
  // First-order changes of the retain signal and of L_f + alpha L_r along the
  // nominal step -rho * direction.
  double predicted_retain_change = 0.0;
  double predicted_joint_change = 0.0;
  Vector direction;  // raw coordinates
};

// (total - alpha * retain) / gamma. Throws when gamma == 0.
Vector recover_forget_gradient(ConstSpan total_grad, ConstSpan retain_grad,
                               const GUConfig& cfg);

GradientBundle make_gradient_bundle(ConstSpan total_grad, ConstSpan retain_grad,
                                    const DiagonalMetric& metric,
                                    const GUConfig& cfg);

struct SignAwareSelection {
  Vector kept_tangential;
  std::vector<std::size_t> kept_indices;
};

// Keeps a_i u_i where a_i b_i < -tau with a_i = u_i . g~_f, b_i = u_i . g~_r.
SignAwareSelection sign_aware_select(const RetainBasis& basis,
                                     ConstSpan forget_whitened,
                                     ConstSpan retain_whitened, double tau);

struct CapResult {
  Vector capped;
  bool cap_applied = false;
};

// Rescales `kept` onto the ball ||kept|| <= kappa ||normal||.
CapResult cap_tangential(ConstSpan kept_tangential, ConstSpan normal_component,
                         double kappa);

// g~_GU = gamma (g~_f^perp + g~_f^{tan,keep}) + alpha g~_r^{tan}, mapped back
// with W^{-1}. The keep term is zero unless cfg.sign_aware.
StepReport compose_gu_direction(const GradientBundle& bundle,
                                const RetainBasis& basis,
                                const DiagonalMetric& metric,
                                const GUConfig& cfg);

// -rho (P_perp g_f + beta P_T g_r) for H-gradients g_f, g_r.
Vector split_step_direction(ConstSpan forget_h_grad, ConstSpan retain_h_grad,
                            const RetainBasis& basis,
                            const DiagonalMetric& metric, double rho,
                            double beta);

struct SignAwareSplitStep {
  Vector direction;
  std::vector<std::size_t> kept_indices;
  Vector a;  // forget coefficients on the basis
  Vector b;  // retain coefficients on the basis
  double keep_scale = 1.0;  // < 1 when the cap fired
};

// -rho (P_perp g_f + keep + beta P_T g_r) where keep is the sign-aware
// tangential part of g_f, optionally capped (kappa < 0 disables the cap).
SignAwareSplitStep sign_aware_split_step(ConstSpan forget_h_grad,
                                         ConstSpan retain_h_grad,
                                         const RetainBasis& basis,
                                         const DiagonalMetric& metric,
                                         double rho, double beta, double tau,
                                         double kappa);

}  // namespace gu
