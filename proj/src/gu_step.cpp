#include "gu/gu_step.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gu {
namespace {

void check_basis_metric(const RetainBasis& basis, const DiagonalMetric& metric) {
  if (basis.dimension() != metric.dimension()) {
    throw DimensionError("basis/metric dimension mismatch");
  }
}

[[noreturn]] void bad_field(const std::string& what) {
  throw std::invalid_argument("invalid GUConfig: " + what);
}

}  // namespace

void GUConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) bad_field("gamma must be > 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) bad_field("alpha must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) bad_field("beta must be >= 0");
  if (!(kappa >= 0.0 && kappa <= 1.0)) bad_field("kappa must be in [0, 1]");
  if (!(tau >= 0.0) || !std::isfinite(tau)) bad_field("tau must be >= 0");
  if (!(rho > 0.0) || !std::isfinite(rho)) bad_field("rho must be > 0");
  if (rank_cap == 0) bad_field("rank_cap must be >= 1");
  if (!(residual_keep_thresh >= 0.0)) {
    bad_field("residual_keep_thresh must be >= 0");
  }
  if (refresh_period == 0) bad_field("refresh_period must be >= 1");
}

Vector recover_forget_gradient(ConstSpan total_grad, ConstSpan retain_grad,
                               const GUConfig& cfg) {
  if (cfg.gamma == 0.0) throw std::invalid_argument("gamma must be nonzero");
  require_same_size(total_grad, retain_grad, "recover_forget_gradient");
  Vector g(total_grad.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = (total_grad[i] - cfg.alpha * retain_grad[i]) / cfg.gamma;
  }
  return g;
}

GradientBundle make_gradient_bundle(ConstSpan total_grad, ConstSpan retain_grad,
                                    const DiagonalMetric& metric,
                                    const GUConfig& cfg) {
  GradientBundle b;
  b.total_grad.assign(total_grad.begin(), total_grad.end());
  b.retain_grad.assign(retain_grad.begin(), retain_grad.end());
  b.forget_grad = recover_forget_gradient(total_grad, retain_grad, cfg);
  b.total_whitened = whiten(b.total_grad, metric);
  b.retain_whitened = whiten(b.retain_grad, metric);
  b.forget_whitened = whiten(b.forget_grad, metric);
  return b;
}

SignAwareSelection sign_aware_select(const RetainBasis& basis,
                                     ConstSpan forget_whitened,
                                     ConstSpan retain_whitened, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("tau must be >= 0");
  const Vector a = basis.coefficients(forget_whitened);
  const Vector b = basis.coefficients(retain_whitened);
  SignAwareSelection sel;
  sel.kept_tangential.assign(basis.dimension(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] * b[i] < -tau) {
      axpy(a[i], basis.columns()[i], sel.kept_tangential);
      sel.kept_indices.push_back(i);
    }
  }
  return sel;
}

CapResult cap_tangential(ConstSpan kept_tangential, ConstSpan normal_component,
                         double kappa) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) {
    throw std::invalid_argument("kappa must be in [0, 1]");
  }
  CapResult r{Vector(kept_tangential.begin(), kept_tangential.end()), false};
  const double kept_norm = norm2(kept_tangential);
  const double limit = kappa * norm2(normal_component);
  if (kept_norm > limit) {
    const double s = limit / kept_norm;
    for (double& x : r.capped) x *= s;
    r.cap_applied = true;
  }
  return r;
}

StepReport compose_gu_direction(const GradientBundle& bundle,
                                const RetainBasis& basis,
                                const DiagonalMetric& metric,
                                const GUConfig& cfg) {
  check_basis_metric(basis, metric);
  cfg.validate();
  const Vector& gf = bundle.forget_whitened;
  const Vector& gr = bundle.retain_whitened;

  StepReport rep;
  rep.empty_basis = basis.empty();

  const Vector tangent_f = basis.project_tangent(gf);
  const Vector normal_f = subtract(gf, tangent_f);
  const Vector tangent_r = basis.project_tangent(gr);
  rep.entanglement_before = norm2(tangent_f);
  rep.normal_norm = norm2(normal_f);

  Vector keep(basis.dimension(), 0.0);
  if (cfg.sign_aware) {
    SignAwareSelection sel = sign_aware_select(basis, gf, gr, cfg.tau);
    CapResult capped = cap_tangential(sel.kept_tangential, normal_f, cfg.kappa);
    keep = std::move(capped.capped);
    rep.cap_applied = capped.cap_applied;
    rep.kept_index_set = std::move(sel.kept_indices);
  }
  rep.tangential_keep_norm = norm2(keep);

  Vector whitened_dir(basis.dimension(), 0.0);
  axpy(cfg.gamma, normal_f, whitened_dir);
  axpy(cfg.gamma, keep, whitened_dir);
  axpy(cfg.alpha, tangent_r, whitened_dir);
  rep.direction = dewhiten(whitened_dir, metric);

  const double retain_rate = dot(bundle.retain_grad, rep.direction);
  rep.predicted_retain_change = -cfg.rho * retain_rate;
  rep.predicted_joint_change =
      -cfg.rho * (dot(bundle.forget_grad, rep.direction) + cfg.alpha * retain_rate);
  return rep;
}

Vector split_step_direction(ConstSpan forget_h_grad, ConstSpan retain_h_grad,
                            const RetainBasis& basis,
                            const DiagonalMetric& metric, double rho,
                            double beta) {
  check_basis_metric(basis, metric);
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be > 0");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  const Vector gf = whiten(forget_h_grad, metric);
  const Vector gr = whiten(retain_h_grad, metric);
  Vector w = basis.project_normal(gf);
  axpy(beta, basis.project_tangent(gr), w);
  for (double& x : w) x *= -rho;
  return dewhiten(w, metric);
}

SignAwareSplitStep sign_aware_split_step(ConstSpan forget_h_grad,
                                         ConstSpan retain_h_grad,
                                         const RetainBasis& basis,
                                         const DiagonalMetric& metric,
                                         double rho, double beta, double tau,
                                         double kappa) {
  check_basis_metric(basis, metric);
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be > 0");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  const Vector gf = whiten(forget_h_grad, metric);
  const Vector gr = whiten(retain_h_grad, metric);

  SignAwareSplitStep out;
  out.a = basis.coefficients(gf);
  out.b = basis.coefficients(gr);
  const Vector normal = basis.project_normal(gf);
  SignAwareSelection sel = sign_aware_select(basis, gf, gr, tau);
  Vector keep = std::move(sel.kept_tangential);
  out.kept_indices = std::move(sel.kept_indices);
  if (kappa >= 0.0) {
    const double before = norm2(keep);
    CapResult capped = cap_tangential(keep, normal, kappa);
    if (capped.cap_applied && before > 0.0) {
      out.keep_scale = norm2(capped.capped) / before;
    }
    keep = std::move(capped.capped);
  }

  Vector w = normal;
  axpy(1.0, keep, w);
  axpy(beta, basis.project_tangent(gr), w);
  for (double& x : w) x *= -rho;
  out.direction = dewhiten(w, metric);
  return out;
}

}  // namespace gu
