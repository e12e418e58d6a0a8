#include "gu/selftest.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "gu/analysis.hpp"
#include "gu/gu_step.hpp"
#include "gu/harness.hpp"
#include "gu/models.hpp"

namespace gu {

namespace {

using Rng = std::mt19937_64;

Vector gaussian(Rng& rng, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

DiagonalMetric random_metric(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> log_h(-2.0, 2.0);
  Vector h(n);
  for (double& x : h) x = std::pow(10.0, log_h(rng));
  return DiagonalMetric::from_diagonal(h);
}

Eigen::VectorXd to_eigen(const Vector& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

// Raw-coordinate H-orthogonal projector U (U^T H U)^{-1} U^T H built from the
// de-whitened basis columns.
Eigen::MatrixXd dense_tangent_projector(const RetainBasis& basis, const DiagonalMetric& m) {
  const auto n = static_cast<Eigen::Index>(basis.dimension());
  const auto k = static_cast<Eigen::Index>(basis.rank());
  Eigen::MatrixXd u(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    u.col(j) = to_eigen(dewhiten(basis.columns()[static_cast<std::size_t>(j)], m));
  }
  const Eigen::VectorXd h = to_eigen(m.diag_h());
  const Eigen::MatrixXd hu = h.asDiagonal() * u;
  const Eigen::MatrixXd gram = u.transpose() * hu;
  return u * gram.ldlt().solve(hu.transpose());
}

SelftestResult projector_oracle(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + rng() % 29;
    const std::size_t k = 1 + rng() % (n / 2);
    const DiagonalMetric m = random_metric(rng, n);
    RetainBasis basis(n, k, 1e-6);
    for (std::size_t j = 0; j < k; ++j) basis.insert_retain_gradient(gaussian(rng, n));
    const Eigen::MatrixXd p = dense_tangent_projector(basis, m);
    const Vector v = gaussian(rng, n);
    const Vector ours = dewhiten(basis.project_tangent(whiten(v, m)), m);
    const Eigen::VectorXd ref = p * to_eigen(v);
    worst = std::max(worst, (to_eigen(ours) - ref).norm() / std::max(1.0, ref.norm()));
  }
  return {"projector_dense_oracle", worst <= 1e-9, "max rel err " + fmt(worst)};
}

SelftestResult basis_orthonormality(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng() % 29;
    const DiagonalMetric m = random_metric(rng, n);
    RetainBasis basis(n, n, 1e-8);
    for (std::size_t j = 0; j < n + 2; ++j) {
      basis.insert_retain_gradient(whiten(gaussian(rng, n), m));
    }
    const auto& cols = basis.columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        const Vector ui = dewhiten(cols[i], m);
        const Vector uj = dewhiten(cols[j], m);
        worst = std::max(worst, std::abs(inner(ui, uj, m) - (i == j ? 1.0 : 0.0)));
      }
    }
  }
  return {"basis_h_orthonormality", worst <= 1e-10, "max |U^T H U - I| " + fmt(worst)};
}

SelftestResult first_order_identities(Rng& rng) {
  double worst_safety = 0.0;
  double worst_joint = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + rng() % 29;
    const DiagonalMetric m = random_metric(rng, n);
    const Vector gr = gaussian(rng, n);
    const Vector gf = gaussian(rng, n);
    RetainBasis basis(n, n, 1e-8);
    basis.insert_retain_gradient(whiten(gr, m));
    for (std::size_t j = 0; j < n / 3; ++j) basis.insert_retain_gradient(gaussian(rng, n));
    const double rho = 0.3;
    const double alpha = 0.7;
    const double beta = 1.3;
    const Vector step = split_step_direction(gf, gr, basis, m, rho, beta);
    const FirstOrderReport rep = predicted_joint_change(rho, alpha, beta, gf, gr, basis, m);
    const double direct_r = inner(gr, step, m);
    const double scale_r = rho * beta * rep.retain_energy;
    worst_safety = std::max(worst_safety, std::abs(direct_r - rep.predicted_retain_change) /
                                              std::max(scale_r, 1e-300));
    Vector joint = gf;
    axpy(alpha, gr, joint);
    const double direct_j = inner(joint, step, m);
    const double scale_j = rho * (rep.perp_energy + alpha * beta * rep.retain_energy +
                                  beta * std::abs(rep.cross_term));
    worst_joint = std::max(worst_joint, std::abs(direct_j - rep.predicted_joint_change) /
                                            std::max(scale_j, 1e-300));
  }
  return {"first_order_identities", worst_safety <= 1e-9 && worst_joint <= 1e-9,
          "safety rel err " + fmt(worst_safety) + ", joint rel err " + fmt(worst_joint)};
}

SelftestResult gradient_finite_differences(Rng& rng) {
  const ForgetRetainTask task = make_task(5, 4, 6, 0.6, 11);
  auto mlp = std::make_shared<MlpModel>(std::vector<std::size_t>{5, 4, 3}, Activation::tanh);
  std::vector<Sample> three_class = task.retain_samples;
  for (std::size_t i = 0; i < three_class.size(); ++i) three_class[i].label = i % 3;
  const Vector theta_mlp = mlp->initial_parameters(3);
  Vector theta_ref = theta_mlp;
  for (double& x : theta_ref) x += 0.3 * gaussian(rng, 1)[0];

  std::vector<std::pair<std::string, ObjectivePtr>> objectives = {
      {"quadratic", quadratic_objective(gaussian(rng, 5), Vector{0.5, 1.0, 1.5, 2.0, 3.0})},
      {"logistic", logistic_objective(task.retain_samples)},
      {"mlp_ce", mlp_objective({5, 4, 3}, three_class)},
      {"mlp_mse", mlp_objective({5, 4, 3}, three_class, Activation::tanh, ClassifierLoss::mse)},
      {"kl_anchor", kl_retain_anchor(mlp, theta_ref, three_class)},
  };
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, obj] : objectives) {
    const std::size_t p = obj->dimension();
    for (int trial = 0; trial < 5; ++trial) {
      Vector theta = name == "logistic" ? gaussian(rng, p) : theta_mlp;
      if (name == "quadratic") theta = gaussian(rng, p);
      if (name != "logistic" && name != "quadratic") {
        for (double& x : theta) x += 0.1 * gaussian(rng, 1)[0];
      }
      Vector d = gaussian(rng, p);
      d = scaled(d, 1.0 / norm2(d));
      const double analytic = dot(obj->gradient(theta), d);
      const DirectionalEstimate fd = richardson_directional(*obj, theta, d);
      const double err = std::abs(analytic - fd.value) / std::max(1.0, std::abs(analytic));
      if (err > worst) {
        worst = err;
        worst_name = name;
      }
    }
  }
  return {"gradient_finite_differences", worst <= 1e-6,
          "max rel err " + fmt(worst) + (worst_name.empty() ? "" : " (" + worst_name + ")")};
}

SelftestResult quadratic_theory_audit() {
  EpisodeConfig cfg;
  cfg.model.kind = ModelKind::quadratic;
  cfg.task.dimension = 12;
  cfg.task.overlap = 0.8;
  cfg.variant = Variant::split_theory_step;
  cfg.theory.rho_fraction = 0.5;
  cfg.steps = 50;
  const EpisodeRecord rec = run_episode(cfg);
  const AuditReport audit = theory_audit(rec, AuditTolerances::from(cfg.theory));
  std::size_t evaluated = 0;
  for (const AuditCheck& c : audit.checks) evaluated += c.evaluated;
  return {"quadratic_theory_audit",
          rec.status == EpisodeStatus::ok && audit.passed() && evaluated > 0,
          std::to_string(audit.violations()) + " violations over " +
              std::to_string(evaluated) + " checks"};
}

}  // namespace

std::vector<SelftestResult> run_selftest(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SelftestResult> out;
  out.push_back(projector_oracle(rng));
  out.push_back(basis_orthonormality(rng));
  out.push_back(first_order_identities(rng));
  out.push_back(gradient_finite_differences(rng));
  out.push_back(quadratic_theory_audit());
  return out;
}

bool report_selftest(const std::vector<SelftestResult>& results, std::ostream& out) {
  bool ok = true;
  for (const SelftestResult& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok;
}

}  // namespace gu
