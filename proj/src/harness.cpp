#include "gu/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "gu/optimizer.hpp"

namespace gu {

// ---------------------------------------------------------------------------
// Enum names

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::pair<E, const char*> (&table)[N],
             const char* what) {
  for (const auto& [value, name] : table) {
    if (s == name) return value;
  }
  throw std::invalid_argument(std::string("unknown ") + what + ": '" +
                              std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string enum_name(E v, const std::pair<E, const char*> (&table)[N]) {
  for (const auto& [value, name] : table) {
    if (v == value) return name;
  }
  throw std::logic_error("enum value without a name");
}

constexpr std::pair<Variant, const char*> kVariants[] = {
    {Variant::no_projection, "no_projection"},
    {Variant::gu_projection, "gu_projection"},
    {Variant::gu_sign_aware, "gu_sign_aware"},
    {Variant::split_theory_step, "split_theory_step"},
};
constexpr std::pair<ModelKind, const char*> kModels[] = {
    {ModelKind::quadratic, "quadratic"},
    {ModelKind::logistic, "logistic"},
    {ModelKind::mlp, "mlp"},
};
constexpr std::pair<OptimizerKind, const char*> kOptimizers[] = {
    {OptimizerKind::sgd, "sgd"},
    {OptimizerKind::adam, "adam"},
};
constexpr std::pair<Activation, const char*> kActivations[] = {
    {Activation::tanh, "tanh"},
    {Activation::identity, "identity"},
};

}  // namespace

std::string to_string(Variant v) { return enum_name(v, kVariants); }
std::string to_string(ModelKind k) { return enum_name(k, kModels); }
std::string to_string(OptimizerKind k) { return enum_name(k, kOptimizers); }
std::string to_string(Activation a) { return enum_name(a, kActivations); }
Variant parse_variant(std::string_view s) { return parse_enum(s, kVariants, "variant"); }
ModelKind parse_model_kind(std::string_view s) {
  return parse_enum(s, kModels, "model kind");
}
OptimizerKind parse_optimizer_kind(std::string_view s) {
  return parse_enum(s, kOptimizers, "optimizer");
}
Activation parse_activation(std::string_view s) {
  return parse_enum(s, kActivations, "activation");
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Configuration

void EpisodeConfig::validate() const {
  gu.validate();
  if (steps == 0) throw std::invalid_argument("episode.steps must be >= 1");
  if (task.dimension < 2) throw std::invalid_argument("task.dimension must be >= 2");
  if (task.forget_count == 0 || task.retain_count == 0) {
    throw std::invalid_argument("task sample counts must be >= 1");
  }
  if (!(task.overlap >= 0.0 && task.overlap <= 1.0)) {
    throw std::invalid_argument("task.overlap must be in [0, 1]");
  }
  if (model.kind == ModelKind::mlp) {
    if (model.classes < 2) throw std::invalid_argument("model.classes must be >= 2");
    if (model.hidden.empty()) {
      throw std::invalid_argument("model.hidden needs at least one layer");
    }
    for (std::size_t w : model.hidden) {
      if (w == 0) throw std::invalid_argument("model.hidden widths must be >= 1");
    }
  }
  if (model.kind == ModelKind::logistic && model.classes != 2) {
    throw std::invalid_argument("logistic model has exactly 2 classes");
  }
  AdaptiveState probe;
  probe.beta1 = optimizer.beta1;
  probe.beta2 = optimizer.beta2;
  probe.learning_rate = optimizer.learning_rate;
  probe.epsilon = optimizer.epsilon;
  probe.validate();
  if (model.kind != ModelKind::quadratic && reference.pretrain_steps > 0 &&
      !(reference.learning_rate > 0.0)) {
    throw std::invalid_argument("reference.learning_rate must be > 0");
  }
  if (!(theory.rho_fraction >= 0.0)) {
    throw std::invalid_argument("theory.rho_fraction must be >= 0");
  }
  if (!(theory.fd_step > 0.0)) throw std::invalid_argument("theory.fd_step must be > 0");
  if (!(theory.first_order_rtol > 0.0) || !(theory.identity_rtol > 0.0) ||
      !(theory.nonpositivity_atol >= 0.0)) {
    throw std::invalid_argument("theory tolerances must be positive");
  }
}

// ---------------------------------------------------------------------------
// Problems

namespace {

constexpr std::uint64_t kModelSeedSalt = 0x5bd1e995ULL;
constexpr std::uint64_t kQuadraticSeedSalt = 0x27d4eb2fULL;

Problem quadratic_problem(ForgetRetainTask task) {
  const std::size_t d = task.spec.dimension;
  std::mt19937_64 rng(task.spec.seed ^ kQuadraticSeedSalt);
  std::uniform_real_distribution<double> curv(0.5, 2.0);
  Vector cr(d), cf(d);
  for (double& c : cr) c = curv(rng);
  for (double& c : cf) c = curv(rng);
  const Vector center_r = scaled(task.retain_direction, 2.0);
  const Vector center_f = scaled(task.forget_direction, 2.0);
  // Minimizer of the joint pre-training loss 1/2 |.-c_r|_Cr^2 + 1/2 |.-c_f|_Cf^2.
  Vector ref(d);
  for (std::size_t i = 0; i < d; ++i) {
    ref[i] = (cr[i] * center_r[i] + cf[i] * center_f[i]) / (cr[i] + cf[i]);
  }
  auto retain = quadratic_objective(center_r, cr);
  Problem p;
  p.forget = std::make_shared<ScaledObjective>(quadratic_objective(center_f, cf), -1.0);
  p.retain = retain;
  // KL between unit-covariance Gaussians centred at theta and theta_ref.
  p.anchor = quadratic_objective(ref, Vector(d, 1.0));
  p.retain_sample_gradients = [retain](ConstSpan theta) {
    return std::vector<Vector>{retain->gradient(theta)};
  };
  task.reference_parameters = ref;
  p.initial_parameters = ref;
  p.task = std::move(task);
  return p;
}

Vector pretrain(const DifferentiableObjective& objective, Vector theta,
                const ReferenceConfig& ref) {
  if (ref.pretrain_steps == 0) return theta;
  AdaptiveState state = AdaptiveState::fresh(theta.size(), ref.learning_rate);
  for (std::size_t t = 0; t < ref.pretrain_steps; ++t) {
    auto [next, next_state] = adaptive_step(state, theta, objective.gradient(theta));
    theta = std::move(next);
    state = std::move(next_state);
  }
  return theta;
}

Problem classifier_problem(ForgetRetainTask task, const EpisodeConfig& cfg) {
  ClassifierPtr model;
  if (cfg.model.kind == ModelKind::logistic) {
    model = std::make_shared<LogisticModel>(task.spec.dimension);
  } else {
    std::vector<std::size_t> widths{task.spec.dimension};
    widths.insert(widths.end(), cfg.model.hidden.begin(), cfg.model.hidden.end());
    widths.push_back(cfg.model.classes);
    model = std::make_shared<MlpModel>(widths, cfg.model.activation);
  }
  std::vector<Sample> all = task.forget_samples;
  all.insert(all.end(), task.retain_samples.begin(), task.retain_samples.end());
  const ClassifierObjective joint(model, all);
  const Vector ref = pretrain(
      joint, model->initial_parameters(task.spec.seed ^ kModelSeedSalt), cfg.reference);

  auto retain = std::make_shared<ClassifierObjective>(model, task.retain_samples);
  Problem p;
  p.forget = std::make_shared<ScaledObjective>(
      std::make_shared<ClassifierObjective>(model, task.forget_samples), -1.0);
  p.retain = retain;
  p.anchor = kl_retain_anchor(model, ref, task.retain_samples);
  p.retain_sample_gradients = [retain](ConstSpan theta) {
    return retain->per_sample_gradients(theta);
  };
  task.reference_parameters = ref;
  p.initial_parameters = ref;
  p.task = std::move(task);
  return p;
}

}  // namespace

Problem build_problem(const EpisodeConfig& cfg) {
  cfg.validate();
  ForgetRetainTask task = make_task(cfg.task);
  if (cfg.model.kind == ModelKind::quadratic) return quadratic_problem(std::move(task));
  return classifier_problem(std::move(task), cfg);
}

// ---------------------------------------------------------------------------
// Episodes

namespace {

FirstOrderReport scale_report(FirstOrderReport r, double rho) {
  r.rho = rho;
  r.predicted_retain_change *= rho;
  r.predicted_joint_change *= rho;
  return r;
}

struct TheoryStep {
  Vector delta;
  StepRecord partial;
};

// Split step on H-gradients, applied as a parameter displacement.
TheoryStep theory_step(const EpisodeConfig& cfg, const Problem& problem,
                       ConstSpan theta, ConstSpan gf, ConstSpan gr,
                       const DiagonalMetric& metric, RetainSubspaceTracker& tracker) {
  const GUConfig& g = cfg.gu;
  const Vector gf_h = h_gradient(gf, metric);
  const Vector gr_h = h_gradient(gr, metric);
  const RetainBasis& basis = tracker.rebuild(
      {Vector(gr.begin(), gr.end())},
      [&](const Vector& v) { return whiten(h_gradient(v, metric), metric); });

  TheoryStep out;
  StepRecord& rec = out.partial;
  const FirstOrderReport unit =
      predicted_joint_change(1.0, g.alpha, g.beta, gf_h, gr_h, basis, metric);
  rec.lipschitz_retain = problem.retain->lipschitz_h(metric);
  if (rec.lipschitz_retain && *rec.lipschitz_retain > 0.0) {
    rec.stepsize_bound = descent_stepsize_bound(g.beta, unit.retain_energy,
                                                unit.perp_energy, *rec.lipschitz_retain);
  }
  double rho = g.rho;
  if (cfg.theory.rho_fraction > 0.0 && rec.lipschitz_retain) {
    rho = cfg.theory.rho_fraction * rec.stepsize_bound;
  }
  rec.rho = rho;
  rec.first_order = scale_report(unit, rho);
  rec.conditions = nonpositivity_conditions(g.alpha, g.beta, unit);
  rec.predicted_retain_change = rec.first_order.predicted_retain_change;
  rec.predicted_joint_change = rec.first_order.predicted_joint_change;

  const Vector gf_w = whiten(gf_h, metric);
  StepReport& rep = rec.report;
  rep.entanglement_before = entanglement(basis, gf_w);
  rep.normal_norm = norm2(basis.project_normal(gf_w));
  rep.empty_basis = basis.empty();

  out.delta.assign(theta.size(), 0.0);
  if (rho > 0.0) {
    if (g.sign_aware) {
      SignAwareSplitStep s = sign_aware_split_step(gf_h, gr_h, basis, metric, rho,
                                                   g.beta, g.tau, g.kappa);
      double keep_retain = 0.0;
      double keep_forget = 0.0;
      for (std::size_t i : s.kept_indices) {
        keep_retain += s.a[i] * s.b[i];
        keep_forget += s.a[i] * s.a[i];
        rep.tangential_keep_norm += s.a[i] * s.a[i];
      }
      rep.tangential_keep_norm = s.keep_scale * std::sqrt(rep.tangential_keep_norm);
      rep.cap_applied = s.keep_scale < 1.0;
      rep.kept_index_set = s.kept_indices;
      // The kept tangential part adds -rho * scale * <keep, g> to each change.
      rec.predicted_retain_change -= rho * s.keep_scale * keep_retain;
      rec.predicted_joint_change -=
          rho * s.keep_scale * (keep_forget + g.alpha * keep_retain);
      out.delta = std::move(s.direction);
    } else {
      out.delta = split_step_direction(gf_h, gr_h, basis, metric, rho, g.beta);
    }
  }
  rep.predicted_retain_change = rec.predicted_retain_change;
  rep.predicted_joint_change = rec.predicted_joint_change;
  rep.direction = out.delta;
  return out;
}

}  // namespace

EpisodeRecord run_episode(const EpisodeConfig& cfg) {
  EpisodeRecord record;
  record.config = cfg;
  const Problem problem = build_problem(cfg);
  const GUConfig& g = cfg.gu;
  const std::size_t p = problem.initial_parameters.size();
  const bool adam = cfg.optimizer.kind == OptimizerKind::adam;
  const bool theory = cfg.variant == Variant::split_theory_step;

  AdaptiveState state = AdaptiveState::fresh(p, cfg.optimizer.learning_rate,
                                             cfg.optimizer.beta1, cfg.optimizer.beta2,
                                             cfg.optimizer.epsilon);
  state.bias_corrected_metric = cfg.optimizer.bias_corrected_metric;
  RetainSubspaceTracker tracker(p, g.rank_cap, g.residual_keep_thresh);

  Vector theta = problem.initial_parameters;
  double lf = problem.forget->loss(theta);
  double lr = problem.retain->loss(theta);
  double kl = problem.anchor->loss(theta);
  record.summary.initial_forget_loss = lf;
  record.summary.initial_retain_loss = lr;

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const DiagonalMetric metric =
        adam ? snapshot_metric(state) : DiagonalMetric::identity(p);
    if (t % g.refresh_period == 0) {
      tracker.refresh(problem.retain_sample_gradients(theta));
    }
    const Vector gf = problem.forget->gradient(theta);
    const Vector gr = problem.retain->gradient(theta);

    StepRecord rec;
    Vector theta_next;
    if (theory) {
      TheoryStep s = theory_step(cfg, problem, theta, gf, gr, metric, tracker);
      rec = std::move(s.partial);
      theta_next = add(theta, s.delta);
      if (adam) {
        // Keep the metric bound to the optimizer: feed it the joint gradient.
        Vector total = scaled(gf, g.gamma);
        axpy(g.alpha, gr, total);
        state = adaptive_step(state, theta, total).second;
      }
    } else {
      const Vector gk = problem.anchor->gradient(theta);
      const RetainBasis& basis =
          tracker.rebuild({gk}, [&](const Vector& v) { return whiten(v, metric); });
      Vector total = scaled(gf, g.gamma);
      axpy(g.alpha, gk, total);
      const GradientBundle bundle = make_gradient_bundle(total, gk, metric, g);
      GUConfig step_cfg = g;
      step_cfg.sign_aware = cfg.variant == Variant::gu_sign_aware;
      rec.report = compose_gu_direction(bundle, basis, metric, step_cfg);
      if (cfg.variant == Variant::no_projection) {
        rec.report.kept_index_set.clear();
        rec.report.tangential_keep_norm = 0.0;
        rec.report.cap_applied = false;
        rec.report.direction = total;
      }
      if (adam) {
        auto [next, next_state] = adaptive_step(state, theta, rec.report.direction);
        theta_next = std::move(next);
        state = std::move(next_state);
      } else {
        theta_next = sgd_step(theta, rec.report.direction, cfg.optimizer.learning_rate);
      }
    }

    const Vector delta = subtract(theta_next, theta);
    const double lf_next = problem.forget->loss(theta_next);
    const double lr_next = problem.retain->loss(theta_next);
    const double kl_next = problem.anchor->loss(theta_next);

    rec.step = t;
    rec.forget_loss = lf;
    rec.retain_loss = lr;
    rec.kl_anchor = kl;
    rec.entanglement = rec.report.entanglement_before;
    rec.basis_rank = tracker.basis().rank();
    rec.cap_applied = rec.report.cap_applied;
    rec.kept_count = rec.report.kept_index_set.size();
    rec.actual_retain_change = lr_next - lr;
    rec.actual_joint_change = (lf_next + g.alpha * lr_next) - (lf + g.alpha * lr);
    rec.direct_retain_change = dot(gr, delta);
    Vector joint_grad = gf;
    axpy(g.alpha, gr, joint_grad);
    rec.direct_joint_change = dot(joint_grad, delta);
    const double step_norm = norm2(delta);
    rec.first_order_scale = norm2(gr) * step_norm;
    rec.joint_scale = norm2(joint_grad) * step_norm;
    rec.step_norm_sq_h = inner(delta, delta, metric);
    if (step_norm > 0.0 && all_finite(delta)) {
      const Vector unit = scaled(delta, 1.0 / step_norm);
      try {
        rec.fd_retain_change =
            step_norm *
            finite_difference_directional(*problem.retain, theta, unit, cfg.theory.fd_step);
      } catch (const std::domain_error&) {
        rec.fd_retain_change = std::numeric_limits<double>::quiet_NaN();
      }
    }
    if (!theory) {
      rec.predicted_retain_change = rec.direct_retain_change;
      rec.predicted_joint_change = rec.direct_joint_change;
    }
    record.steps.push_back(std::move(rec));

    if (!all_finite(theta_next) || !std::isfinite(lf_next) || !std::isfinite(lr_next) ||
        !std::isfinite(kl_next)) {
      record.status = EpisodeStatus::non_finite;
      record.error = "non-finite loss or parameters at step " + std::to_string(t);
      break;
    }
    theta = theta_next;
    lf = lf_next;
    lr = lr_next;
    kl = kl_next;
  }

  record.final_parameters = theta;
  EpisodeSummary& s = record.summary;
  s.final_forget_loss = lf;
  s.final_retain_loss = lr;
  s.final_kl_anchor = kl;
  s.delta_forget_loss = lf - s.initial_forget_loss;
  s.delta_retain_loss = lr - s.initial_retain_loss;
  double ent = 0.0;
  for (const StepRecord& r : record.steps) {
    ent += r.entanglement;
    s.basis_rank_history.push_back(r.basis_rank);
    s.max_first_order_error = std::max(
        s.max_first_order_error, std::abs(r.actual_retain_change - r.predicted_retain_change));
  }
  if (!record.steps.empty()) s.mean_entanglement = ent / record.steps.size();
  return record;
}

void write_episode_csv(const EpisodeRecord& record, std::ostream& out) {
  out << "# seed=" << record.config.task.seed << '\n';
  out << "step,L_f,L_r,kl_anchor,entanglement,predicted_retain_change,"
         "actual_retain_change,predicted_joint_change,basis_rank,cap_applied,"
         "kept_count\n";
  for (const StepRecord& r : record.steps) {
    out << r.step << ',' << format_double(r.forget_loss) << ','
        << format_double(r.retain_loss) << ',' << format_double(r.kl_anchor) << ','
        << format_double(r.entanglement) << ','
        << format_double(r.predicted_retain_change) << ','
        << format_double(r.actual_retain_change) << ','
        << format_double(r.predicted_joint_change) << ',' << r.basis_rank << ','
        << (r.cap_applied ? 1 : 0) << ',' << r.kept_count << '\n';
  }
}

// ---------------------------------------------------------------------------
// Audit

std::size_t AuditReport::violations() const {
  std::size_t n = 0;
  for (const AuditCheck& c : checks) n += c.failed;
  return n;
}

namespace {

void tally(AuditCheck& check, double error, bool ok) {
  ++check.evaluated;
  if (!ok) ++check.failed;
  if (std::isfinite(error)) {
    check.worst_error = std::max(check.worst_error, error);
  } else {
    check.worst_error = std::numeric_limits<double>::infinity();
  }
}

}  // namespace

AuditReport theory_audit(const EpisodeRecord& record, const AuditTolerances& tol) {
  if (record.config.variant != Variant::split_theory_step) {
    throw std::invalid_argument("theory_audit needs a split_theory_step episode, got " +
                                to_string(record.config.variant));
  }
  AuditCheck first_order{"first_order_vs_finite_difference"};
  AuditCheck descent{"retain_descent_within_stepsize_bound"};
  AuditCheck lemma{"retain_descent_lemma_envelope"};
  AuditCheck identity{"joint_first_order_identity"};
  AuditCheck nonpos{"joint_nonpositivity_conditions"};
  const double beta = record.config.gu.beta;

  for (const StepRecord& r : record.steps) {
    const double fo_err = std::abs(r.predicted_retain_change - r.fd_retain_change);
    tally(first_order, fo_err,
          fo_err <= tol.first_order_rtol * r.first_order_scale + 1e-14);

    const double loss_slack = 1e-12 * std::max(1.0, std::abs(r.retain_loss));
    if (r.lipschitz_retain) {
      if (beta > 0.0 && r.first_order.retain_energy > 0.0 && r.rho > 0.0 &&
          r.rho < r.stepsize_bound) {
        tally(descent, std::max(0.0, r.actual_retain_change), r.actual_retain_change < 0.0);
      }
      const double envelope = 0.5 * *r.lipschitz_retain * r.step_norm_sq_h + loss_slack;
      const double excess = std::abs(r.actual_retain_change - r.direct_retain_change) - envelope;
      tally(lemma, std::max(0.0, excess), excess <= 0.0);
    }

    const double id_scale =
        r.rho * (r.first_order.perp_energy +
                 r.first_order.alpha * beta * r.first_order.retain_energy +
                 beta * std::abs(r.first_order.cross_term)) +
        r.joint_scale;
    if (!record.config.gu.sign_aware) {
      const double id_err = std::abs(r.predicted_joint_change - r.direct_joint_change);
      tally(identity, id_err, id_err <= tol.identity_rtol * id_scale + 1e-15);
      if (r.conditions.any()) {
        const double over = r.predicted_joint_change;
        tally(nonpos, std::max(0.0, over),
              over <= tol.nonpositivity_atol * std::max(1.0, id_scale));
      }
    }
  }
  return AuditReport{{first_order, descent, lemma, identity, nonpos}};
}

void write_audit_csv(const AuditReport& report, std::ostream& out) {
  out << "check,evaluated,failed,worst_error\n";
  for (const AuditCheck& c : report.checks) {
    out << c.name << ',' << c.evaluated << ',' << c.failed << ','
        << format_double(c.worst_error) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Comparisons

std::vector<ComparisonRow> compare_variants(std::span<const EpisodeConfig> configs) {
  if (configs.empty()) throw std::invalid_argument("compare_variants: no configs");
  for (const EpisodeConfig& c : configs) {
    if (c.task.seed != configs.front().task.seed) {
      throw std::invalid_argument("compare_variants: configs use different seeds");
    }
  }
  std::vector<ComparisonRow> rows;
  for (const EpisodeConfig& c : configs) {
    const EpisodeRecord rec = run_episode(c);
    ComparisonRow row;
    row.variant = to_string(c.variant);
    row.delta_forget_loss = rec.summary.delta_forget_loss;
    row.delta_retain_loss = rec.summary.delta_retain_loss;
    row.mean_entanglement = rec.summary.mean_entanglement;
    row.final_kl_anchor = rec.summary.final_kl_anchor;
    row.status = rec.status == EpisodeStatus::ok ? "ok" : "non_finite";
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ComparisonRow> compare_variants(const EpisodeConfig& base,
                                            std::span<const Variant> variants) {
  std::vector<EpisodeConfig> configs;
  for (Variant v : variants) {
    EpisodeConfig c = base;
    c.variant = v;
    configs.push_back(c);
  }
  return compare_variants(std::span<const EpisodeConfig>(configs));
}

void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out,
                          std::uint64_t seed) {
  out << "# seed=" << seed << '\n';
  out << "variant,delta_L_f,delta_L_r,mean_entanglement,final_kl_anchor,status\n";
  for (const ComparisonRow& r : rows) {
    out << r.variant << ',' << format_double(r.delta_forget_loss) << ','
        << format_double(r.delta_retain_loss) << ','
        << format_double(r.mean_entanglement) << ','
        << format_double(r.final_kl_anchor) << ',' << r.status << '\n';
  }
}

}  // namespace gu
