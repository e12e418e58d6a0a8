#pragma once

// Unlearning episodes on synthetic tasks: the GU loop, its baselines, the
// online theory audit, and CSV artifacts.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gu/analysis.hpp"
#include "gu/gu_step.hpp"
#include "gu/models.hpp"

namespace gu {

enum class Variant { no_projection, gu_projection, gu_sign_aware, split_theory_step };
enum class ModelKind { quadratic, logistic, mlp };
enum class OptimizerKind { sgd, adam };

std::string to_string(Variant v);
std::string to_string(ModelKind k);
std::string to_string(OptimizerKind k);
std::string to_string(Activation a);
Variant parse_variant(std::string_view s);
ModelKind parse_model_kind(std::string_view s);
OptimizerKind parse_optimizer_kind(std::string_view s);
Activation parse_activation(std::string_view s);

struct ModelConfig {
  ModelKind kind = ModelKind::mlp;
  std::vector<std::size_t> hidden = {16};
  Activation activation = Activation::tanh;
  std::size_t classes = 2;
  bool operator==(const ModelConfig&) const = default;
};

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool bias_corrected_metric = true;
  bool operator==(const OptimizerConfig&) const = default;
};

// Training of the reference model the episode starts from.
struct ReferenceConfig {
  std::size_t pretrain_steps = 300;
  double learning_rate = 0.05;
  bool operator==(const ReferenceConfig&) const = default;
};

struct TheoryConfig {
  // > 0: the theory step uses rho = rho_fraction * descent_stepsize_bound
  // whenever the retain Lipschitz constant is known; otherwise gu.rho.
  double rho_fraction = 0.0;
  double fd_step = 1e-5;
  double first_order_rtol = 1e-6;
  double identity_rtol = 1e-9;
  double nonpositivity_atol = 1e-12;
  bool operator==(const TheoryConfig&) const = default;
};

struct EpisodeConfig {
  TaskSpec task;
  ModelConfig model;
  OptimizerConfig optimizer;
  GUConfig gu;
  ReferenceConfig reference;
  TheoryConfig theory;
  std::size_t steps = 100;
  Variant variant = Variant::gu_projection;

  void validate() const;
  bool operator==(const EpisodeConfig&) const = default;
};

// Objectives of one episode.
struct Problem {
  ForgetRetainTask task;
  ObjectivePtr forget;  // L_f, minimized (ascent on the forget task loss)
  ObjectivePtr retain;  // L_r, the retain task loss
  ObjectivePtr anchor;  // KL retain anchor against the reference
  // Per-sample Euclidean gradients of the retain loss, used to build T_r.
  std::function<std::vector<Vector>(ConstSpan)> retain_sample_gradients;
  Vector initial_parameters;  // the reference parameters
};

Problem build_problem(const EpisodeConfig& cfg);

struct StepRecord {
  std::size_t step = 0;
  double forget_loss = 0.0;
  double retain_loss = 0.0;
  double kl_anchor = 0.0;
  double entanglement = 0.0;
  double predicted_retain_change = 0.0;
  double actual_retain_change = 0.0;
  double predicted_joint_change = 0.0;
  std::size_t basis_rank = 0;
  bool cap_applied = false;
  std::size_t kept_count = 0;

  // Audit inputs. "direct" values are <grad, dtheta> on the actual step.
  double direct_retain_change = 0.0;
  double fd_retain_change = 0.0;
  double direct_joint_change = 0.0;
  double actual_joint_change = 0.0;
  double first_order_scale = 0.0;  // ||grad L_r|| * ||dtheta||
  double joint_scale = 0.0;
  double rho = 0.0;
  double stepsize_bound = 0.0;
  double step_norm_sq_h = 0.0;
  std::optional<double> lipschitz_retain;
  FirstOrderReport first_order;
  NonpositivityConditions conditions;

  StepReport report;
};

enum class EpisodeStatus { ok, non_finite };

struct EpisodeSummary {
  double initial_forget_loss = 0.0;
  double final_forget_loss = 0.0;
  double initial_retain_loss = 0.0;
  double final_retain_loss = 0.0;
  double final_kl_anchor = 0.0;
  double delta_forget_loss = 0.0;
  double delta_retain_loss = 0.0;
  double mean_entanglement = 0.0;
  double max_first_order_error = 0.0;
  std::vector<std::size_t> basis_rank_history;
};

struct EpisodeRecord {
  EpisodeConfig config;
  std::vector<StepRecord> steps;
  Vector final_parameters;
  EpisodeSummary summary;
  EpisodeStatus status = EpisodeStatus::ok;
  std::string error;
};

EpisodeRecord run_episode(const EpisodeConfig& cfg);

// Episode CSV: '# seed=N' comment, header row, one row per step.
void write_episode_csv(const EpisodeRecord& record, std::ostream& out);

struct AuditTolerances {
  double first_order_rtol = 1e-6;
  double identity_rtol = 1e-9;
  double nonpositivity_atol = 1e-12;
  static AuditTolerances from(const TheoryConfig& t) {
    return {t.first_order_rtol, t.identity_rtol, t.nonpositivity_atol};
  }
};

struct AuditCheck {
  std::string name;
  std::size_t evaluated = 0;
  std::size_t failed = 0;
  double worst_error = 0.0;
};

struct AuditReport {
  std::vector<AuditCheck> checks;
  std::size_t violations() const;
  bool passed() const { return violations() == 0; }
};

// Per step: (i) closed-form vs finite-difference retain change, (ii) strict
// retain descent inside the step-size bound, (ii') the descent-lemma envelope,
// (iii) the exact joint identity, (iv) joint nonpositivity under the
// sufficient conditions. Throws for records of non-theory variants.
AuditReport theory_audit(const EpisodeRecord& record, const AuditTolerances& tol);
void write_audit_csv(const AuditReport& report, std::ostream& out);

struct ComparisonRow {
  std::string variant;
  double delta_forget_loss = 0.0;
  double delta_retain_loss = 0.0;
  double mean_entanglement = 0.0;
  double final_kl_anchor = 0.0;
  std::string status;
  bool operator==(const ComparisonRow&) const = default;
};

// Runs each config; all must share the task seed.
std::vector<ComparisonRow> compare_variants(std::span<const EpisodeConfig> configs);
std::vector<ComparisonRow> compare_variants(const EpisodeConfig& base,
                                            std::span<const Variant> variants);
void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out,
                          std::uint64_t seed);

std::string format_double(double v);

}  // namespace gu
