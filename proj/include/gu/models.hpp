#pragma once

// Desk-scale differentiable objectives with analytic gradients, and the
// synthetic forget/retain tasks they are trained on.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gu/linalg.hpp"
#include "gu/metric.hpp"

namespace gu {

class DifferentiableObjective {
 public:
  virtual ~DifferentiableObjective() = default;
  virtual std::size_t dimension() const = 0;
  virtual double loss(ConstSpan theta) const = 0;
  virtual Vector gradient(ConstSpan theta) const = 0;
  // Lipschitz constant of the H-gradient under ||.||_H, when known exactly.
  virtual std::optional<double> lipschitz_h(const DiagonalMetric&) const {
    return std::nullopt;
  }
};

using ObjectivePtr = std::shared_ptr<const DifferentiableObjective>;

// ---------------------------------------------------------------------------
// Quadratics

class QuadraticObjective final : public DifferentiableObjective {
 public:
  // L = 1/2 sum_i c_i (theta_i - center_i)^2. Throws on c_i <= 0.
  QuadraticObjective(Vector center, Vector curvature_diag);

  std::size_t dimension() const override { return center_.size(); }
  double loss(ConstSpan theta) const override;
  Vector gradient(ConstSpan theta) const override;
  // max_i c_i / h_i
  std::optional<double> lipschitz_h(const DiagonalMetric& m) const override;

  const Vector& center() const { return center_; }
  const Vector& curvature() const { return curvature_; }

 private:
  Vector center_;
  Vector curvature_;
};

std::shared_ptr<QuadraticObjective> quadratic_objective(Vector center,
                                                        Vector curvature_diag);

// factor * base, e.g. factor = -1 turns a loss into its ascent objective.
class ScaledObjective final : public DifferentiableObjective {
 public:
  ScaledObjective(ObjectivePtr base, double factor);
  std::size_t dimension() const override { return base_->dimension(); }
  double loss(ConstSpan theta) const override;
  Vector gradient(ConstSpan theta) const override;
  std::optional<double> lipschitz_h(const DiagonalMetric& m) const override;

 private:
  ObjectivePtr base_;
  double factor_;
};

// ---------------------------------------------------------------------------
// Classifiers

struct Sample {
  Vector input;
  std::size_t label = 0;
  bool operator==(const Sample&) const = default;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::size_t parameter_count() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual Vector logits(ConstSpan theta, ConstSpan x) const = 0;
  // grad += J_theta(logits)^T dlogits
  virtual void backprop(ConstSpan theta, ConstSpan x, ConstSpan dlogits,
                        std::span<double> grad) const = 0;
  virtual Vector initial_parameters(std::uint64_t seed) const = 0;
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

// Linear binary classifier without bias: logits (0, w.x), so the class-1
// probability is sigmoid(w.x).
class LogisticModel final : public Classifier {
 public:
  explicit LogisticModel(std::size_t input_dim);
  std::size_t parameter_count() const override { return dim_; }
  std::size_t input_dim() const override { return dim_; }
  std::size_t num_classes() const override { return 2; }
  Vector logits(ConstSpan theta, ConstSpan x) const override;
  void backprop(ConstSpan theta, ConstSpan x, ConstSpan dlogits,
                std::span<double> grad) const override;
  Vector initial_parameters(std::uint64_t seed) const override;

 private:
  std::size_t dim_;
};

enum class Activation { tanh, identity };

// Fully connected network; widths = {input, hidden..., classes}. Hidden layers
// use `activation`, the output layer is linear. Parameters are laid out layer
// by layer as row-major W (out x in) followed by b.
class MlpModel final : public Classifier {
 public:
  MlpModel(std::vector<std::size_t> widths, Activation activation);
  std::size_t parameter_count() const override { return parameter_count_; }
  std::size_t input_dim() const override { return widths_.front(); }
  std::size_t num_classes() const override { return widths_.back(); }
  Vector logits(ConstSpan theta, ConstSpan x) const override;
  void backprop(ConstSpan theta, ConstSpan x, ConstSpan dlogits,
                std::span<double> grad) const override;
  Vector initial_parameters(std::uint64_t seed) const override;

  const std::vector<std::size_t>& widths() const { return widths_; }
  // Offset of layer l's weight block and bias block in theta.
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + widths_[layer + 1] * widths_[layer];
  }

 private:
  // Pre-activations of every layer.
  std::vector<Vector> forward(ConstSpan theta, ConstSpan x) const;

  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
  std::size_t parameter_count_ = 0;
  Activation activation_;
};

Vector log_softmax(ConstSpan logits);

enum class ClassifierLoss { cross_entropy, mse };

// Mean per-sample loss of a classifier over a sample set. MSE compares the
// logits with one-hot targets: 1/2 ||z - e_y||^2.
class ClassifierObjective final : public DifferentiableObjective {
 public:
  ClassifierObjective(ClassifierPtr model, std::vector<Sample> samples,
                      ClassifierLoss kind = ClassifierLoss::cross_entropy);
  std::size_t dimension() const override { return model_->parameter_count(); }
  double loss(ConstSpan theta) const override;
  Vector gradient(ConstSpan theta) const override;

  // Gradient of the single-sample loss, one vector per sample.
  std::vector<Vector> per_sample_gradients(ConstSpan theta) const;

  const Classifier& model() const { return *model_; }
  const std::vector<Sample>& samples() const { return samples_; }

 private:
  double sample_loss(ConstSpan theta, const Sample& s, Vector* dlogits) const;

  ClassifierPtr model_;
  std::vector<Sample> samples_;
  ClassifierLoss kind_;
};

std::shared_ptr<ClassifierObjective> logistic_objective(std::vector<Sample> samples);
std::shared_ptr<ClassifierObjective> mlp_objective(
    std::vector<std::size_t> widths, std::vector<Sample> samples,
    Activation activation = Activation::tanh,
    ClassifierLoss kind = ClassifierLoss::cross_entropy);

// Mean KL(pi_theta(.|x) || pi_ref(.|x)) over retain inputs. Exactly zero with
// zero gradient at theta == theta_ref.
class KlAnchorObjective final : public DifferentiableObjective {
 public:
  static constexpr double kProbabilityFloor = 1e-12;

  KlAnchorObjective(ClassifierPtr model, Vector theta_ref,
                    std::vector<Sample> retain_samples);

  struct Evaluation {
    double loss = 0.0;
    Vector gradient;
    // A probability fell below the floor and its log was clamped.
    bool clamped = false;
  };
  Evaluation evaluate(ConstSpan theta) const;

  std::size_t dimension() const override { return model_->parameter_count(); }
  double loss(ConstSpan theta) const override { return evaluate(theta).loss; }
  Vector gradient(ConstSpan theta) const override {
    return evaluate(theta).gradient;
  }

 private:
  ClassifierPtr model_;
  Vector theta_ref_;
  std::vector<Sample> samples_;
  std::vector<Vector> ref_log_probs_;
};

std::shared_ptr<KlAnchorObjective> kl_retain_anchor(ClassifierPtr model,
                                                    Vector theta_ref,
                                                    std::vector<Sample> retain_samples);

// ---------------------------------------------------------------------------
// Synthetic tasks

struct TaskSpec {
  std::size_t dimension = 8;
  std::size_t forget_count = 8;
  std::size_t retain_count = 16;
  double overlap = 0.5;
  std::uint64_t seed = 1;
  bool operator==(const TaskSpec&) const = default;
};

struct ForgetRetainTask {
  TaskSpec spec;
  std::vector<Sample> forget_samples;
  std::vector<Sample> retain_samples;
  // Per-population unit mean directions; cos(forget, retain) == overlap.
  Vector forget_direction;
  Vector retain_direction;
  // Filled once a reference model has been trained on the task.
  Vector reference_parameters;
};

// Two labelled clusters per population, label y at +-(direction) plus
// isotropic noise. Deterministic in `seed`.
ForgetRetainTask make_task(std::size_t dimension, std::size_t forget_count,
                           std::size_t retain_count, double overlap,
                           std::uint64_t seed);
ForgetRetainTask make_task(const TaskSpec& spec);

// key=value text fixture; loading regenerates the samples from the seed.
std::string task_to_text(const TaskSpec& spec);
TaskSpec task_from_text(const std::string& text);

}  // namespace gu
