#include "gu/models.hpp"

#include "gu/parse.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gu {

// ---------------------------------------------------------------------------
// Quadratics

QuadraticObjective::QuadraticObjective(Vector center, Vector curvature_diag)
    : center_(std::move(center)), curvature_(std::move(curvature_diag)) {
  require_same_size(center_, curvature_, "quadratic_objective");
  for (double c : curvature_) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("quadratic curvature must be > 0");
    }
  }
}

double QuadraticObjective::loss(ConstSpan theta) const {
  require_same_size(theta, center_, "quadratic loss");
  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double d = theta[i] - center_[i];
    s += curvature_[i] * d * d;
  }
  return 0.5 * s;
}

Vector QuadraticObjective::gradient(ConstSpan theta) const {
  require_same_size(theta, center_, "quadratic gradient");
  Vector g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    g[i] = curvature_[i] * (theta[i] - center_[i]);
  }
  return g;
}

std::optional<double> QuadraticObjective::lipschitz_h(const DiagonalMetric& m) const {
  require_same_size(curvature_, m.diag_h(), "quadratic lipschitz_h");
  double best = 0.0;
  for (std::size_t i = 0; i < curvature_.size(); ++i) {
    best = std::max(best, curvature_[i] / m.diag_h()[i]);
  }
  return best;
}

std::shared_ptr<QuadraticObjective> quadratic_objective(Vector center,
                                                        Vector curvature_diag) {
  return std::make_shared<QuadraticObjective>(std::move(center),
                                              std::move(curvature_diag));
}

ScaledObjective::ScaledObjective(ObjectivePtr base, double factor)
    : base_(std::move(base)), factor_(factor) {
  if (!base_) throw std::invalid_argument("ScaledObjective: null base");
}

double ScaledObjective::loss(ConstSpan theta) const {
  return factor_ * base_->loss(theta);
}

Vector ScaledObjective::gradient(ConstSpan theta) const {
  return scaled(base_->gradient(theta), factor_);
}

std::optional<double> ScaledObjective::lipschitz_h(const DiagonalMetric& m) const {
  auto l = base_->lipschitz_h(m);
  if (!l) return std::nullopt;
  return std::abs(factor_) * *l;
}

// ---------------------------------------------------------------------------
// Classifiers

LogisticModel::LogisticModel(std::size_t input_dim) : dim_(input_dim) {
  if (input_dim == 0) throw std::invalid_argument("logistic: zero input dim");
}

Vector LogisticModel::logits(ConstSpan theta, ConstSpan x) const {
  if (theta.size() != dim_ || x.size() != dim_) {
    throw DimensionError("logistic: dimension mismatch");
  }
  return {0.0, dot(theta, x)};
}

void LogisticModel::backprop(ConstSpan theta, ConstSpan x, ConstSpan dlogits,
                             std::span<double> grad) const {
  if (theta.size() != dim_ || x.size() != dim_ || grad.size() != dim_ ||
      dlogits.size() != 2) {
    throw DimensionError("logistic backprop: dimension mismatch");
  }
  axpy(dlogits[1], x, grad);
}

Vector LogisticModel::initial_parameters(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  Vector theta(dim_);
  for (double& t : theta) t = normal(rng);
  return theta;
}

namespace {

double activate(Activation a, double z) {
  return a == Activation::tanh ? std::tanh(z) : z;
}

double activate_derivative(Activation a, double z) {
  if (a == Activation::identity) return 1.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

}  // namespace

MlpModel::MlpModel(std::vector<std::size_t> widths, Activation activation)
    : widths_(std::move(widths)), activation_(activation) {
  if (widths_.size() < 3) {
    throw std::invalid_argument("mlp needs at least one hidden layer");
  }
  for (std::size_t w : widths_) {
    if (w == 0) throw std::invalid_argument("mlp: zero layer width");
  }
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(parameter_count_);
    parameter_count_ += widths_[l + 1] * widths_[l] + widths_[l + 1];
  }
}

std::vector<Vector> MlpModel::forward(ConstSpan theta, ConstSpan x) const {
  if (theta.size() != parameter_count_) {
    throw DimensionError("mlp: parameter dimension mismatch");
  }
  if (x.size() != widths_.front()) throw DimensionError("mlp: input mismatch");
  const std::size_t layers = widths_.size() - 1;
  std::vector<Vector> pre(layers);
  Vector act(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const double* w = theta.data() + weight_offset(l);
    const double* b = theta.data() + bias_offset(l);
    Vector z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += w[o * in + i] * act[i];
      z[o] = s;
    }
    pre[l] = z;
    if (l + 1 < layers) {
      for (double& v : z) v = activate(activation_, v);
    }
    act = std::move(z);
  }
  return pre;
}

Vector MlpModel::logits(ConstSpan theta, ConstSpan x) const {
  return forward(theta, x).back();
}

void MlpModel::backprop(ConstSpan theta, ConstSpan x, ConstSpan dlogits,
                        std::span<double> grad) const {
  if (grad.size() != parameter_count_ || dlogits.size() != widths_.back()) {
    throw DimensionError("mlp backprop: dimension mismatch");
  }
  const std::vector<Vector> pre = forward(theta, x);
  const std::size_t layers = widths_.size() - 1;
  Vector delta(dlogits.begin(), dlogits.end());
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    Vector input(in);
    if (l == 0) {
      input.assign(x.begin(), x.end());
    } else {
      for (std::size_t i = 0; i < in; ++i) input[i] = activate(activation_, pre[l - 1][i]);
    }
    double* gw = grad.data() + weight_offset(l);
    double* gb = grad.data() + bias_offset(l);
    for (std::size_t o = 0; o < out; ++o) {
      gb[o] += delta[o];
      for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += delta[o] * input[i];
    }
    if (l == 0) break;
    const double* w = theta.data() + weight_offset(l);
    Vector prev(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t i = 0; i < in; ++i) prev[i] += w[o * in + i] * delta[o];
    }
    for (std::size_t i = 0; i < in; ++i) {
      prev[i] *= activate_derivative(activation_, pre[l - 1][i]);
    }
    delta = std::move(prev);
  }
}

Vector MlpModel::initial_parameters(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  Vector theta(parameter_count_, 0.0);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    std::normal_distribution<double> normal(
        0.0, 1.0 / std::sqrt(static_cast<double>(widths_[l])));
    const std::size_t n = widths_[l + 1] * widths_[l];
    for (std::size_t k = 0; k < n; ++k) theta[weight_offset(l) + k] = normal(rng);
  }
  return theta;
}

Vector log_softmax(ConstSpan z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

ClassifierObjective::ClassifierObjective(ClassifierPtr model,
                                         std::vector<Sample> samples,
                                         ClassifierLoss kind)
    : model_(std::move(model)), samples_(std::move(samples)), kind_(kind) {
  if (!model_) throw std::invalid_argument("classifier objective: null model");
  if (samples_.empty()) {
    throw std::invalid_argument("classifier objective: empty samples");
  }
  for (const Sample& s : samples_) {
    if (s.input.size() != model_->input_dim()) {
      throw DimensionError("classifier objective: sample dimension mismatch");
    }
    if (s.label >= model_->num_classes()) {
      throw std::invalid_argument("classifier objective: label out of range");
    }
  }
}

double ClassifierObjective::sample_loss(ConstSpan theta, const Sample& s,
                                        Vector* dlogits) const {
  const Vector z = model_->logits(theta, s.input);
  if (kind_ == ClassifierLoss::cross_entropy) {
    const Vector lp = log_softmax(z);
    if (dlogits) {
      dlogits->resize(z.size());
      for (std::size_t k = 0; k < z.size(); ++k) {
        (*dlogits)[k] = std::exp(lp[k]) - (k == s.label ? 1.0 : 0.0);
      }
    }
    return -lp[s.label];
  }
  double l = 0.0;
  if (dlogits) dlogits->resize(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double r = z[k] - (k == s.label ? 1.0 : 0.0);
    l += 0.5 * r * r;
    if (dlogits) (*dlogits)[k] = r;
  }
  return l;
}

double ClassifierObjective::loss(ConstSpan theta) const {
  double s = 0.0;
  for (const Sample& smp : samples_) s += sample_loss(theta, smp, nullptr);
  return s / static_cast<double>(samples_.size());
}

Vector ClassifierObjective::gradient(ConstSpan theta) const {
  Vector g(dimension(), 0.0);
  Vector dz;
  const double inv_n = 1.0 / static_cast<double>(samples_.size());
  for (const Sample& smp : samples_) {
    sample_loss(theta, smp, &dz);
    for (double& v : dz) v *= inv_n;
    model_->backprop(theta, smp.input, dz, g);
  }
  return g;
}

std::vector<Vector> ClassifierObjective::per_sample_gradients(ConstSpan theta) const {
  std::vector<Vector> out;
  out.reserve(samples_.size());
  Vector dz;
  for (const Sample& smp : samples_) {
    Vector g(dimension(), 0.0);
    sample_loss(theta, smp, &dz);
    model_->backprop(theta, smp.input, dz, g);
    out.push_back(std::move(g));
  }
  return out;
}

std::shared_ptr<ClassifierObjective> logistic_objective(std::vector<Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("logistic: empty samples");
  auto model = std::make_shared<LogisticModel>(samples.front().input.size());
  return std::make_shared<ClassifierObjective>(model, std::move(samples));
}

std::shared_ptr<ClassifierObjective> mlp_objective(std::vector<std::size_t> widths,
                                                   std::vector<Sample> samples,
                                                   Activation activation,
                                                   ClassifierLoss kind) {
  auto model = std::make_shared<MlpModel>(std::move(widths), activation);
  return std::make_shared<ClassifierObjective>(model, std::move(samples), kind);
}

KlAnchorObjective::KlAnchorObjective(ClassifierPtr model, Vector theta_ref,
                                     std::vector<Sample> retain_samples)
    : model_(std::move(model)),
      theta_ref_(std::move(theta_ref)),
      samples_(std::move(retain_samples)) {
  if (!model_) throw std::invalid_argument("kl anchor: null model");
  if (samples_.empty()) throw std::invalid_argument("kl anchor: empty samples");
  if (theta_ref_.size() != model_->parameter_count()) {
    throw DimensionError("kl anchor: reference dimension mismatch");
  }
  ref_log_probs_.reserve(samples_.size());
  for (const Sample& s : samples_) {
    ref_log_probs_.push_back(log_softmax(model_->logits(theta_ref_, s.input)));
  }
}

KlAnchorObjective::Evaluation KlAnchorObjective::evaluate(ConstSpan theta) const {
  static const double kLogFloor = std::log(kProbabilityFloor);
  Evaluation ev;
  ev.gradient.assign(dimension(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(samples_.size());
  for (std::size_t n = 0; n < samples_.size(); ++n) {
    const Vector lp = log_softmax(model_->logits(theta, samples_[n].input));
    const Vector& lq = ref_log_probs_[n];
    double kl = 0.0;
    Vector diff(lp.size());
    Vector p(lp.size());
    for (std::size_t k = 0; k < lp.size(); ++k) {
      double a = lp[k];
      double b = lq[k];
      if (a < kLogFloor || b < kLogFloor) ev.clamped = true;
      a = std::max(a, kLogFloor);
      b = std::max(b, kLogFloor);
      p[k] = std::exp(lp[k]);
      diff[k] = a - b;
      kl += p[k] * diff[k];
    }
    ev.loss += inv_n * kl;
    // d KL / d z_j = p_j (log p_j - log q_j - KL)
    Vector dz(lp.size());
    for (std::size_t k = 0; k < lp.size(); ++k) dz[k] = inv_n * p[k] * (diff[k] - kl);
    model_->backprop(theta, samples_[n].input, dz, ev.gradient);
  }
  return ev;
}

std::shared_ptr<KlAnchorObjective> kl_retain_anchor(ClassifierPtr model,
                                                    Vector theta_ref,
                                                    std::vector<Sample> retain_samples) {
  return std::make_shared<KlAnchorObjective>(std::move(model), std::move(theta_ref),
                                             std::move(retain_samples));
}

// ---------------------------------------------------------------------------
// Synthetic tasks

namespace {

constexpr double kClusterOffset = 1.0;
// Euclidean norm of the per-sample noise vector (in expectation).
constexpr double kNoiseNorm = 0.5;

Vector random_unit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(d);
  double n = 0.0;
  do {
    for (double& x : v) x = normal(rng);
    n = norm2(v);
  } while (n == 0.0);
  for (double& x : v) x /= n;
  return v;
}

std::vector<Sample> draw_population(std::mt19937_64& rng, ConstSpan direction,
                                    std::size_t count) {
  const std::size_t d = direction.size();
  std::normal_distribution<double> noise(0.0, kNoiseNorm / std::sqrt(static_cast<double>(d)));
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.label = i % 2;
    const double sign = s.label == 1 ? 1.0 : -1.0;
    s.input.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      s.input[k] = sign * kClusterOffset * direction[k] + noise(rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

ForgetRetainTask make_task(std::size_t dimension, std::size_t forget_count,
                           std::size_t retain_count, double overlap,
                           std::uint64_t seed) {
  if (forget_count == 0 || retain_count == 0) {
    throw std::invalid_argument("make_task: counts must be >= 1");
  }
  if (dimension < 2) throw std::invalid_argument("make_task: dimension must be >= 2");
  if (!(overlap >= 0.0 && overlap <= 1.0)) {
    throw std::invalid_argument("make_task: overlap must be in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  ForgetRetainTask task;
  task.spec = {dimension, forget_count, retain_count, overlap, seed};
  task.retain_direction = random_unit(rng, dimension);
  Vector other = random_unit(rng, dimension);
  axpy(-dot(other, task.retain_direction), task.retain_direction, other);
  const double on = norm2(other);
  for (double& x : other) x /= on;
  task.forget_direction = scaled(task.retain_direction, overlap);
  axpy(std::sqrt(std::max(0.0, 1.0 - overlap * overlap)), other,
       task.forget_direction);
  task.forget_samples = draw_population(rng, task.forget_direction, forget_count);
  task.retain_samples = draw_population(rng, task.retain_direction, retain_count);
  return task;
}

ForgetRetainTask make_task(const TaskSpec& spec) {
  return make_task(spec.dimension, spec.forget_count, spec.retain_count,
                   spec.overlap, spec.seed);
}

std::string task_to_text(const TaskSpec& spec) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "seed=" << spec.seed << '\n'
     << "dimension=" << spec.dimension << '\n'
     << "forget_count=" << spec.forget_count << '\n'
     << "retain_count=" << spec.retain_count << '\n'
     << "overlap=" << spec.overlap << '\n';
  return os.str();
}

TaskSpec task_from_text(const std::string& text) {
  TaskSpec spec;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("task text: missing '='");
    }
    const std::string_view key = trim(t.substr(0, eq));
    const std::string_view value = t.substr(eq + 1);
    if (key == "seed") spec.seed = parse_u64(value, key);
    else if (key == "dimension") spec.dimension = parse_u64(value, key);
    else if (key == "forget_count") spec.forget_count = parse_u64(value, key);
    else if (key == "retain_count") spec.retain_count = parse_u64(value, key);
    else if (key == "overlap") spec.overlap = parse_double(value, key);
    else throw std::invalid_argument("task text: unknown key " + std::string(key));
  }
  return spec;
}

}  // namespace gu
