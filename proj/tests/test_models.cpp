#include <gtest/gtest.h>

#include <cmath>

#include "gu/analysis.hpp"
#include "gu/models.hpp"
#include "test_util.hpp"

namespace gu {
namespace {

using testing::gaussian;
using testing::random_metric;
using testing::Rng;

// Coordinate-wise central differences against the analytic gradient.
double gradient_check(const DifferentiableObjective& obj, const Vector& theta,
                      double h = 1e-5) {
  const Vector g = obj.gradient(theta);
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Vector plus = theta, minus = theta;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (obj.loss(plus) - obj.loss(minus)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
  }
  return worst;
}

TEST(QuadraticObjective, Examples) {
  const QuadraticObjective q(Vector{0.0}, Vector{2.0});
  EXPECT_EQ(q.loss(Vector{3.0}), 9.0);
  EXPECT_EQ(q.gradient(Vector{3.0}), (Vector{6.0}));
  const QuadraticObjective c(Vector{1.0, -2.0}, Vector{1.0, 3.0});
  EXPECT_EQ(c.loss(Vector{1.0, -2.0}), 0.0);
  EXPECT_EQ(c.gradient(Vector{1.0, -2.0}), (Vector{0.0, 0.0}));
  EXPECT_THROW(QuadraticObjective(Vector{0.0}, Vector{0.0}), std::invalid_argument);
  EXPECT_THROW(QuadraticObjective(Vector{0.0}, Vector{-1.0}), std::invalid_argument);
}

TEST(QuadraticObjective, LipschitzMatchesDenseEigenvalue) {
  Rng rng(41);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = testing::uniform_size(rng, 2, 12);
    Vector c = gaussian(rng, n);
    for (double& x : c) x = 0.1 + x * x;
    const QuadraticObjective q(gaussian(rng, n), c);
    const DiagonalMetric m = random_metric(rng, n);
    // Largest eigenvalue of H^{-1/2} C H^{-1/2} (self-adjoint form of H^{-1} C).
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t j = 0; j < n; ++j) a(j, j) = c[j] / m.diag_h()[j];
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().maxCoeff();
    EXPECT_NEAR(*q.lipschitz_h(m), top, 1e-12 * top);
  }
}

TEST(QuadraticObjective, DescentLemmaHolds) {
  Rng rng(42);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t n = 6;
    Vector c = gaussian(rng, n);
    for (double& x : c) x = 0.1 + x * x;
    const QuadraticObjective q(gaussian(rng, n), c);
    const DiagonalMetric m = random_metric(rng, n);
    const Vector theta = gaussian(rng, n), step = gaussian(rng, n);
    const double lhs = q.loss(add(theta, step)) - q.loss(theta) - dot(q.gradient(theta), step);
    EXPECT_LE(lhs, 0.5 * *q.lipschitz_h(m) * inner(step, step, m) * (1 + 1e-12) + 1e-12);
  }
}

TEST(ScaledObjective, NegatesLossGradientAndKeepsLipschitz) {
  auto base = quadratic_objective(Vector{0.0, 0.0}, Vector{2.0, 4.0});
  const ScaledObjective neg(base, -1.0);
  const Vector theta{1.0, 1.0};
  EXPECT_EQ(neg.loss(theta), -base->loss(theta));
  EXPECT_EQ(neg.gradient(theta), scaled(base->gradient(theta), -1.0));
  EXPECT_EQ(*neg.lipschitz_h(DiagonalMetric::identity(2)), 4.0);
}

TEST(LogisticObjective, SingleSampleAtOrigin) {
  const Vector x{1.0, -2.0, 0.5};
  for (std::size_t label : {0u, 1u}) {
    const auto obj = logistic_objective({Sample{x, label}});
    EXPECT_NEAR(obj->loss(Vector(3, 0.0)), std::log(2.0), 1e-15);
    const double sign = label == 1 ? -0.5 : 0.5;
    const Vector g = obj->gradient(Vector(3, 0.0));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(g[i], sign * x[i], 1e-15);
  }
}

TEST(LogisticObjective, SeparableLimit) {
  const auto obj = logistic_objective({Sample{{1.0, 0.0}, 1}, Sample{{-1.0, 0.0}, 0}});
  EXPECT_LT(obj->loss(Vector{20.0, 0.0}), 1e-3);
  EXPECT_THROW(logistic_objective({}), std::invalid_argument);
}

TEST(LogisticObjective, GradientCheck) {
  Rng rng(43);
  const ForgetRetainTask task = make_task(6, 5, 9, 0.4, 2);
  const auto obj = logistic_objective(task.retain_samples);
  for (int i = 0; i < 100; ++i) EXPECT_LE(gradient_check(*obj, gaussian(rng, 6)), 1e-6);
}

TEST(MlpObjective, ZeroWeightsMseComesFromBiases) {
  const std::vector<Sample> samples{{{0.3, -0.2}, 0}, {{1.0, 0.5}, 1}};
  const auto obj =
      mlp_objective({2, 3, 2}, samples, Activation::tanh, ClassifierLoss::mse);
  const MlpModel model({2, 3, 2}, Activation::tanh);
  Vector theta(obj->dimension(), 0.0);
  // Output biases b = [0.2, -0.1]; with zero weights the logits equal b.
  theta[model.bias_offset(1)] = 0.2;
  theta[model.bias_offset(1) + 1] = -0.1;
  const double l0 = 0.5 * ((0.2 - 1) * (0.2 - 1) + 0.1 * 0.1);
  const double l1 = 0.5 * (0.2 * 0.2 + 1.1 * 1.1);
  EXPECT_NEAR(obj->loss(theta), 0.5 * (l0 + l1), 1e-15);
  EXPECT_LE(gradient_check(*obj, theta), 1e-6);
}

TEST(MlpObjective, IdentityNetworkReducesToLinearLogits) {
  // widths {d, d, 2} with identity activation, W1 = I, b1 = 0, W2 = [0; w]:
  // logits (0, w.x), exactly the logistic model.
  Rng rng(44);
  const std::size_t d = 4;
  const ForgetRetainTask task = make_task(d, 3, 6, 0.5, 4);
  const auto mlp = mlp_objective({d, d, 2}, task.retain_samples, Activation::identity);
  const auto logistic = logistic_objective(task.retain_samples);
  const MlpModel model({d, d, 2}, Activation::identity);
  const Vector w = gaussian(rng, d);
  Vector theta(mlp->dimension(), 0.0);
  for (std::size_t i = 0; i < d; ++i) theta[model.weight_offset(0) + i * d + i] = 1.0;
  for (std::size_t i = 0; i < d; ++i) theta[model.weight_offset(1) + d + i] = w[i];
  EXPECT_NEAR(mlp->loss(theta), logistic->loss(w), 1e-14);
  const Vector g = mlp->gradient(theta);
  const Vector gl = logistic->gradient(w);
  for (std::size_t i = 0; i < d; ++i) {
    EXPECT_NEAR(g[model.weight_offset(1) + d + i], gl[i], 1e-14);
  }
}

TEST(MlpObjective, GradientCheckCrossEntropyAndMse) {
  Rng rng(45);
  const ForgetRetainTask task = make_task(5, 4, 7, 0.3, 5);
  std::vector<Sample> samples = task.retain_samples;
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].label = i % 3;
  for (ClassifierLoss kind : {ClassifierLoss::cross_entropy, ClassifierLoss::mse}) {
    const auto obj = mlp_objective({5, 4, 3, 3}, samples, Activation::tanh, kind);
    for (int i = 0; i < 100; ++i) {
      EXPECT_LE(gradient_check(*obj, gaussian(rng, obj->dimension())), 1e-5);
    }
  }
}

TEST(MlpObjective, ErrorsOnBadShapes) {
  const std::vector<Sample> samples{{{0.3, -0.2}, 0}};
  EXPECT_THROW(mlp_objective({2, 2}, samples), std::invalid_argument);
  EXPECT_THROW(mlp_objective({3, 4, 2}, samples), DimensionError);
  EXPECT_THROW(mlp_objective({2, 4, 2}, {{{0.3, -0.2}, 5}}), std::invalid_argument);
}

TEST(PerSampleGradients, AverageToTheBatchGradient) {
  Rng rng(46);
  const ForgetRetainTask task = make_task(4, 3, 6, 0.5, 6);
  const auto obj = mlp_objective({4, 3, 2}, task.retain_samples);
  const Vector theta = gaussian(rng, obj->dimension());
  const auto per = obj->per_sample_gradients(theta);
  ASSERT_EQ(per.size(), 6u);
  Vector mean(obj->dimension(), 0.0);
  for (const Vector& g : per) axpy(1.0 / 6.0, g, mean);
  EXPECT_LE(testing::rel_err(mean, obj->gradient(theta)), 1e-14);
}

TEST(KlAnchor, ZeroAtReference) {
  Rng rng(47);
  const ForgetRetainTask task = make_task(4, 3, 6, 0.5, 7);
  auto model = std::make_shared<MlpModel>(std::vector<std::size_t>{4, 5, 3}, Activation::tanh);
  const Vector ref = gaussian(rng, model->parameter_count());
  const auto kl = kl_retain_anchor(model, ref, task.retain_samples);
  EXPECT_EQ(kl->loss(ref), 0.0);
  for (double g : kl->gradient(ref)) EXPECT_EQ(g, 0.0);
}

TEST(KlAnchor, BinaryHandValue) {
  // Logistic head with logits (0, w x): w = -ln 9 gives pi = (0.9, 0.1), the
  // reference w = 0 gives (0.5, 0.5).
  auto model = std::make_shared<LogisticModel>(1);
  const auto kl = kl_retain_anchor(model, Vector{0.0}, {Sample{{1.0}, 0}});
  const double expected = 0.9 * std::log(1.8) + 0.1 * std::log(0.2);
  EXPECT_NEAR(kl->loss(Vector{-std::log(9.0)}), expected, 1e-15);
  EXPECT_NEAR(expected, 0.3681, 1e-4);
}

TEST(KlAnchor, NonnegativeAndGradientCheck) {
  Rng rng(48);
  const ForgetRetainTask task = make_task(4, 3, 6, 0.5, 8);
  auto model = std::make_shared<MlpModel>(std::vector<std::size_t>{4, 5, 3}, Activation::tanh);
  const Vector ref = gaussian(rng, model->parameter_count());
  const auto kl = kl_retain_anchor(model, ref, task.retain_samples);
  for (int i = 0; i < 100; ++i) {
    Vector theta = ref;
    axpy(0.3, gaussian(rng, theta.size()), theta);
    EXPECT_GE(kl->loss(theta), 0.0);
    EXPECT_LE(gradient_check(*kl, theta), 1e-6);
  }
}

TEST(KlAnchor, ClampsVanishingProbabilities) {
  auto model = std::make_shared<LogisticModel>(1);
  const KlAnchorObjective kl(model, Vector{0.0}, {Sample{{1.0}, 0}});
  const auto far = kl.evaluate(Vector{80.0});  // class-0 probability ~ e^-80
  EXPECT_TRUE(far.clamped);
  EXPECT_TRUE(std::isfinite(far.loss));
  EXPECT_FALSE(kl.evaluate(Vector{1.0}).clamped);
}

TEST(MakeTask, DeterministicAndShaped) {
  const ForgetRetainTask a = make_task(10, 4, 7, 0.6, 99);
  const ForgetRetainTask b = make_task(10, 4, 7, 0.6, 99);
  EXPECT_EQ(a.forget_samples, b.forget_samples);
  EXPECT_EQ(a.retain_samples, b.retain_samples);
  EXPECT_EQ(a.forget_samples.size(), 4u);
  EXPECT_EQ(a.retain_samples.size(), 7u);
  EXPECT_NEAR(dot(a.forget_direction, a.retain_direction), 0.6, 1e-12);
  EXPECT_NE(make_task(10, 4, 7, 0.6, 100).forget_samples, a.forget_samples);
  for (const Sample& f : a.forget_samples) {
    for (const Sample& r : a.retain_samples) EXPECT_NE(f, r);
  }
  EXPECT_THROW(make_task(10, 0, 7, 0.6, 1), std::invalid_argument);
  EXPECT_THROW(make_task(10, 4, 7, 1.5, 1), std::invalid_argument);
}

double entanglement_ratio(double overlap) {
  const std::size_t d = 64;
  const ForgetRetainTask task = make_task(d, 8, 16, overlap, 12);
  const auto retain = logistic_objective(task.retain_samples);
  const auto forget = logistic_objective(task.forget_samples);
  const Vector theta(d, 0.0);
  RetainBasis basis(d, 16, 0.1);
  for (const Vector& g : retain->per_sample_gradients(theta)) basis.insert_retain_gradient(g);
  const Vector gf = forget->gradient(theta);
  return entanglement(basis, gf) / norm2(gf);
}

TEST(MakeTask, OverlapControlsEntanglement) {
  const double high = entanglement_ratio(1.0);
  const double low = entanglement_ratio(0.0);
  EXPECT_GT(high, 0.9);
  EXPECT_LT(low, high);
  EXPECT_LT(low, 0.8 * high);
}

TEST(TaskText, RoundTrip) {
  TaskSpec spec;
  spec.dimension = 12;
  spec.forget_count = 3;
  spec.retain_count = 5;
  spec.overlap = 0.123456789;
  spec.seed = 77;
  EXPECT_EQ(task_from_text(task_to_text(spec)), spec);
  EXPECT_THROW(task_from_text("dimension=3\nbogus=1\n"), std::invalid_argument);
}

}  // namespace
}  // namespace gu
