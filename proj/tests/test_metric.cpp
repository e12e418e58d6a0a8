#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gu/metric.hpp"
#include "test_util.hpp"

namespace gu {
namespace {

using testing::gaussian;
using testing::random_metric;
using testing::Rng;
using testing::unit;

TEST(MetricFromSecondMoments, ZeroMomentsWithUnitEpsilonIsIdentity) {
  const DiagonalMetric m = metric_from_second_moments(Vector(5, 0.0), 1.0);
  for (double h : m.diag_h()) EXPECT_EQ(h, 1.0);
  for (double w : m.whitener()) EXPECT_EQ(w, 1.0);
}

TEST(MetricFromSecondMoments, SingleEntry) {
  const DiagonalMetric m = metric_from_second_moments(Vector{3.0}, 1.0);
  EXPECT_EQ(m.diag_h()[0], 0.25);
  EXPECT_EQ(m.whitener()[0], 0.5);
  EXPECT_EQ(m.epsilon(), 1.0);
}

TEST(MetricFromSecondMoments, WhitenerSquaredReproducesDiagonal) {
  Rng rng(1);
  Vector v = gaussian(rng, 8);
  for (double& x : v) x = x * x;
  const DiagonalMetric m = metric_from_second_moments(v, 1e-8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double w = 1.0 / std::sqrt(v[i] + 1e-8);
    EXPECT_DOUBLE_EQ(m.whitener()[i], w);
    EXPECT_EQ(m.diag_h()[i], m.whitener()[i] * m.whitener()[i]);
  }
}

TEST(MetricFromSecondMoments, RejectsBadInput) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(metric_from_second_moments(Vector{-1.0}, 1e-8), std::invalid_argument);
  EXPECT_THROW(metric_from_second_moments(Vector{nan}, 1e-8), std::invalid_argument);
  EXPECT_THROW(metric_from_second_moments(Vector{INFINITY}, 1e-8), std::invalid_argument);
  EXPECT_THROW(metric_from_second_moments(Vector{1.0}, 0.0), std::invalid_argument);
  EXPECT_THROW(DiagonalMetric::from_diagonal(Vector{1.0, 0.0}), std::invalid_argument);
}

TEST(Inner, HandExamples) {
  const DiagonalMetric m = DiagonalMetric::from_diagonal(Vector{4.0, 7.0, 2.0});
  EXPECT_EQ(inner(unit(3, 0), unit(3, 1), m), 0.0);
  EXPECT_EQ(inner(unit(3, 0), unit(3, 0), m), 4.0);
}

TEST(Inner, MatchesDenseProduct) {
  Rng rng(2);
  const DiagonalMetric m = random_metric(rng, 6);
  const Vector u = gaussian(rng, 6), v = gaussian(rng, 6);
  const Eigen::MatrixXd h = testing::to_eigen(m.diag_h()).asDiagonal();
  const double dense = testing::to_eigen(u).dot(h * testing::to_eigen(v));
  EXPECT_NEAR(inner(u, v, m), dense, 1e-12 * std::abs(dense));
  EXPECT_EQ(inner(u, v, m), inner(v, u, m));
}

TEST(Inner, DimensionMismatchThrows) {
  const DiagonalMetric m = DiagonalMetric::identity(3);
  EXPECT_THROW(inner(Vector(3, 1.0), Vector(2, 1.0), m), DimensionError);
  EXPECT_THROW(norm(Vector(4, 1.0), m), DimensionError);
  EXPECT_THROW(whiten(Vector(2, 1.0), m), DimensionError);
  EXPECT_THROW(h_gradient(Vector(2, 1.0), m), DimensionError);
}

TEST(Inner, PositiveDefinite) {
  Rng rng(3);
  const DiagonalMetric m = random_metric(rng, 10);
  for (int i = 0; i < 1000; ++i) {
    const Vector v = gaussian(rng, 10);
    EXPECT_GT(inner(v, v, m), 0.0);
  }
}

TEST(Norm, HandExamples) {
  const DiagonalMetric m = DiagonalMetric::from_diagonal(Vector{9.0, 1.0});
  EXPECT_EQ(norm(Vector{0.0, 0.0}, m), 0.0);
  EXPECT_EQ(norm(unit(2, 0), m), 3.0);
}

TEST(Norm, IsRootOfInnerAndWhitenedLength) {
  Rng rng(4);
  const DiagonalMetric m = random_metric(rng, 12);
  const Vector v = gaussian(rng, 12);
  EXPECT_NEAR(norm(v, m), std::sqrt(inner(v, v, m)), 1e-14 * norm(v, m));
  EXPECT_NEAR(norm(v, m), norm2(whiten(v, m)), 1e-12 * norm(v, m));
}

TEST(Whiten, IdentityMetricIsIdentityMap) {
  Rng rng(5);
  const Vector v = gaussian(rng, 7);
  EXPECT_EQ(whiten(v, DiagonalMetric::identity(7)), v);
  EXPECT_EQ(dewhiten(v, DiagonalMetric::identity(7)), v);
}

TEST(Whiten, RoundTripAndIsometry) {
  Rng rng(6);
  const DiagonalMetric m = random_metric(rng, 16);
  const Vector v = gaussian(rng, 16);
  const Vector back = dewhiten(whiten(v, m), m);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_LE(std::abs(back[i] - v[i]), 1e-12 * std::abs(v[i]));
  }
  for (int i = 0; i < 50; ++i) {
    const Vector a = gaussian(rng, 16), b = gaussian(rng, 16);
    const double h = inner(a, b, m);
    EXPECT_NEAR(dot(whiten(a, m), whiten(b, m)), h, 1e-12 * norm(a, m) * norm(b, m));
  }
}

TEST(HGradient, HandExamples) {
  EXPECT_EQ(h_gradient(Vector{2.0}, DiagonalMetric::from_diagonal(Vector{4.0})),
            (Vector{0.5}));
  const Vector g{1.0, -2.0, 3.0};
  EXPECT_EQ(h_gradient(g, DiagonalMetric::identity(3)), g);
}

TEST(HGradient, DualityWithEuclideanDerivative) {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const DiagonalMetric m = random_metric(rng, 10);
    const Vector g = gaussian(rng, 10), d = gaussian(rng, 10);
    const double euclid = dot(g, d);
    EXPECT_NEAR(inner(h_gradient(g, m), d, m), euclid,
                1e-12 * norm2(g) * norm2(d));
  }
}

}  // namespace
}  // namespace gu
