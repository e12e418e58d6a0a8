#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gu/subspace.hpp"
#include "test_util.hpp"

namespace gu {
namespace {

using testing::gaussian;
using testing::random_basis;
using testing::random_metric;
using testing::rel_err;
using testing::Rng;
using testing::unit;

RetainBasis e1_basis(std::size_t n, double thresh = 0.1) {
  RetainBasis b(n, 16, thresh);
  b.insert_retain_gradient(unit(n, 0));
  return b;
}

TEST(InsertRetainGradient, FirstInsertionNormalizes) {
  RetainBasis b(3, 16, 0.1);
  const InsertResult r = b.insert_retain_gradient(Vector{3.0, 0.0, 0.0});
  EXPECT_TRUE(r.inserted);
  EXPECT_EQ(r.residual_ratio, 1.0);
  ASSERT_EQ(b.rank(), 1u);
  EXPECT_EQ(b.columns()[0], (Vector{1.0, 0.0, 0.0}));
  EXPECT_EQ(b.insert_count(), 1u);
}

TEST(InsertRetainGradient, AlreadySpannedIsRejected) {
  RetainBasis b = e1_basis(3);
  const InsertResult r = b.insert_retain_gradient(unit(3, 0));
  EXPECT_FALSE(r.inserted);
  EXPECT_EQ(r.residual_ratio, 0.0);
  EXPECT_EQ(b.rank(), 1u);
}

TEST(InsertRetainGradient, HandGramSchmidt) {
  RetainBasis b = e1_basis(3, 0.5);
  const double s = 1.0 / std::sqrt(2.0);
  const InsertResult r = b.insert_retain_gradient(Vector{s, s, 0.0});
  EXPECT_TRUE(r.inserted);
  EXPECT_NEAR(r.residual_ratio, 0.70710678118654757, 1e-15);
  ASSERT_EQ(b.rank(), 2u);
  EXPECT_NEAR(b.columns()[1][0], 0.0, 1e-15);
  EXPECT_NEAR(b.columns()[1][1], 1.0, 1e-15);
  EXPECT_EQ(b.columns()[1][2], 0.0);
}

TEST(InsertRetainGradient, ThresholdIsStrict) {
  RetainBasis b = e1_basis(3, 0.8);
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_FALSE(b.insert_retain_gradient(Vector{s, s, 0.0}).inserted);
}

TEST(InsertRetainGradient, ZeroAndNonFiniteInput) {
  RetainBasis b(3);
  const InsertResult r = b.insert_retain_gradient(Vector(3, 0.0));
  EXPECT_FALSE(r.inserted);
  EXPECT_EQ(r.residual_ratio, 0.0);
  EXPECT_THROW(b.insert_retain_gradient(Vector{1.0, NAN, 0.0}), std::invalid_argument);
  EXPECT_THROW(b.insert_retain_gradient(Vector{1.0, 0.0}), DimensionError);
  EXPECT_TRUE(b.empty());
}

TEST(InsertRetainGradient, RankCapBlocksButReportsRatio) {
  RetainBasis b(4, 2, 0.1);
  b.insert_retain_gradient(unit(4, 0));
  b.insert_retain_gradient(unit(4, 1));
  const InsertResult r = b.insert_retain_gradient(unit(4, 2));
  EXPECT_FALSE(r.inserted);
  EXPECT_EQ(r.residual_ratio, 1.0);
  EXPECT_EQ(b.rank(), 2u);
}

TEST(InsertRetainGradient, OrthonormalAfterManyInsertions) {
  Rng rng(11);
  for (std::size_t n : {8u, 32u, 64u}) {
    RetainBasis b(n, n, 1e-3);
    for (int i = 0; i < 1000; ++i) {
      // Nearly dependent inputs stress the re-orthogonalization pass.
      Vector g = gaussian(rng, n);
      if (!b.empty()) axpy(1e3, b.columns()[i % b.rank()], g);
      b.insert_retain_gradient(g);
    }
    ASSERT_LE(b.rank(), n);
    for (std::size_t i = 0; i < b.rank(); ++i) {
      EXPECT_NEAR(norm2(b.columns()[i]), 1.0, 1e-10);
      for (std::size_t j = 0; j < b.rank(); ++j) {
        EXPECT_LE(std::abs(dot(b.columns()[i], b.columns()[j]) - (i == j ? 1.0 : 0.0)),
                  1e-8);
      }
    }
  }
}

TEST(Projectors, EmptyBasis) {
  const RetainBasis b(3);
  const Vector v{2.0, 5.0, 0.0};
  EXPECT_EQ(b.project_tangent(v), Vector(3, 0.0));
  EXPECT_EQ(b.project_normal(v), v);
  EXPECT_EQ(entanglement(b, v), 0.0);
}

TEST(Projectors, HandExamples) {
  const RetainBasis b = e1_basis(3);
  EXPECT_EQ(project_tangent(b, Vector{2.0, 5.0, 0.0}), (Vector{2.0, 0.0, 0.0}));
  EXPECT_EQ(project_normal(b, Vector{2.0, 5.0, 0.0}), (Vector{0.0, 5.0, 0.0}));
  EXPECT_EQ(entanglement(b, Vector{3.0, 4.0, 0.0}), 3.0);
  EXPECT_EQ(entanglement(b, Vector{0.0, 4.0, 1.0}), 0.0);
}

TEST(Projectors, MatchEuclideanDenseOracle) {
  Rng rng(12);
  const RetainBasis b = random_basis(rng, 10, 3);
  Eigen::MatrixXd u(10, 3);
  for (int j = 0; j < 3; ++j) u.col(j) = testing::to_eigen(b.columns()[j]);
  const Eigen::MatrixXd p = u * (u.transpose() * u).inverse() * u.transpose();
  const Vector v = gaussian(rng, 10);
  const Vector oracle = testing::from_eigen(p * testing::to_eigen(v));
  EXPECT_LE(rel_err(b.project_tangent(v), oracle), 1e-10);
  EXPECT_NEAR(entanglement(b, v), testing::to_eigen(oracle).norm(), 1e-10);
}

TEST(Projectors, AlgebraicIdentities) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = testing::uniform_size(rng, 4, 40);
    const RetainBasis b = random_basis(rng, n, testing::uniform_size(rng, 1, n - 1));
    const Vector v = gaussian(rng, n), w = gaussian(rng, n);
    const Vector t = b.project_tangent(v);
    const Vector nv = b.project_normal(v);
    EXPECT_LE(rel_err(b.project_tangent(t), t), 1e-10);
    EXPECT_LE(rel_err(add(t, nv), v), 1e-12);
    for (const Vector& u : b.columns()) EXPECT_LE(std::abs(dot(u, nv)), 1e-10 * norm2(v));
    EXPECT_LE(std::abs(dot(b.project_tangent(w), nv)), 1e-10 * norm2(v) * norm2(w));
  }
}

TEST(Projectors, RawCoordinatesMatchMetricProjectorFormula) {
  Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = testing::uniform_size(rng, 4, 32);
    const DiagonalMetric m = random_metric(rng, n);
    // Span chosen from raw retain gradients, the way the harness builds it.
    const std::size_t k = testing::uniform_size(rng, 1, n / 2);
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    RetainBasis b(n, k, 1e-9);
    for (std::size_t j = 0; j < k; ++j) {
      const Vector g = gaussian(rng, n);
      raw.col(static_cast<Eigen::Index>(j)) = testing::to_eigen(g);
      b.insert_retain_gradient(whiten(g, m));
    }
    ASSERT_EQ(b.rank(), k);
    const Eigen::MatrixXd p = testing::dense_projector(raw, m.diag_h());
    const Vector v = gaussian(rng, n);
    const Vector ours = dewhiten(b.project_tangent(whiten(v, m)), m);
    EXPECT_LE(rel_err(ours, testing::from_eigen(p * testing::to_eigen(v))), 1e-9);
  }
}

TEST(Projectors, NormalPartIsHOrthogonalToRetainSpan) {
  Rng rng(15);
  const std::size_t n = 20;
  const DiagonalMetric m = random_metric(rng, n);
  std::vector<Vector> retain;
  RetainBasis b(n, 8, 1e-9);
  for (int j = 0; j < 5; ++j) {
    retain.push_back(gaussian(rng, n));
    b.insert_retain_gradient(whiten(retain.back(), m));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const Vector v = gaussian(rng, n);
    const Vector dtheta = dewhiten(b.project_normal(whiten(v, m)), m);
    Vector combo(n, 0.0);
    for (const Vector& g : retain) axpy(gaussian(rng, 1)[0], g, combo);
    EXPECT_LE(std::abs(inner(dtheta, combo, m)), 1e-9 * norm(v, m) * norm(combo, m));
  }
}

TEST(PrincipalAngle, HandExamples) {
  const RetainBasis a = e1_basis(3);
  RetainBasis b(3);
  b.insert_retain_gradient(unit(3, 1));
  RetainBasis c(3);
  c.insert_retain_gradient(Vector{1.0, 1.0, 0.0});
  EXPECT_NEAR(principal_angle_diagnostic(a, a), 0.0, 1e-7);
  EXPECT_NEAR(principal_angle_diagnostic(a, b), 1.0, 1e-15);
  EXPECT_NEAR(principal_angle_diagnostic(a, c), 0.70710678118654757, 1e-12);
}

TEST(PrincipalAngle, ErrorsAndRange) {
  Rng rng(16);
  const RetainBasis a = random_basis(rng, 12, 4), b = random_basis(rng, 12, 3);
  const double s = principal_angle_diagnostic(a, b);
  EXPECT_GE(s, 0.0);
  EXPECT_LE(s, 1.0);
  EXPECT_THROW(principal_angle_diagnostic(a, RetainBasis(12)), std::invalid_argument);
  EXPECT_THROW(principal_angle_diagnostic(a, random_basis(rng, 5, 2)), DimensionError);
}

TEST(BasisText, RoundTripIsExact) {
  Rng rng(17);
  const RetainBasis b = random_basis(rng, 9, 4);
  const RetainBasis back = RetainBasis::from_text(b.to_text(), 16, 0.1);
  EXPECT_EQ(back.columns(), b.columns());
  EXPECT_THROW(RetainBasis::from_text("1 2\n3\n", 16, 0.1), DimensionError);
  EXPECT_THROW(RetainBasis::from_text("1 x\n", 16, 0.1), std::invalid_argument);
}

TEST(RetainSubspaceTracker, RebuildUnderNewMetricRestoresOrthonormality) {
  Rng rng(18);
  const std::size_t n = 15;
  RetainSubspaceTracker tracker(n, 16, 0.1);
  std::vector<Vector> grads;
  for (int i = 0; i < 6; ++i) grads.push_back(gaussian(rng, n));
  tracker.refresh(grads);
  EXPECT_EQ(tracker.buffered(), 6u);
  for (int round = 0; round < 3; ++round) {
    const DiagonalMetric m = random_metric(rng, n);
    const Vector lead = gaussian(rng, n);
    const RetainBasis& b =
        tracker.rebuild({lead}, [&](const Vector& g) { return whiten(g, m); });
    EXPECT_EQ(b.rank(), 7u);
    const Eigen::MatrixXd u = testing::raw_columns(b, m);
    const Eigen::MatrixXd gram =
        u.transpose() * testing::to_eigen(m.diag_h()).asDiagonal() * u;
    EXPECT_LE((gram - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-10);
    // The leading vector is spanned exactly.
    EXPECT_LE(norm2(b.project_normal(whiten(lead, m))), 1e-10 * norm(lead, m));
  }
}

}  // namespace
}  // namespace gu
