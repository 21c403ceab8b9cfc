#include <gtest/gtest.h>

#include <random>

#include <Eigen/Dense>

#include "fixtures.hpp"
#include "oedheat/prior.hpp"

namespace oedheat {
namespace {

using testing::random_vector;

PriorOperator small_prior(double alpha = 0.25, double h = 0.25) {
  const Mesh mesh = build_mesh(testing::small_domain(h));
  return PriorOperator(mesh, PriorParams::from_alpha(alpha));
}

TEST(Prior, ZeroMapsToZero) {
  const PriorOperator prior = small_prior();
  const Vector zero = Vector::Zero(prior.size());
  EXPECT_EQ(prior.apply(zero).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(prior.apply_sqrt(zero).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Prior, ZeroAlphaIsIdentity) {
  const PriorOperator prior = small_prior(0.0);
  std::mt19937_64 rng(1);
  const Vector v = random_vector(prior.size(), rng);
  EXPECT_LE((prior.apply(v) - v).norm(), 1e-13 * v.norm());
  EXPECT_NEAR(prior.trace(), static_cast<double>(prior.size()), 1e-10);
}

TEST(Prior, ApplyIsSquareOfRoot) {
  const PriorOperator prior = small_prior();
  std::mt19937_64 rng(2);
  const Vector v = random_vector(prior.size(), rng);
  const Vector twice = prior.apply_sqrt(prior.apply_sqrt(v));
  EXPECT_LE((prior.apply(v) - twice).norm(), 1e-12 * twice.norm());
  const Matrix block = prior.apply(Matrix(v.replicate(1, 2)));
  EXPECT_LE((block.col(1) - twice).norm(), 1e-12 * twice.norm());
}

TEST(Prior, TwoNodeTrace) {
  const double alpha = 0.25;
  const double beta = 0.5 / 1.42;
  const double a = alpha + 0.5 + alpha * beta;
  SparseMatrix K(2, 2);
  K.insert(0, 0) = a;
  K.insert(0, 1) = -alpha;
  K.insert(1, 0) = -alpha;
  K.insert(1, 1) = a;
  K.makeCompressed();
  const PriorOperator prior(K, Vector::Constant(2, 0.5), PriorParams::from_alpha(alpha));
  EXPECT_NEAR(prior.trace(), 0.9341924484744835, 1e-14);
}

TEST(Prior, TraceMatchesGeneralisedEigenvalues) {
  const PriorOperator prior = small_prior();
  const Matrix K(prior.precision_factor());
  const Vector inv_root = prior.lumped_mass().cwiseSqrt().cwiseInverse();
  const Matrix scaled = inv_root.asDiagonal() * K * inv_root.asDiagonal();
  const Vector lambda = Eigen::SelfAdjointEigenSolver<Matrix>(scaled).eigenvalues();
  const double expected = lambda.cwiseInverse().squaredNorm();
  EXPECT_NEAR(prior.trace(), expected, 1e-10 * expected);
}

TEST(Prior, SelfAdjointInLumpedInnerProduct) {
  const PriorOperator prior = small_prior();
  std::mt19937_64 rng(3);
  const Vector L = prior.lumped_mass();
  for (int trial = 0; trial < 5; ++trial) {
    const Vector u = random_vector(prior.size(), rng);
    const Vector v = random_vector(prior.size(), rng);
    const double lhs = u.dot(L.asDiagonal() * prior.apply(v));
    const double rhs = prior.apply(u).dot(L.asDiagonal() * v);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(lhs) + 1e-15);
  }
}

TEST(Prior, FrameCovarianceIsSymmetricPositive) {
  const PriorOperator prior = small_prior();
  const Index n = prior.size();
  const Matrix C = prior.frame_apply(Matrix::Identity(n, n));
  EXPECT_LE((C - C.transpose()).norm(), 1e-12 * C.norm());
  const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (C + C.transpose())).eigenvalues();
  EXPECT_GT(eig.minCoeff(), 0.0);
  const Matrix root = prior.frame_sqrt(Matrix::Identity(n, n));
  EXPECT_LE((root * root - C).norm(), 1e-12 * C.norm());
  EXPECT_NEAR(C.trace(), prior.trace(), 1e-10 * prior.trace());
}

TEST(Prior, SmoothsOscillations) {
  // Checkerboard-ish noise loses most of its energy; constants are kept.
  const PriorOperator prior = small_prior();
  std::mt19937_64 rng(4);
  const Vector noise = random_vector(prior.size(), rng);
  EXPECT_LT(prior.apply(noise).norm(), 0.5 * noise.norm());
  const Vector ones = Vector::Ones(prior.size());
  EXPECT_GT(prior.apply(ones).minCoeff(), 0.0);
}

TEST(Prior, SamplingIsDeterministicPerSeed) {
  const PriorOperator prior = small_prior();
  std::mt19937_64 a(42), b(42), c(43);
  const Vector x = prior.sample(a);
  EXPECT_EQ(x, prior.sample(b));
  EXPECT_NE(x, prior.sample(c));
}

TEST(Prior, SampleMomentsMatchCovariance) {
  const PriorOperator prior = small_prior();
  const Index n = prior.size();
  const Index count = 10000;
  std::mt19937_64 rng(7);
  Vector mean = Vector::Zero(n);
  Vector second = Vector::Zero(n);
  for (Index k = 0; k < count; ++k) {
    const Vector x = prior.sample(rng);
    mean += x;
    second += x.cwiseAbs2();
  }
  mean /= static_cast<double>(count);
  const Vector variance = (second / static_cast<double>(count) - mean.cwiseAbs2()) *
                          (static_cast<double>(count) / static_cast<double>(count - 1));
  const Vector expected = prior.pointwise_variance();
  for (Index i = 0; i < n; ++i) {
    EXPECT_NEAR(variance(i), expected(i), 0.05 * expected(i)) << "node " << i;
    EXPECT_LE(std::abs(mean(i)), 5.0 * std::sqrt(expected(i) / static_cast<double>(count))) << "node " << i;
  }
}

TEST(Prior, PointwiseVarianceIsDiagonalOfCovariance) {
  const PriorOperator prior = small_prior();
  const Matrix K(prior.precision_factor());
  const Matrix Kinv = K.inverse();
  const Matrix cov = Kinv * prior.lumped_mass().asDiagonal() * Kinv;
  EXPECT_LE((prior.pointwise_variance() - cov.diagonal()).norm(), 1e-12 * cov.diagonal().norm());
}

TEST(Prior, DenseTraceRefusesLargeProblems) {
  const Mesh mesh = build_mesh(testing::small_domain(0.25));
  PriorParams params = PriorParams::from_alpha(0.25);
  params.dense_limit = 5;
  const PriorOperator prior(mesh, params);
  EXPECT_THROW((void)prior.trace(), std::length_error);
}

TEST(Prior, RejectsNegativeAlpha) {
  const Mesh mesh = build_mesh(testing::small_domain(0.25));
  EXPECT_THROW(PriorOperator(mesh, PriorParams::from_alpha(-1.0)), std::invalid_argument);
}

}  // namespace
}  // namespace oedheat
