#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <Eigen/Dense>

#include "fixtures.hpp"
#include "oedheat/lowrank.hpp"

namespace oedheat {
namespace {

using testing::random_vector;

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  return g;
}

double reconstruction_error(const Matrix& F, const LowRankFactor& f) {
  return (F.transpose() - f.Q * f.R).norm() / F.transpose().norm();
}

TEST(LowRank, RecoversExactRankThree) {
  std::mt19937_64 rng(1);
  const Matrix F = gaussian_matrix(30, 3, rng) * gaussian_matrix(3, 40, rng);
  std::mt19937_64 sketch(2);
  const LowRankFactor f = randomized_factorize(make_dense_map(F), {}, sketch);
  EXPECT_EQ(f.rank(), 3);
  EXPECT_FALSE(f.collapsed);
  EXPECT_LE(reconstruction_error(F, f), 1e-10);
}

TEST(LowRank, ZeroMapCollapses) {
  const Matrix F = Matrix::Zero(8, 12);
  std::mt19937_64 rng(3);
  const LowRankFactor f = randomized_factorize(make_dense_map(F), {}, rng);
  EXPECT_TRUE(f.collapsed);
  EXPECT_EQ(f.rank(), 1);
  EXPECT_EQ((f.Q * f.R).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LowRank, RejectsBadParameters) {
  std::mt19937_64 rng(3);
  const auto map = make_dense_map(Matrix::Identity(3, 3));
  FactorizationParams p;
  p.ratio_threshold = 1.0;
  EXPECT_THROW(randomized_factorize(map, p, rng), std::invalid_argument);
  p = {};
  p.oversample = 1;
  EXPECT_THROW(randomized_factorize(map, p, rng), std::invalid_argument);
}

TEST(LowRank, SingularValuesOfDecayingSpectrum) {
  std::mt19937_64 rng(4);
  const Index m = 40, n = 60;
  const Matrix U = Eigen::HouseholderQR<Matrix>(gaussian_matrix(m, m, rng)).householderQ();
  const Matrix V = Matrix(Eigen::HouseholderQR<Matrix>(gaussian_matrix(n, n, rng)).householderQ()).leftCols(m);
  Vector s(m);
  for (Index i = 0; i < m; ++i) s(i) = std::pow(0.5, static_cast<double>(i));
  const Matrix F = U * s.asDiagonal() * V.transpose();
  FactorizationParams params;
  params.ratio_threshold = 1e-6;
  const LowRankFactor f = randomized_factorize(make_dense_map(F), params, rng);
  EXPECT_EQ(f.rank(), 20);  // 0.5^19 >= 1e-6 > 0.5^20
  for (Index i = 0; i < f.rank(); ++i) EXPECT_NEAR(f.sigma(i), s(i), 1e-8 * s(i)) << i;
}

class HeatLowRank : public ::testing::Test {
 protected:
  testing::Problem problem_ = testing::make_problem(testing::small_domain(0.25, 3, 3));
  PreconditionedMap map_ = make_preconditioned_map(problem_.heat, problem_.prior, 1e-4);
};

TEST_F(HeatLowRank, MaterializedMapIsLinearAndAdjoint) {
  const Matrix dense = materialize_dense(map_);
  std::mt19937_64 rng(5);
  const Vector x = random_vector(map_.cols, rng);
  const Vector y = random_vector(map_.rows, rng);
  const Vector fx = map_.apply(x);
  EXPECT_LE((fx - dense * x).norm(), 1e-12 * fx.norm());
  const Vector fty = map_.apply_transpose(y);
  EXPECT_LE((fty - dense.transpose() * y).norm(), 1e-10 * fty.norm());
}

TEST_F(HeatLowRank, MaterializeRefusesLargeMaps) {
  EXPECT_THROW(materialize_dense(map_, 10), std::length_error);
}

TEST(LowRank, MaterializeComposedIdentity) {
  Matrix F(2, 2);
  F << 1.0, 2.0, 3.0, 4.0;
  Matrix D(2, 2);
  D << 2.0, 0.0, 0.0, -1.0;
  PreconditionedMap map = make_dense_map(F);
  const BlockOperator base = map.apply;
  map.apply = [base, D](const Matrix& x) -> Matrix { return base(D * x); };
  Matrix expected(2, 2);
  expected << 2.0, -2.0, 6.0, -4.0;
  EXPECT_EQ(materialize_dense(map), expected);
}

TEST_F(HeatLowRank, MatchesDenseSvdAndInvariants) {
  const Matrix dense = materialize_dense(map_);
  const Vector exact = Eigen::JacobiSVD<Matrix>(dense).singularValues();
  std::mt19937_64 rng(6);
  FactorizationParams params;
  params.ratio_threshold = 1e-8;
  const LowRankFactor f = randomized_factorize(map_, params, rng);
  ASSERT_GE(f.rank(), 2);
  for (Index i = 0; i < f.rank(); ++i) EXPECT_NEAR(f.sigma(i), exact(i), 1e-6 * exact(i)) << i;

  const Matrix QtQ = f.Q.transpose() * f.Q;
  EXPECT_LE((QtQ - Matrix::Identity(f.rank(), f.rank())).norm(), 1e-12);

  const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(f.C).eigenvalues();
  EXPECT_GE(eig.minCoeff(), -1e-10 * eig.maxCoeff());
  EXPECT_LE((f.C_half * f.C_half - f.C).norm(), 1e-10 * f.C.norm());

  if (f.rank() < exact.size()) {
    const double bound = 10.0 * exact(f.rank()) * std::sqrt(static_cast<double>(f.rank() + params.oversample));
    EXPECT_LE((dense.transpose() - f.Q * f.R).norm(), bound);
  }
}

TEST_F(HeatLowRank, SameSeedIsBitReproducible) {
  std::mt19937_64 a(8), b(8);
  const LowRankFactor f1 = randomized_factorize(map_, {}, a);
  const LowRankFactor f2 = randomized_factorize(map_, {}, b);
  EXPECT_EQ(f1.Q, f2.Q);
  EXPECT_EQ(f1.R, f2.R);
  EXPECT_EQ(f1.C, f2.C);
}

TEST_F(HeatLowRank, SaveLoadRoundTripAndCorruption) {
  std::mt19937_64 rng(9);
  LowRankFactor f = randomized_factorize(map_, {}, rng);
  f.prior_trace = problem_.prior.trace();
  const auto dir = std::filesystem::temp_directory_path() / "oedheat_factor_test";
  std::filesystem::remove_all(dir);
  const FactorMetadata meta{"abc123", 9, 1e-12, 1e-4};
  save_factor(dir, f, meta);

  const auto loaded = load_factor(dir);
  ASSERT_TRUE(loaded.has_value());
  EXPECT_EQ(loaded->factor.Q, f.Q);
  EXPECT_EQ(loaded->factor.R, f.R);
  EXPECT_EQ(loaded->factor.C, f.C);
  EXPECT_EQ(loaded->factor.sigma, f.sigma);
  EXPECT_EQ(loaded->factor.prior_trace, f.prior_trace);
  EXPECT_EQ(loaded->meta.config_hash, "abc123");
  EXPECT_EQ(loaded->meta.seed, 9u);
  EXPECT_EQ(loaded->meta.noise_variance, 1e-4);

  {
    std::fstream io(dir / "R.bin", std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(3);
    io.put('\x7f');
  }
  EXPECT_FALSE(load_factor(dir).has_value());
  std::filesystem::remove(dir / "Q.bin");
  EXPECT_FALSE(load_factor(dir).has_value());
  std::filesystem::remove_all(dir);
  EXPECT_FALSE(load_factor(dir).has_value());
}

}  // namespace
}  // namespace oedheat
