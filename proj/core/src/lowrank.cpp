#include "oedheat/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace oedheat {

namespace {

Matrix orthonormal_basis(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  }
  return g;
}

}  // namespace

PreconditionedMap make_preconditioned_map(const HeatWorkspace& heat, const PriorOperator& prior,
                                          double noise_variance) {
  if (!(noise_variance > 0.0)) throw std::invalid_argument("noise variance must be positive");
  if (heat.num_source_dofs() != prior.size()) throw std::invalid_argument("prior and heat map disagree on n_S");
  const double scale = 1.0 / std::sqrt(noise_variance);
  const Vector root = prior.lumped_mass().cwiseSqrt();

  PreconditionedMap map;
  map.rows = heat.num_sensors();
  map.cols = heat.num_source_dofs();
  map.apply = [heat, prior, root, scale](const Matrix& x) -> Matrix {
    return scale * heat.forward(prior.solve_precision(Matrix(root.asDiagonal() * x)));
  };
  map.apply_transpose = [heat, prior, root, scale](const Matrix& y) -> Matrix {
    return scale * (root.asDiagonal() * prior.solve_precision(heat.adjoint(y)));
  };
  map.prior_frame = [prior](const Matrix& x) -> Matrix { return prior.frame_apply(x); };
  return map;
}

PreconditionedMap make_dense_map(Matrix forward, Matrix prior_frame) {
  PreconditionedMap map;
  map.rows = forward.rows();
  map.cols = forward.cols();
  if (prior_frame.size() != 0 && (prior_frame.rows() != map.cols || prior_frame.cols() != map.cols)) {
    throw std::invalid_argument("prior frame must be n x n");
  }
  auto f = std::make_shared<const Matrix>(std::move(forward));
  map.apply = [f](const Matrix& x) -> Matrix { return *f * x; };
  map.apply_transpose = [f](const Matrix& y) -> Matrix { return f->transpose() * y; };
  if (prior_frame.size() == 0) {
    map.prior_frame = [](const Matrix& x) -> Matrix { return x; };
  } else {
    auto c = std::make_shared<const Matrix>(std::move(prior_frame));
    map.prior_frame = [c](const Matrix& x) -> Matrix { return *c * x; };
  }
  return map;
}

LowRankFactor randomized_factorize(const PreconditionedMap& map, const FactorizationParams& params,
                                   std::mt19937_64& rng) {
  if (!(params.ratio_threshold > 0.0 && params.ratio_threshold < 1.0)) {
    throw std::invalid_argument("ratio threshold must lie in (0, 1)");
  }
  if (params.oversample < 2) throw std::invalid_argument("oversampling must be at least 2");
  if (params.rank_cap < 1 || params.block < 1) throw std::invalid_argument("rank cap and block must be positive");

  const Index max_cols = std::min(map.rows, map.cols);
  Index target = std::min(params.block, params.rank_cap);
  Matrix Q;
  Eigen::BDCSVD<Matrix> svd;
  while (true) {
    const Index k = std::min(target + params.oversample, max_cols);
    Q = orthonormal_basis(map.apply_transpose(gaussian(map.rows, k, rng)));
    for (Index q = 0; q < params.power_iterations; ++q) {
      const Matrix z = orthonormal_basis(map.apply(Q));
      Q = orthonormal_basis(map.apply_transpose(z));
    }
    const Matrix B = map.apply(Q).transpose();  // Q^T F^T, k x m
    svd.compute(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const bool crossed = s(0) == 0.0 || s(s.size() - 1) < params.ratio_threshold * s(0);
    if (crossed || k == max_cols || target >= params.rank_cap) break;
    target = std::min(target + params.block, params.rank_cap);
  }

  const Vector& s = svd.singularValues();
  Index keep = 0;
  while (keep < s.size() && keep < params.rank_cap && s(keep) > 0.0 && s(keep) >= params.ratio_threshold * s(0)) {
    ++keep;
  }
  LowRankFactor factor;
  factor.collapsed = keep <= 1;
  keep = std::max<Index>(keep, 1);
  factor.sigma = s.head(keep);
  factor.Q = Q * svd.matrixU().leftCols(keep);
  factor.R = factor.sigma.asDiagonal() * svd.matrixV().leftCols(keep).transpose();
  attach_prior(factor, map);
  return factor;
}

void attach_prior(LowRankFactor& factor, const PreconditionedMap& map) {
  factor.C = factor.Q.transpose() * map.prior_frame(factor.Q);
  finalize_prior_projection(factor);
}

void finalize_prior_projection(LowRankFactor& factor) {
  const Matrix symmetric = 0.5 * (factor.C + factor.C.transpose());
  factor.C = symmetric;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor.C_half = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix materialize_dense(const PreconditionedMap& map, Index entry_limit) {
  if (map.rows * map.cols > entry_limit) {
    throw std::length_error("refusing to materialise a " + std::to_string(map.rows) + " x " +
                            std::to_string(map.cols) + " map above the dense limit");
  }
  return map.apply(Matrix::Identity(map.cols, map.cols));
}

}  // namespace oedheat
