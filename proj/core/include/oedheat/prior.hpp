#pragma once

#include <memory>
#include <random>

#include <Eigen/SparseCholesky>

#include "oedheat/geometry.hpp"
#include "oedheat/types.hpp"

namespace oedheat {

struct PriorParams {
  double alpha = 0.25;
  double robin = 0.5 / 1.42;  // sqrt(alpha) / 1.42
  Index dense_limit = 4000;

  static PriorParams from_alpha(double alpha, double robin_divisor = 1.42);
};

/// Gaussian prior N(0, C0) on the source subdomain with
/// C0 = (-alpha Laplace + I)^-2 and Robin data d_n u + robin u = 0 on the
/// subdomain boundary.
///
/// In coefficient space the square root acts as K^-1 L, where
/// K = alpha K1 + L + alpha robin B is the weak form of (-alpha Laplace + I)
/// and L the lumped source mass. C0 is self-adjoint in the L inner product,
/// so L^1/2 C0 L^-1/2 (the Euclidean frame) is symmetric.
class PriorOperator {
 public:
  PriorOperator(const Mesh& mesh, const PriorParams& params);

  /// Builds the prior from explicit matrices. Used for small synthetic cases.
  PriorOperator(SparseMatrix precision_factor, Vector lumped_mass, PriorParams params = {});

  Index size() const { return K_.rows(); }
  const PriorParams& params() const { return params_; }
  const SparseMatrix& precision_factor() const { return K_; }
  const Vector& lumped_mass() const { return mass_; }

  // Coefficient actions.
  Vector apply_sqrt(const Vector& v) const;
  Matrix apply_sqrt(const Matrix& v) const;
  Vector apply(const Vector& v) const;
  Matrix apply(const Matrix& v) const;
  Vector solve_precision(const Vector& v) const;  // K^-1 v
  Matrix solve_precision(const Matrix& v) const;

  // Actions in the Euclidean frame x = L^1/2 s.
  Matrix frame_sqrt(const Matrix& x) const;  // L^1/2 K^-1 L^1/2 x
  Matrix frame_apply(const Matrix& x) const;  // L^1/2 C0 L^-1/2 x

  /// Draws K^-1 L^1/2 xi with xi standard normal.
  Vector sample(std::mt19937_64& rng) const;

  /// Trace of the coefficient matrix (K^-1 L)^2. Dense; throws
  /// std::length_error when size() exceeds params().dense_limit.
  double trace() const;

  /// Pointwise prior variance at each source node, diag(K^-1 L K^-1).
  Vector pointwise_variance() const;

  /// Dense (K^-1 L)^2.
  Matrix dense_covariance_action() const;

 private:
  using Factorization = Eigen::SimplicialLDLT<SparseMatrix>;

  void check_dense() const;

  PriorParams params_;
  SparseMatrix K_;
  Vector mass_;
  std::shared_ptr<const Factorization> solver_;
};

}  // namespace oedheat
