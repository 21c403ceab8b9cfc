#include "oedheat/prior.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "oedheat/assembly.hpp"

namespace oedheat {

PriorParams PriorParams::from_alpha(double alpha, double robin_divisor) {
  PriorParams params;
  params.alpha = alpha;
  params.robin = std::sqrt(alpha) / robin_divisor;
  return params;
}

namespace {

SparseMatrix diagonal(const Vector& d) {
  SparseMatrix m(d.size(), d.size());
  m.reserve(Eigen::VectorXi::Constant(d.size(), 1));
  for (Index i = 0; i < d.size(); ++i) m.insert(i, i) = d(i);
  m.makeCompressed();
  return m;
}

}  // namespace

PriorOperator::PriorOperator(const Mesh& mesh, const PriorParams& params) : params_(params) {
  if (params.alpha < 0.0) throw std::invalid_argument("prior alpha must be non-negative");
  const DofMap dofs = source_dofs(mesh);
  const Index n = mesh.num_source_dofs();
  const auto one = [](const Point&) { return 1.0; };

  mass_ = lump(assemble_mass(mesh, mesh.source_triangles, dofs, n));
  K_ = diagonal(mass_);
  if (params.alpha > 0.0) {
    const SparseMatrix stiffness =
        assemble_stiffness(mesh, mesh.source_triangles, dofs, n, one, CoefficientRule::centroid);
    const auto rim = boundary_of(mesh, mesh.source_triangles);
    const SparseMatrix robin = assemble_edge_mass(mesh, rim, dofs, n);
    K_ = SparseMatrix(params.alpha * stiffness + K_ + (params.alpha * params.robin) * robin);
  }
  auto solver = std::make_shared<Factorization>(K_);
  if (solver->info() != Eigen::Success) throw std::runtime_error("prior operator is not positive definite");
  solver_ = std::move(solver);
}

PriorOperator::PriorOperator(SparseMatrix precision_factor, Vector lumped_mass, PriorParams params)
    : params_(params), K_(std::move(precision_factor)), mass_(std::move(lumped_mass)) {
  if (K_.rows() != K_.cols() || K_.rows() != mass_.size()) throw std::invalid_argument("prior dimensions differ");
  if (mass_.minCoeff() <= 0.0) throw std::invalid_argument("lumped mass must be positive");
  auto solver = std::make_shared<Factorization>(K_);
  if (solver->info() != Eigen::Success) throw std::runtime_error("prior operator is not positive definite");
  solver_ = std::move(solver);
}

Matrix PriorOperator::solve_precision(const Matrix& v) const { return solver_->solve(v); }

Vector PriorOperator::solve_precision(const Vector& v) const { return solver_->solve(v); }

Matrix PriorOperator::apply_sqrt(const Matrix& v) const { return solver_->solve(mass_.asDiagonal() * v); }

Vector PriorOperator::apply_sqrt(const Vector& v) const { return solver_->solve(mass_.asDiagonal() * v); }

Matrix PriorOperator::apply(const Matrix& v) const { return apply_sqrt(apply_sqrt(v)); }

Vector PriorOperator::apply(const Vector& v) const { return apply_sqrt(apply_sqrt(v)); }

Matrix PriorOperator::frame_sqrt(const Matrix& x) const {
  const Vector root = mass_.cwiseSqrt();
  return root.asDiagonal() * solver_->solve(root.asDiagonal() * x);
}

Matrix PriorOperator::frame_apply(const Matrix& x) const { return frame_sqrt(frame_sqrt(x)); }

Vector PriorOperator::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal;
  Vector xi(size());
  for (Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
  return solver_->solve(mass_.cwiseSqrt().asDiagonal() * xi);
}

void PriorOperator::check_dense() const {
  if (size() > params_.dense_limit) {
    throw std::length_error("prior has " + std::to_string(size()) + " dofs, above the dense limit of " +
                            std::to_string(params_.dense_limit) +
                            "; raise prior.dense_limit or use a stochastic trace estimator");
  }
}

Matrix PriorOperator::dense_covariance_action() const {
  check_dense();
  const Matrix half = apply_sqrt(Matrix(Matrix::Identity(size(), size())));
  return half * half;
}

double PriorOperator::trace() const {
  check_dense();
  const Matrix half = apply_sqrt(Matrix(Matrix::Identity(size(), size())));
  return half.cwiseProduct(half.transpose()).sum();
}

Vector PriorOperator::pointwise_variance() const {
  check_dense();
  const Matrix inverse = solver_->solve(Matrix(Matrix::Identity(size(), size())));
  return (inverse * mass_.asDiagonal()).cwiseProduct(inverse).rowwise().sum();
}

}  // namespace oedheat
