#include "oedheat/bayes.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "oedheat/oed.hpp"

namespace oedheat {

NoiseModel calibrate_noise(const DataSampler& draw, Index samples, double level, std::mt19937_64& rng) {
  if (samples < 2) throw std::invalid_argument("noise calibration needs at least two samples");
  if (!(level > 0.0)) throw std::invalid_argument("noise level must be positive");
  Vector mean;
  Vector m2;
  for (Index i = 0; i < samples; ++i) {
    const Vector d = draw(rng);
    if (i == 0) {
      mean = Vector::Zero(d.size());
      m2 = Vector::Zero(d.size());
    }
    const Vector delta = d - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta.cwiseProduct(d - mean);
  }
  const double average_variance = m2.mean() / static_cast<double>(samples - 1);
  if (!(average_variance > 0.0)) throw std::domain_error("data samples have zero variance");
  return NoiseModel{level * average_variance, samples, level};
}

NoiseModel calibrate_noise(const LinearForward& forward, const PriorOperator& prior, Index samples,
                           double level, std::mt19937_64& rng) {
  return calibrate_noise([&](std::mt19937_64& r) { return forward(prior.sample(r)); }, samples, level, rng);
}

double test_source(const Point& x) {
  const double radius = 3.0 * std::numbers::pi / 40.0;
  double value = 0.0;
  for (const double sign : {1.0, -1.0}) {
    const double r = radius * radius - std::pow(x.x() + 0.75, 2) - std::pow(x.y() + sign * 0.7, 2);
    if (r > 0.0) value += std::exp(-1.0 / std::pow(r, 0.125));
  }
  return value;
}

Vector interpolate_on_source(const Mesh& mesh, const std::function<double(const Point&)>& f) {
  Vector values(mesh.num_source_dofs());
  for (Index k = 0; k < values.size(); ++k) {
    values(k) = f(mesh.vertices[static_cast<std::size_t>(mesh.source_vertices[static_cast<std::size_t>(k)])]);
  }
  return values;
}

Vector synthesize_data(const Vector& clean, const Vector& w, const NoiseModel& noise, std::mt19937_64& rng) {
  if (clean.size() != w.size()) throw std::invalid_argument("design and data dimensions differ");
  std::normal_distribution<double> normal;
  const double sd = std::sqrt(std::max(noise.variance, 0.0));
  Vector g(clean.size());
  for (Index k = 0; k < g.size(); ++k) {
    const double eps = normal(rng);
    g(k) = w(k) == 0.0 ? 0.0 : w(k) * (clean(k) + (sd == 0.0 ? 0.0 : sd * eps));
  }
  return g;
}

Matrix posterior_precision(const Matrix& forward, const Matrix& precision_factor, const Vector& lumped_mass,
                           const Vector& w, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("noise variance must be positive");
  if (forward.rows() != w.size() || forward.cols() != precision_factor.rows()) {
    throw std::invalid_argument("posterior dimensions differ");
  }
  Matrix H = forward.transpose() * (w / variance).asDiagonal() * forward;
  H += precision_factor * lumped_mass.cwiseInverse().asDiagonal() * precision_factor;
  return 0.5 * (H + H.transpose());
}

MapEstimate reconstruct_map(const Matrix& forward, const Matrix& precision_factor, const Vector& lumped_mass,
                            const Vector& w, const Vector& data, double variance) {
  const Matrix H = posterior_precision(forward, precision_factor, lumped_mass, w, variance);
  const Vector rhs = forward.transpose() * (w.cwiseProduct(data) / variance);
  MapEstimate estimate;
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) throw std::runtime_error("posterior precision is not positive definite");
  estimate.source = llt.solve(rhs);
  const double scale = rhs.norm();
  estimate.relative_residual = scale == 0.0 ? 0.0 : (H * estimate.source - rhs).norm() / scale;
  estimate.converged = estimate.relative_residual <= 1e-8;
  return estimate;
}

MapEstimate reconstruct_map(const Matrix& forward, const PriorOperator& prior, const Vector& w,
                            const Vector& data, const NoiseModel& noise) {
  return reconstruct_map(forward, Matrix(prior.precision_factor()), prior.lumped_mass(), w, data, noise.variance);
}

MapEstimate reconstruct_map_iterative(const HeatWorkspace& heat, const PriorOperator& prior, const Vector& w,
                                      const Vector& data, const NoiseModel& noise, double tolerance,
                                      Index max_iterations) {
  const SparseMatrix& K = prior.precision_factor();
  const Vector inv_mass = prior.lumped_mass().cwiseInverse();
  auto hessian = [&](const Vector& v) -> Vector {
    const Vector data_part = heat.adjoint(Vector(w.cwiseProduct(heat.forward(v)) / noise.variance));
    return data_part + K * inv_mass.cwiseProduct(K * v);
  };
  // Prior covariance K^-1 L K^-1 inverts the regularisation term exactly.
  auto precondition = [&](const Vector& r) -> Vector {
    return prior.solve_precision(Vector(prior.lumped_mass().cwiseProduct(prior.solve_precision(r))));
  };

  const Vector rhs = heat.adjoint(Vector(w.cwiseProduct(data) / noise.variance));
  MapEstimate estimate;
  estimate.source = Vector::Zero(rhs.size());
  const double scale = rhs.norm();
  if (scale == 0.0) return estimate;

  Vector r = rhs;
  Vector z = precondition(r);
  Vector p = z;
  double rz = r.dot(z);
  estimate.converged = false;
  for (Index it = 0; it < max_iterations; ++it) {
    const Vector Hp = hessian(p);
    const double alpha = rz / p.dot(Hp);
    estimate.source += alpha * p;
    r -= alpha * Hp;
    estimate.iterations = it + 1;
    if (r.norm() <= tolerance * scale) {
      estimate.converged = true;
      break;
    }
    z = precondition(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  estimate.relative_residual = (hessian(estimate.source) - rhs).norm() / scale;
  return estimate;
}

Vector variance_field(const PriorOperator& prior, const LowRankFactor& lr, const Vector& w) {
  if (lr.Q.rows() != prior.size()) throw std::invalid_argument("factor and prior disagree on n_S");
  if (w.size() != lr.num_sensors()) throw std::invalid_argument("design has wrong dimension");
  const Matrix V = prior.solve_precision(Matrix(prior.lumped_mass().cwiseSqrt().asDiagonal() * lr.Q));
  Matrix A = lr.R * w.asDiagonal() * lr.R.transpose();
  A.diagonal().array() += 1.0;
  Matrix reduction = -Eigen::LLT<Matrix>(A).solve(Matrix::Identity(A.rows(), A.cols()));
  reduction.diagonal().array() += 1.0;
  return prior.pointwise_variance() - (V * reduction).cwiseProduct(V).rowwise().sum();
}

Vector variance_field_dense(const Matrix& forward, const PriorOperator& prior, const Vector& w,
                            const NoiseModel& noise) {
  const Matrix H =
      posterior_precision(forward, Matrix(prior.precision_factor()), prior.lumped_mass(), w, noise.variance);
  return Eigen::LLT<Matrix>(H).solve(Matrix::Identity(H.rows(), H.cols())).diagonal();
}

Vector random_design(Index m, Index m0, std::mt19937_64& rng) {
  if (m0 < 1 || m0 > m) throw std::invalid_argument("random design needs 1 <= m0 <= m");
  std::vector<Index> indices(static_cast<std::size_t>(m));
  std::iota(indices.begin(), indices.end(), Index{0});
  Vector w = Vector::Zero(m);
  for (Index i = 0; i < m0; ++i) {
    std::uniform_int_distribution<Index> pick(i, m - 1);
    std::swap(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(pick(rng))]);
    w(indices[static_cast<std::size_t>(i)]) = 1.0;
  }
  return w;
}

BaselineResult random_baseline(const LowRankFactor& lr, Index m0, Index count, std::mt19937_64& rng,
                               bool include_constants) {
  if (count < 1) throw std::invalid_argument("baseline needs at least one design");
  BaselineResult result;
  result.values.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    const Vector w = random_design(lr.num_sensors(), m0, rng);
    const double j = objective(w, lr, include_constants);
    if (i == 0 || j < result.min) {
      result.min = j;
      result.best = w;
    }
    result.max = i == 0 ? j : std::max(result.max, j);
    result.values.push_back(j);
  }
  return result;
}

double relative_error(const Vector& estimate, const Vector& truth, const Vector& mass) {
  if (estimate.size() != truth.size() || truth.size() != mass.size()) {
    throw std::invalid_argument("relative error: dimensions differ");
  }
  const double denominator = truth.cwiseProduct(mass).dot(truth);
  if (!(denominator > 0.0)) throw std::domain_error("relative error: reference field is zero");
  const Vector e = estimate - truth;
  return std::sqrt(e.cwiseProduct(mass).dot(e) / denominator);
}

}  // namespace oedheat
