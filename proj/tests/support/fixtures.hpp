#pragma once

#include <cmath>
#include <memory>
#include <random>

#include <Eigen/Dense>

#include "oedheat/assembly.hpp"
#include "oedheat/bayes.hpp"
#include "oedheat/geometry.hpp"
#include "oedheat/heat_solver.hpp"
#include "oedheat/lowrank.hpp"
#include "oedheat/prior.hpp"

namespace oedheat::testing {

/// Room (-1,1)^2 with the source strip x1 <= -0.5, one rod at (0.6, 0) and an
/// nx-by-ny sensor lattice between the strip and the rod.
inline DomainSpec small_domain(double h, Index nx = 4, Index ny = 4, bool with_hole = true) {
  DomainSpec spec;
  spec.mesh_size = h;
  if (with_hole) spec.holes.push_back({Point(0.65, 0.0), 0.25});
  spec.sensors = sensor_grid(-0.35, 0.3, nx, -0.85, 0.85, ny);
  return spec;
}

struct Problem {
  Mesh mesh;
  std::shared_ptr<const FemOperators> ops;
  HeatWorkspace heat;
  PriorOperator prior;
};

inline Problem make_problem(const DomainSpec& spec, double T = 1.0, double dt = 1e-2,
                            PriorParams prior = PriorParams::from_alpha(0.25)) {
  Mesh mesh = build_mesh(spec);
  auto ops = std::make_shared<const FemOperators>(assemble_all(mesh, spec.sensors));
  HeatWorkspace heat(ops, TimeGrid::make(T, dt));
  PriorOperator p(mesh, prior);
  return Problem{std::move(mesh), std::move(ops), std::move(heat), std::move(p)};
}

inline Vector random_vector(Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

/// Posterior covariance trace assembled directly in coefficient space:
///   tr((L^-1 F^T diag(w) F / var + C0^-1)^-1),  C0 = (K^-1 L)^2.
inline double dense_posterior_trace(const Matrix& forward, const PriorOperator& prior, const Vector& w,
                                    double variance) {
  const Matrix K(prior.precision_factor());
  const Vector L = prior.lumped_mass();
  const Matrix half = K.fullPivLu().solve(Matrix(L.asDiagonal()));
  const Matrix C0 = half * half;
  const Matrix misfit = L.cwiseInverse().asDiagonal() * forward.transpose() * (w / variance).asDiagonal() * forward;
  const Matrix precision = misfit + C0.fullPivLu().inverse();
  return precision.fullPivLu().inverse().trace();
}

/// Random symmetric positive definite n x n matrix with spectrum in [lo, hi].
inline Matrix random_spd(Index n, std::mt19937_64& rng, double lo = 0.1, double hi = 2.0) {
  std::normal_distribution<double> normal;
  Matrix g(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  const Vector spectrum = random_vector(n, rng, lo, hi);
  return q * spectrum.asDiagonal() * q.transpose();
}

/// A-criterion of a synthetic Euclidean-frame problem, tr((F^T D F + I)^-1 C0)
/// with C0 = prior_frame. Evaluated without any factorisation.
inline double dense_frame_objective(const Matrix& forward, const Matrix& prior_frame, const Vector& w) {
  const Matrix root = Eigen::SelfAdjointEigenSolver<Matrix>(prior_frame).operatorSqrt();
  const Matrix hessian = root * forward.transpose() * w.asDiagonal() * forward * root;
  const Matrix post = root * (hessian + Matrix::Identity(hessian.rows(), hessian.cols())).inverse() * root;
  return post.trace();
}

}  // namespace oedheat::testing

namespace oedheat::testing {

/// Degree-4 Dunavant rule on the reference triangle: (barycentric, weight).
inline const std::vector<std::pair<Eigen::Vector3d, double>>& triangle_rule() {
  static const std::vector<std::pair<Eigen::Vector3d, double>> rule = [] {
    std::vector<std::pair<Eigen::Vector3d, double>> r;
    const double a1 = 0.445948490915965, b1 = 1.0 - 2.0 * a1, w1 = 0.223381589678011;
    const double a2 = 0.091576213509771, b2 = 1.0 - 2.0 * a2, w2 = 0.109951743655322;
    for (const auto& [a, b, w] : {std::tuple{a1, b1, w1}, std::tuple{a2, b2, w2}}) {
      r.push_back({Eigen::Vector3d(b, a, a), w});
      r.push_back({Eigen::Vector3d(a, b, a), w});
      r.push_back({Eigen::Vector3d(a, a, b), w});
    }
    return r;
  }();
  return rule;
}

/// L2 norm over the mesh of (P1 field - exact).
template <typename Exact>
double l2_error(const Mesh& mesh, const Vector& nodal, const Exact& exact) {
  double sum = 0.0;
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto c = mesh.corners(t);
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const double area = mesh.triangle_area(t);
    for (const auto& [bary, weight] : triangle_rule()) {
      const Point x = bary(0) * c[0] + bary(1) * c[1] + bary(2) * c[2];
      const double uh = bary(0) * nodal(tri[0]) + bary(1) * nodal(tri[1]) + bary(2) * nodal(tri[2]);
      sum += weight * area * std::pow(uh - exact(x), 2);
    }
  }
  return std::sqrt(sum);
}

/// Final-time L2 error for u' - Laplace u = cos(pi (x1 + 1) / 2) on (-1,1)^2
/// with unit diffusion, whose exact solution is (1 - exp(-lambda t)) / lambda
/// times the source, lambda = pi^2 / 4.
inline double manufactured_error(double h, double dt, double T = 1.0) {
  DomainSpec spec;
  spec.mesh_size = h;
  spec.source_region = spec.bounds;
  const Mesh mesh = build_mesh(spec);
  const auto unit = [](const Point&) { return 1.0; };
  auto ops = std::make_shared<const FemOperators>(
      assemble_all(mesh, std::vector<Point>{}, unit, CoefficientRule::centroid));
  const HeatWorkspace heat(ops, TimeGrid::make(T, dt));
  const double pi = 3.14159265358979323846;
  const double lambda = pi * pi / 4.0;
  const auto phi = [pi](const Point& x) { return std::cos(pi * (x.x() + 1.0) / 2.0); };
  const Vector u = heat.final_state(interpolate_on_source(mesh, phi));
  const double amplitude = (1.0 - std::exp(-lambda * T)) / lambda;
  return l2_error(mesh, u, [&](const Point& x) { return amplitude * phi(x); });
}

}  // namespace oedheat::testing
