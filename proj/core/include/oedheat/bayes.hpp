#pragma once

#include <functional>
#include <random>
#include <vector>

#include "oedheat/heat_solver.hpp"
#include "oedheat/lowrank.hpp"
#include "oedheat/prior.hpp"
#include "oedheat/types.hpp"

namespace oedheat {

/// Gamma = variance * I.
struct NoiseModel {
  double variance = 0.0;
  Index samples = 0;
  double level = 0.0;
};

using DataSampler = std::function<Vector(std::mt19937_64&)>;
using LinearForward = std::function<Vector(const Vector&)>;

/// variance = level * mean over sensors of the sample variance of the data.
/// Throws std::domain_error when the data have zero variance.
NoiseModel calibrate_noise(const DataSampler& draw, Index samples, double level, std::mt19937_64& rng);
NoiseModel calibrate_noise(const LinearForward& forward, const PriorOperator& prior, Index samples,
                           double level, std::mt19937_64& rng);

/// Two smooth bumps of radius 3 pi / 40 centred at (-0.75, +-0.7).
double test_source(const Point& x);

Vector interpolate_on_source(const Mesh& mesh, const std::function<double(const Point&)>& f);

/// g = diag(w) (clean + noise). A noise value is drawn for every sensor so
/// that designs sharing a seed see the same realisation.
Vector synthesize_data(const Vector& clean, const Vector& w, const NoiseModel& noise, std::mt19937_64& rng);

/// Posterior precision in the coefficient frame,
///   H = F^T diag(w) F / variance + K L^-1 K,
/// so that the MAP point is H^-1 F^T diag(w) g / variance and the nodal
/// posterior variance is diag(H^-1).
Matrix posterior_precision(const Matrix& forward, const Matrix& precision_factor, const Vector& lumped_mass,
                           const Vector& w, double variance);

struct MapEstimate {
  Vector source;
  double relative_residual = 0.0;
  Index iterations = 0;
  bool converged = true;
};

MapEstimate reconstruct_map(const Matrix& forward, const Matrix& precision_factor, const Vector& lumped_mass,
                            const Vector& w, const Vector& data, double variance);
MapEstimate reconstruct_map(const Matrix& forward, const PriorOperator& prior, const Vector& w,
                            const Vector& data, const NoiseModel& noise);

/// Matrix-free conjugate gradients on the same normal equations, using PDE
/// solves for the forward map and the prior covariance as preconditioner.
MapEstimate reconstruct_map_iterative(const HeatWorkspace& heat, const PriorOperator& prior, const Vector& w,
                                      const Vector& data, const NoiseModel& noise, double tolerance = 1e-10,
                                      Index max_iterations = 500);

/// Nodal posterior variance from the low-rank factor.
Vector variance_field(const PriorOperator& prior, const LowRankFactor& lr, const Vector& w);
/// Nodal posterior variance from the dense posterior precision.
Vector variance_field_dense(const Matrix& forward, const PriorOperator& prior, const Vector& w,
                            const NoiseModel& noise);

/// Uniformly random design with exactly m0 ones.
Vector random_design(Index m, Index m0, std::mt19937_64& rng);

struct BaselineResult {
  double min = 0.0;
  double max = 0.0;
  std::vector<double> values;
  Vector best;
};

BaselineResult random_baseline(const LowRankFactor& lr, Index m0, Index count, std::mt19937_64& rng,
                               bool include_constants = true);

/// sqrt(e^T M e / s^T M s) with e = estimate - truth and M = diag(mass).
double relative_error(const Vector& estimate, const Vector& truth, const Vector& mass);

}  // namespace oedheat
