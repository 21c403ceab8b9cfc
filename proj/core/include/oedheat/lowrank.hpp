#pragma once

#include <functional>
#include <limits>
#include <random>
#include <string>

#include "oedheat/heat_solver.hpp"
#include "oedheat/prior.hpp"
#include "oedheat/types.hpp"

namespace oedheat {

using BlockOperator = std::function<Matrix(const Matrix&)>;

/// Prior-preconditioned, noise-whitened forward map
///   F = Gamma^-1/2 (forward) C0^1/2 L^1/2,   (m x n)
/// with its transpose and the prior covariance expressed in the same
/// Euclidean frame. All three act column-wise on blocks.
struct PreconditionedMap {
  Index rows = 0;  // sensors
  Index cols = 0;  // source dofs
  BlockOperator apply;
  BlockOperator apply_transpose;
  BlockOperator prior_frame;
};

PreconditionedMap make_preconditioned_map(const HeatWorkspace& heat, const PriorOperator& prior,
                                          double noise_variance);

/// Map given by an explicit matrix, with an explicit (symmetric) prior in the
/// same frame. The identity is used when `prior_frame` is empty.
PreconditionedMap make_dense_map(Matrix forward, Matrix prior_frame = {});

struct FactorizationParams {
  double ratio_threshold = 1e-12;
  Index rank_cap = 50;
  Index oversample = 10;
  Index power_iterations = 2;
  Index block = 10;
};

/// F^T ~= Q R with orthonormal Q (n x l), R (l x m), and the projected prior
/// C = Q^T (L^1/2 C0 L^-1/2) Q. `prior_trace` is tr(C0), the design-independent
/// constant of the A-criterion; NaN until set.
struct LowRankFactor {
  Matrix Q;
  Matrix R;
  Matrix C;
  Matrix C_half;
  Vector sigma;
  double prior_trace = std::numeric_limits<double>::quiet_NaN();
  bool collapsed = false;

  Index rank() const { return R.rows(); }
  Index num_sensors() const { return R.cols(); }
};

/// Randomised subspace iteration with adaptive rank growth. The rank grows in
/// blocks until the smallest computed singular value drops below
/// ratio_threshold * sigma_1 or the cap is reached; the retained rank is the
/// number of singular values above that ratio (at most rank_cap).
LowRankFactor randomized_factorize(const PreconditionedMap& map, const FactorizationParams& params,
                                   std::mt19937_64& rng);

/// Sets C from the map's prior frame and recomputes C_half.
void attach_prior(LowRankFactor& factor, const PreconditionedMap& map);

/// Symmetrises C and sets C_half to its PSD square root.
void finalize_prior_projection(LowRankFactor& factor);

/// Column j is F e_j. Throws std::length_error above `entry_limit` entries.
Matrix materialize_dense(const PreconditionedMap& map, Index entry_limit = 4'000'000);

// Persistence: header text file plus Q.bin, R.bin, C.bin in `dir`.
struct FactorMetadata {
  std::string config_hash;
  std::uint64_t seed = 0;
  double ratio_threshold = 0.0;
  double noise_variance = 0.0;
};

void save_factor(const std::filesystem::path& dir, const LowRankFactor& factor, const FactorMetadata& meta);

struct LoadedFactor {
  LowRankFactor factor;
  FactorMetadata meta;
};

/// Returns nullopt when files are missing, malformed or fail the checksum.
std::optional<LoadedFactor> load_factor(const std::filesystem::path& dir);

}  // namespace oedheat
