#pragma once

#include <cstdint>
#include <vector>

#include "oedheat/lowrank.hpp"
#include "oedheat/types.hpp"

namespace oedheat {

// A-optimality in low-rank form. With A(w) = R diag(w) R^T + I,
//   J(w) = tr(C0) - tr(C) + tr(A(w)^-1 C),
//   dJ/dw_k = -|C^1/2 A(w)^-1 r_k|^2.
// Without constants only the last trace term is returned.
double objective(const Vector& w, const LowRankFactor& lr, bool include_constants = true);
Vector gradient(const Vector& w, const LowRankFactor& lr);

// Reparameterised criterion J^p(z) = J(z^(1/p)). Gradient entries with
// z_k <= 1e-14 are zero when p < 1.
double objective_p(const Vector& z, double p, const LowRankFactor& lr, bool include_constants = true);
Vector gradient_p(const Vector& z, double p, const LowRankFactor& lr);

/// Euclidean projection onto {0 <= z <= 1, sum z <= budget}.
Vector project_capped_box(const Vector& z, double budget);

enum class SensorClass : std::uint8_t { free, dominant, redundant };

struct Design {
  Vector w;
  Index budget = 0;
  std::vector<SensorClass> classes;

  Index count() const;
};

struct SolverOptions {
  double tolerance = 1e-9;
  Index max_iterations = 500;
};

struct RelaxedResult {
  Vector w;
  double objective = 0.0;
  Index iterations = 0;
  bool converged = false;
};

/// Projected gradient with Armijo backtracking on the convex relaxed problem.
/// J(w) of the result is a lower bound for every binary design of the budget.
RelaxedResult solve_relaxed(const LowRankFactor& lr, double budget, const SolverOptions& options);

std::vector<SensorClass> classify(const Vector& w, double tolerance);

struct ContinuationParams {
  double delta = 0.2;
  double p_min = 1e-3;
  double binariness_tol = 1e-3;
  double classify_tol = 1e-3;
  SolverOptions inner{1e-9, 500};
};

struct ContinuationResult {
  Design design;
  double objective = 0.0;
  std::vector<double> powers;
  std::vector<Index> inner_iterations;
  bool forced_rounding = false;
};

/// Drives the relaxed optimum to a binary design by solving J^p for a
/// decreasing sequence of powers, keeping dominant and redundant sensors
/// fixed.
ContinuationResult p_continuation(const Vector& relaxed, const LowRankFactor& lr, Index budget,
                                  const ContinuationParams& params);

}  // namespace oedheat
