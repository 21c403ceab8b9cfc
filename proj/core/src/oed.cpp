#include "oedheat/oed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace oedheat {

namespace {

constexpr double kZeroWeight = 1e-14;
constexpr double kArmijo = 1e-4;

void check_size(const Vector& w, const LowRankFactor& lr) {
  if (w.size() != lr.num_sensors()) throw std::invalid_argument("design has wrong dimension");
}

Eigen::LLT<Matrix> factor_system(const Vector& w, const LowRankFactor& lr) {
  Matrix A = lr.R * w.asDiagonal() * lr.R.transpose();
  A.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw std::domain_error("R diag(w) R^T + I is not positive definite");
  return llt;
}

double constant_part(const LowRankFactor& lr) {
  if (std::isnan(lr.prior_trace)) throw std::logic_error("prior trace not set on the low-rank factor");
  return lr.prior_trace - lr.C.trace();
}

struct Evaluation {
  double value = 0.0;
  Vector gradient;
};

// J and its gradient from one factorisation; constants excluded.
Evaluation evaluate(const Vector& w, const LowRankFactor& lr) {
  const auto llt = factor_system(w, lr);
  const Matrix X = llt.solve(lr.R);
  Evaluation e;
  e.value = llt.solve(lr.C).trace();
  e.gradient = -(lr.C_half * X).colwise().squaredNorm().transpose();
  return e;
}

Vector root_weights(const Vector& z, double p) {
  return z.cwiseMax(0.0).array().pow(1.0 / p).matrix();
}

Evaluation evaluate_p(const Vector& z, double p, const LowRankFactor& lr) {
  Evaluation e = evaluate(root_weights(z, p), lr);
  for (Index k = 0; k < z.size(); ++k) {
    if (p < 1.0 && z(k) <= kZeroWeight) {
      e.gradient(k) = 0.0;
    } else {
      e.gradient(k) *= std::pow(z(k), 1.0 / p - 1.0) / p;
    }
  }
  return e;
}

double sum_clipped(const Vector& z, double shift) {
  return (z.array() - shift).max(0.0).min(1.0).sum();
}

struct SearchResult {
  Vector x;
  double value = 0.0;
  Index iterations = 0;
  bool converged = false;
};

// Projected gradient with Barzilai-Borwein trial steps and Armijo
// backtracking along the projection arc. Only `free_set` entries move.
template <typename Objective>
SearchResult projected_gradient(const Objective& objective, Vector x, const std::vector<Index>& free_set,
                                double budget, const SolverOptions& options) {
  const auto n = static_cast<Index>(free_set.size());
  SearchResult result;
  if (n == 0) {
    result.x = x;
    result.value = objective(x).value;
    result.converged = true;
    return result;
  }
  auto gather = [&](const Vector& full) {
    Vector y(n);
    for (Index i = 0; i < n; ++i) y(i) = full(free_set[static_cast<std::size_t>(i)]);
    return y;
  };
  auto scatter = [&](const Vector& y) {
    Vector full = x;
    for (Index i = 0; i < n; ++i) full(free_set[static_cast<std::size_t>(i)]) = y(i);
    return full;
  };

  Vector y = project_capped_box(gather(x), budget);
  Evaluation current = objective(scatter(y));
  Vector g = gather(current.gradient);
  double step = 1.0 / std::max(g.cwiseAbs().maxCoeff(), 1e-12);

  for (Index it = 0; it < options.max_iterations; ++it) {
    const double stationarity = (y - project_capped_box(y - g, budget)).cwiseAbs().maxCoeff();
    if (stationarity <= options.tolerance) {
      result.converged = true;
      break;
    }
    bool accepted = false;
    Vector y_next;
    Evaluation next;
    for (int halving = 0; halving < 60; ++halving) {
      y_next = project_capped_box(y - step * g, budget);
      const Vector d = y_next - y;
      if (d.cwiseAbs().maxCoeff() == 0.0) break;
      next = objective(scatter(y_next));
      if (next.value <= current.value + kArmijo * g.dot(d)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++result.iterations;
    if (!accepted) break;  // no representable decrease along the arc

    const Vector g_next = gather(next.gradient);
    const Vector s = y_next - y;
    const Vector dg = g_next - g;
    const double curvature = s.dot(dg);
    step = curvature > 0.0 ? s.squaredNorm() / curvature : 2.0 * step;
    step = std::clamp(step, 1e-20, 1e20);
    y = y_next;
    g = g_next;
    current = std::move(next);
  }
  if (!result.converged) {
    const double stationarity = (y - project_capped_box(y - g, budget)).cwiseAbs().maxCoeff();
    result.converged = stationarity <= options.tolerance;
  }
  result.x = scatter(y);
  result.value = current.value;
  return result;
}

}  // namespace

double objective(const Vector& w, const LowRankFactor& lr, bool include_constants) {
  check_size(w, lr);
  const double third = factor_system(w, lr).solve(lr.C).trace();
  return include_constants ? constant_part(lr) + third : third;
}

Vector gradient(const Vector& w, const LowRankFactor& lr) {
  check_size(w, lr);
  return evaluate(w, lr).gradient;
}

double objective_p(const Vector& z, double p, const LowRankFactor& lr, bool include_constants) {
  if (!(p > 0.0)) throw std::invalid_argument("power p must be positive");
  return objective(root_weights(z, p), lr, include_constants);
}

Vector gradient_p(const Vector& z, double p, const LowRankFactor& lr) {
  if (!(p > 0.0)) throw std::invalid_argument("power p must be positive");
  check_size(z, lr);
  return evaluate_p(z, p, lr).gradient;
}

Vector project_capped_box(const Vector& z, double budget) {
  Vector clipped = z.cwiseMax(0.0).cwiseMin(1.0);
  if (clipped.sum() <= budget) return clipped;
  if (budget <= 0.0) return Vector::Zero(z.size());

  // sum_clipped(z, tau) is non-increasing in tau; bracket the root.
  double lo = 0.0;
  double hi = z.maxCoeff();
  double tau = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    tau = 0.5 * (lo + hi);
    const double s = sum_clipped(z, tau);
    if (std::abs(s - budget) <= 1e-10) break;
    (s > budget ? lo : hi) = tau;
    if (hi - lo <= 1e-16 * std::max(1.0, std::abs(hi))) break;
  }
  // Polish with the closed form on the identified active set.
  Index n_free = 0;
  Index n_ones = 0;
  double free_sum = 0.0;
  for (Index k = 0; k < z.size(); ++k) {
    const double v = z(k) - tau;
    if (v >= 1.0) {
      ++n_ones;
    } else if (v > 0.0) {
      ++n_free;
      free_sum += z(k);
    }
  }
  if (n_free > 0) {
    const double exact = (free_sum - (budget - static_cast<double>(n_ones))) / static_cast<double>(n_free);
    if (std::abs(sum_clipped(z, exact) - budget) < std::abs(sum_clipped(z, tau) - budget)) tau = exact;
  }
  return (z.array() - tau).max(0.0).min(1.0).matrix();
}

Index Design::count() const {
  return static_cast<Index>((w.array() > 0.5).count());
}

RelaxedResult solve_relaxed(const LowRankFactor& lr, double budget, const SolverOptions& options) {
  const Index m = lr.num_sensors();
  std::vector<Index> all(static_cast<std::size_t>(m));
  std::iota(all.begin(), all.end(), Index{0});
  const Vector start = Vector::Constant(m, std::clamp(budget / static_cast<double>(m), 0.0, 1.0));
  const auto search = projected_gradient([&](const Vector& w) { return evaluate(w, lr); }, start, all, budget,
                                         options);
  RelaxedResult result;
  result.w = search.x;
  result.iterations = search.iterations;
  result.converged = search.converged;
  result.objective = objective(result.w, lr, !std::isnan(lr.prior_trace));
  return result;
}

std::vector<SensorClass> classify(const Vector& w, double tolerance) {
  std::vector<SensorClass> classes(static_cast<std::size_t>(w.size()), SensorClass::free);
  for (Index k = 0; k < w.size(); ++k) {
    if (w(k) >= 1.0 - tolerance) {
      classes[static_cast<std::size_t>(k)] = SensorClass::dominant;
    } else if (w(k) <= tolerance) {
      classes[static_cast<std::size_t>(k)] = SensorClass::redundant;
    }
  }
  return classes;
}

ContinuationResult p_continuation(const Vector& relaxed, const LowRankFactor& lr, Index budget,
                                  const ContinuationParams& params) {
  if (!(params.delta > 0.0 && params.delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(params.binariness_tol > 0.0 && params.binariness_tol < 0.5)) {
    throw std::invalid_argument("binariness tolerance must lie in (0, 0.5)");
  }
  check_size(relaxed, lr);

  ContinuationResult result;
  Design& design = result.design;
  design.budget = budget;
  design.classes = classify(relaxed, params.classify_tol);
  design.w = relaxed;

  std::vector<Index> free_set;
  Index dominant = 0;
  for (Index k = 0; k < relaxed.size(); ++k) {
    switch (design.classes[static_cast<std::size_t>(k)]) {
      case SensorClass::dominant:
        design.w(k) = 1.0;
        ++dominant;
        break;
      case SensorClass::redundant:
        design.w(k) = 0.0;
        break;
      case SensorClass::free:
        free_set.push_back(k);
        break;
    }
  }
  const double free_budget = std::max(0.0, static_cast<double>(budget - dominant));

  auto non_binary = [&] {
    return std::any_of(free_set.begin(), free_set.end(), [&](Index k) {
      return design.w(k) > params.binariness_tol && design.w(k) < 1.0 - params.binariness_tol;
    });
  };

  double p = 1.0;
  while (non_binary() && p >= params.p_min) {
    p *= 1.0 - params.delta;
    const Vector z0 = design.w.cwiseMax(0.0).array().pow(p).matrix();
    const auto search = projected_gradient([&](const Vector& z) { return evaluate_p(z, p, lr); }, z0, free_set,
                                           free_budget, params.inner);
    design.w = root_weights(search.x, p);
    result.powers.push_back(p);
    result.inner_iterations.push_back(search.iterations);
  }

  const auto free_budget_count = static_cast<std::size_t>(std::llround(free_budget));
  if (non_binary()) {
    result.forced_rounding = true;
    std::vector<Index> order = free_set;
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return design.w(a) > design.w(b); });
    for (std::size_t i = 0; i < order.size(); ++i) design.w(order[i]) = i < free_budget_count ? 1.0 : 0.0;
  } else {
    for (Index k : free_set) design.w(k) = design.w(k) >= 0.5 ? 1.0 : 0.0;
  }
  result.objective = objective(design.w, lr, !std::isnan(lr.prior_trace));
  return result;
}

}  // namespace oedheat
