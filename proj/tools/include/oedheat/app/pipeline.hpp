#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oedheat/app/config.hpp"
#include "oedheat/assembly.hpp"
#include "oedheat/bayes.hpp"
#include "oedheat/heat_solver.hpp"
#include "oedheat/lowrank.hpp"
#include "oedheat/prior.hpp"

namespace oedheat::app {

/// Failure inside a named pipeline stage.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct Setup {
  Mesh mesh;
  std::shared_ptr<const FemOperators> ops;
  HeatWorkspace heat;
  PriorOperator prior;
};

Setup build_setup(const RunConfig& config);

struct FactorizeResult {
  LowRankFactor factor;
  FactorMetadata meta;
  bool cache_hit = false;
};

struct SweepRow {
  Index m0 = 0;
  double random_max = 0.0;
  double random_min = 0.0;
  double binary = 0.0;
  double relaxed = 0.0;
  bool relaxed_converged = false;
  Index relaxed_iterations = 0;
  bool forced_rounding = false;
  Index continuation_steps = 0;
  Vector design;
  Vector relaxed_design;
  Vector best_random;
};

struct ReconstructionReport {
  Index m0 = 0;
  std::vector<double> optimized_l2;
  std::vector<double> random_l2;
  std::vector<double> optimized_nodal;
  std::vector<double> random_nodal;
  // A fresh uniformly random design of the same budget per noise seed.
  std::vector<double> uniform_l2;
  std::vector<double> uniform_nodal;

  static double mean(const std::vector<double>& v);
};

struct VarianceReport {
  Index m0 = 0;
  double objective = 0.0;
  double weighted_sum = 0.0;
  double dense_weighted_sum = 0.0;  // NaN when the dense check was skipped
};

// Output layout below config.output_dir.
std::filesystem::path factor_dir(const RunConfig& config);
std::filesystem::path sweep_csv(const RunConfig& config);
std::filesystem::path design_csv(const RunConfig& config, const std::string& kind, Index m0);

FactorizeResult cmd_factorize(const RunConfig& config, std::ostream& log);
std::vector<SweepRow> cmd_design_sweep(const RunConfig& config, std::ostream& log);
ReconstructionReport cmd_reconstruct(const RunConfig& config, Index m0, std::ostream& log);
VarianceReport cmd_variance(const RunConfig& config, Index m0, std::ostream& log);
void cmd_all(const RunConfig& config, std::ostream& log);

// CSV helpers shared with the tests.
void write_design_csv(const std::filesystem::path& path, const std::vector<Point>& sensors, const Vector& w);
Vector read_design_csv(const std::filesystem::path& path, Index expected_sensors);
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path, std::string* header = nullptr);

}  // namespace oedheat::app
