#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "oedheat/geometry.hpp"
#include "oedheat/lowrank.hpp"
#include "oedheat/oed.hpp"
#include "oedheat/prior.hpp"

namespace oedheat::app {

struct RunConfig {
  DomainSpec domain;
  double final_time = 1.0;
  double dt = 1e-2;
  double alpha = 0.25;
  double robin_divisor = 1.42;
  Index noise_samples = 1000;
  double noise_level = 0.01;
  FactorizationParams lowrank;
  SolverOptions relaxed{1e-9, 5000};
  ContinuationParams continuation;
  Index m0_max = 36;
  Index random_designs = 200;
  Index reconstruct_m0 = 36;
  Index noise_seeds = 10;
  std::uint64_t seed = 20240607;
  std::filesystem::path output_dir = "out";
  bool use_cache = true;
  Index threads = 0;  // 0: hardware concurrency

  PriorParams prior_params() const { return PriorParams::from_alpha(alpha, robin_divisor); }
};

/// Parses YAML text. Unknown keys and out-of-range values throw
/// std::invalid_argument naming the key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

void validate(const RunConfig& config);

/// Hash over every field that influences the low-rank factor.
std::string factor_hash(const RunConfig& config);

enum class Purpose : std::uint64_t { sketch = 1, prior_samples = 2, data_noise = 3, random_designs = 4 };

/// Independent sub-seed per purpose (and optional stream index).
std::uint64_t sub_seed(std::uint64_t master, Purpose purpose, std::uint64_t stream = 0);

}  // namespace oedheat::app
