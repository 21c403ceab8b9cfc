#include "oedheat/app/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <span>
#include <sstream>
#include <thread>

#include "oedheat/csv.hpp"
#include "oedheat/oed.hpp"

namespace oedheat::app {

namespace {

namespace fs = std::filesystem;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string m0_tag(Index m0) {
  std::ostringstream s;
  s << "m0_";
  if (m0 < 10) s << '0';
  s << m0;
  return s.str();
}

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

Index worker_count(const RunConfig& config, Index jobs) {
  Index n = config.threads > 0 ? config.threads : static_cast<Index>(std::thread::hardware_concurrency());
  return std::clamp<Index>(n, 1, std::max<Index>(jobs, 1));
}

// Runs body(i) for i in [0, jobs) on a small pool; results are written by
// index, so output order does not depend on scheduling.
template <typename Body>
void parallel_for(Index jobs, Index workers, Body&& body) {
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (Index i = next++; i < jobs; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (Index t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

double ReconstructionReport::mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

fs::path factor_dir(const RunConfig& config) { return config.output_dir / "factor"; }
fs::path sweep_csv(const RunConfig& config) { return config.output_dir / "Aoptimalities.csv"; }
fs::path design_csv(const RunConfig& config, const std::string& kind, Index m0) {
  return config.output_dir / "designs" / (kind + "_" + m0_tag(m0) + ".csv");
}

Setup build_setup(const RunConfig& config) {
  Mesh mesh = stage("mesh", [&] { return build_mesh(config.domain); });
  auto ops = stage("assembly", [&] {
    return std::make_shared<const FemOperators>(assemble_all(mesh, config.domain.sensors));
  });
  HeatWorkspace heat = stage("heat solver", [&] {
    return HeatWorkspace(ops, TimeGrid::make(config.final_time, config.dt));
  });
  PriorOperator prior = stage("prior", [&] { return PriorOperator(mesh, config.prior_params()); });
  return Setup{std::move(mesh), std::move(ops), std::move(heat), std::move(prior)};
}

FactorizeResult cmd_factorize(const RunConfig& config, std::ostream& log) {
  const std::string hash = factor_hash(config);
  const fs::path dir = factor_dir(config);
  if (config.use_cache) {
    if (auto cached = load_factor(dir)) {
      if (cached->meta.config_hash == hash) {
        log << "factorize: cache hit (" << hash << "), rank " << cached->factor.rank() << '\n';
        return FactorizeResult{std::move(cached->factor), std::move(cached->meta), true};
      }
      log << "factorize: cache is for another configuration, rebuilding\n";
    } else if (fs::exists(dir / "factor.txt")) {
      log << "factorize: cached factor failed validation, rebuilding\n";
    }
  }

  const auto start = Clock::now();
  const Setup setup = build_setup(config);
  log << "factorize: " << setup.mesh.num_vertices() << " vertices, " << setup.mesh.num_triangles()
      << " triangles, " << setup.prior.size() << " source dofs, " << setup.heat.num_sensors() << " sensors, "
      << setup.heat.time_grid().steps << " time steps\n";

  const NoiseModel noise = stage("noise calibration", [&] {
    std::mt19937_64 rng(sub_seed(config.seed, Purpose::prior_samples));
    const LinearForward forward = [&](const Vector& s) { return setup.heat.forward(s); };
    return calibrate_noise(forward, setup.prior, config.noise_samples, config.noise_level, rng);
  });
  log << "factorize: noise variance " << format_double(noise.variance) << '\n';

  FactorizeResult result;
  result.factor = stage("factorization", [&] {
    const PreconditionedMap map = make_preconditioned_map(setup.heat, setup.prior, noise.variance);
    std::mt19937_64 rng(sub_seed(config.seed, Purpose::sketch));
    return randomized_factorize(map, config.lowrank, rng);
  });
  result.factor.prior_trace = stage("prior trace", [&] { return setup.prior.trace(); });
  if (result.factor.collapsed) log << "factorize: warning: rank collapse, forward map is numerically zero\n";
  log << "factorize: rank " << result.factor.rank() << ", sigma_1 " << format_double(result.factor.sigma(0))
      << ", sigma_l/sigma_1 "
      << format_double(result.factor.sigma(result.factor.rank() - 1) / result.factor.sigma(0)) << ", tr(C0) "
      << format_double(result.factor.prior_trace) << ", " << seconds_since(start) << " s\n";

  result.meta = FactorMetadata{hash, config.seed, config.lowrank.ratio_threshold, noise.variance};
  stage("cache", [&] { save_factor(dir, result.factor, result.meta); });
  return result;
}

std::vector<SweepRow> cmd_design_sweep(const RunConfig& config, std::ostream& log) {
  const FactorizeResult f = cmd_factorize(config, log);
  const LowRankFactor& lr = f.factor;
  const Index m = lr.num_sensors();
  if (m != static_cast<Index>(config.domain.sensors.size())) {
    throw StageError("sweep", "factor has " + std::to_string(m) + " sensors, config has " +
                                  std::to_string(config.domain.sensors.size()));
  }
  const auto start = Clock::now();
  std::vector<SweepRow> rows(static_cast<std::size_t>(config.m0_max));
  stage("sweep", [&] {
    parallel_for(config.m0_max, worker_count(config, config.m0_max), [&](Index i) {
      SweepRow& row = rows[static_cast<std::size_t>(i)];
      row.m0 = i + 1;
      const RelaxedResult relaxed = solve_relaxed(lr, static_cast<double>(row.m0), config.relaxed);
      row.relaxed = relaxed.objective;
      row.relaxed_design = relaxed.w;
      row.relaxed_converged = relaxed.converged;
      row.relaxed_iterations = relaxed.iterations;
      const ContinuationResult binary = p_continuation(relaxed.w, lr, row.m0, config.continuation);
      row.binary = binary.objective;
      row.design = binary.design.w;
      row.forced_rounding = binary.forced_rounding;
      row.continuation_steps = static_cast<Index>(binary.powers.size());
      std::mt19937_64 rng(sub_seed(config.seed, Purpose::random_designs, static_cast<std::uint64_t>(row.m0)));
      const BaselineResult baseline = random_baseline(lr, row.m0, config.random_designs, rng);
      row.random_max = baseline.max;
      row.random_min = baseline.min;
      row.best_random = baseline.best;
    });
  });

  stage("output", [&] {
    std::ofstream csv = open_output(sweep_csv(config));
    csv << "targets,randommax,randommin,w,w1\n";
    std::ofstream side = open_output(config.output_dir / "sweep.log");
    side << "m0 relaxed_iterations relaxed_converged continuation_steps forced_rounding\n";
    for (const SweepRow& row : rows) {
      csv << row.m0 << ',' << format_double(row.random_max) << ',' << format_double(row.random_min) << ','
          << format_double(row.binary) << ',' << format_double(row.relaxed) << '\n';
      side << row.m0 << ' ' << row.relaxed_iterations << ' ' << (row.relaxed_converged ? 1 : 0) << ' '
           << row.continuation_steps << ' ' << (row.forced_rounding ? 1 : 0);
      if (!row.relaxed_converged) side << "  FLAG relaxed solve did not converge";
      side << '\n';
      write_design_csv(design_csv(config, "optimized", row.m0), config.domain.sensors, row.design);
      write_design_csv(design_csv(config, "relaxed", row.m0), config.domain.sensors, row.relaxed_design);
      write_design_csv(design_csv(config, "random", row.m0), config.domain.sensors, row.best_random);
    }
  });
  const auto flagged = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.relaxed_converged; });
  log << "sweep: m0 = 1.." << config.m0_max << ", " << config.random_designs << " random designs each, "
      << flagged << " unconverged relaxed solves, " << seconds_since(start) << " s\n";
  return rows;
}

ReconstructionReport cmd_reconstruct(const RunConfig& config, Index m0, std::ostream& log) {
  const Index m = static_cast<Index>(config.domain.sensors.size());
  const fs::path optimized_path = design_csv(config, "optimized", m0);
  const fs::path random_path = design_csv(config, "random", m0);
  if (!fs::exists(optimized_path) || !fs::exists(random_path)) {
    throw StageError("reconstruct", "no designs for m0 = " + std::to_string(m0) + " in " +
                                        (config.output_dir / "designs").string() + "; run `oedheat sweep` first");
  }
  const Vector w_opt = stage("reconstruct", [&] { return read_design_csv(optimized_path, m); });
  const Vector w_rand = stage("reconstruct", [&] { return read_design_csv(random_path, m); });

  const FactorizeResult f = cmd_factorize(config, log);
  const NoiseModel noise{f.meta.noise_variance, config.noise_samples, config.noise_level};
  const Setup setup = build_setup(config);
  const auto start = Clock::now();
  const Matrix forward = stage("reconstruct", [&] { return setup.heat.forward_matrix(); });
  const Vector truth = interpolate_on_source(setup.mesh, test_source);
  const Vector clean = forward * truth;
  const Vector& mass = setup.prior.lumped_mass();
  const Vector ones = Vector::Ones(mass.size());

  ReconstructionReport report;
  report.m0 = m0;
  std::vector<Vector> first_maps;
  stage("reconstruct", [&] {
    for (Index seed = 0; seed < config.noise_seeds; ++seed) {
      const std::uint64_t s = sub_seed(config.seed, Purpose::data_noise, static_cast<std::uint64_t>(seed));
      std::mt19937_64 design_rng(sub_seed(config.seed, Purpose::random_designs,
                                          (std::uint64_t{1} << 32) + static_cast<std::uint64_t>(seed)));
      const Vector w_uniform = random_design(m, m0, design_rng);
      std::mt19937_64 rng_opt(s), rng_rand(s), rng_uniform(s);
      const Vector g_opt = synthesize_data(clean, w_opt, noise, rng_opt);
      const Vector g_rand = synthesize_data(clean, w_rand, noise, rng_rand);
      const Vector g_uniform = synthesize_data(clean, w_uniform, noise, rng_uniform);
      const Vector map_opt = reconstruct_map(forward, setup.prior, w_opt, g_opt, noise).source;
      const Vector map_rand = reconstruct_map(forward, setup.prior, w_rand, g_rand, noise).source;
      const Vector map_uniform = reconstruct_map(forward, setup.prior, w_uniform, g_uniform, noise).source;
      report.optimized_l2.push_back(relative_error(map_opt, truth, mass));
      report.random_l2.push_back(relative_error(map_rand, truth, mass));
      report.uniform_l2.push_back(relative_error(map_uniform, truth, mass));
      report.optimized_nodal.push_back(relative_error(map_opt, truth, ones));
      report.random_nodal.push_back(relative_error(map_rand, truth, ones));
      report.uniform_nodal.push_back(relative_error(map_uniform, truth, ones));
      if (seed == 0) first_maps = {map_opt, map_rand};
    }
  });

  stage("output", [&] {
    const auto ids = std::span<const Index>(setup.mesh.source_vertices);
    const fs::path fields = config.output_dir / "fields";
    fs::create_directories(fields);
    write_field_csv(fields / "truth.csv", setup.mesh, truth, ids);
    write_field_csv(fields / ("map_optimized_" + m0_tag(m0) + ".csv"), setup.mesh, first_maps[0], ids);
    write_field_csv(fields / ("map_random_" + m0_tag(m0) + ".csv"), setup.mesh, first_maps[1], ids);
    std::ofstream csv = open_output(config.output_dir / ("reconstruct_" + m0_tag(m0) + ".csv"));
    csv << "seed,optimized_l2,random_l2,uniform_l2,optimized_nodal,random_nodal,uniform_nodal\n";
    for (std::size_t i = 0; i < report.optimized_l2.size(); ++i) {
      csv << i << ',' << format_double(report.optimized_l2[i]) << ',' << format_double(report.random_l2[i]) << ','
          << format_double(report.uniform_l2[i]) << ',' << format_double(report.optimized_nodal[i]) << ','
          << format_double(report.random_nodal[i]) << ',' << format_double(report.uniform_nodal[i]) << '\n';
    }
  });
  log << "reconstruct: m0 = " << m0 << ", " << config.noise_seeds << " noise seeds\n"
      << "  mean relative error (mass-weighted L2): optimized "
      << format_double(ReconstructionReport::mean(report.optimized_l2)) << ", best random "
      << format_double(ReconstructionReport::mean(report.random_l2)) << ", uniform random "
      << format_double(ReconstructionReport::mean(report.uniform_l2)) << '\n'
      << "  mean relative error (nodal Euclidean):  optimized "
      << format_double(ReconstructionReport::mean(report.optimized_nodal)) << ", best random "
      << format_double(ReconstructionReport::mean(report.random_nodal)) << ", uniform random "
      << format_double(ReconstructionReport::mean(report.uniform_nodal)) << '\n'
      << "  " << seconds_since(start) << " s\n";
  return report;
}

VarianceReport cmd_variance(const RunConfig& config, Index m0, std::ostream& log) {
  const Index m = static_cast<Index>(config.domain.sensors.size());
  Vector w = Vector::Zero(m);
  if (m0 > 0) {
    const fs::path path = design_csv(config, "optimized", m0);
    if (!fs::exists(path)) {
      throw StageError("variance", "no design for m0 = " + std::to_string(m0) + "; run `oedheat sweep` first");
    }
    w = stage("variance", [&] { return read_design_csv(path, m); });
  }
  const FactorizeResult f = cmd_factorize(config, log);
  const Setup setup = build_setup(config);

  VarianceReport report;
  report.m0 = m0;
  const Vector field = stage("variance", [&] { return variance_field(setup.prior, f.factor, w); });
  const Vector& mass = setup.prior.lumped_mass();
  report.objective = objective(w, f.factor);
  report.weighted_sum = mass.dot(field);
  report.dense_weighted_sum = std::numeric_limits<double>::quiet_NaN();
  if (setup.prior.size() <= config.prior_params().dense_limit) {
    stage("variance", [&] {
      const NoiseModel noise{f.meta.noise_variance, config.noise_samples, config.noise_level};
      const Vector dense = variance_field_dense(setup.heat.forward_matrix(), setup.prior, w, noise);
      report.dense_weighted_sum = mass.dot(dense);
    });
  }

  stage("output", [&] {
    const std::string name = m0 > 0 ? m0_tag(m0) : std::string("prior");
    write_field_csv(config.output_dir / "fields" / ("variance_" + name + ".csv"), setup.mesh, field,
                    std::span<const Index>(setup.mesh.source_vertices));
    write_design_csv(config.output_dir / "fields" / ("variance_sensors_" + name + ".csv"), config.domain.sensors, w);
  });
  const double gap = std::abs(report.weighted_sum - report.objective) / report.objective;
  log << "variance: m0 = " << m0 << ", J = " << format_double(report.objective) << ", sum L c = "
      << format_double(report.weighted_sum) << " (relative gap " << gap << ")";
  if (!std::isnan(report.dense_weighted_sum)) {
    log << ", dense sum L c = " << format_double(report.dense_weighted_sum) << " (relative gap "
        << std::abs(report.dense_weighted_sum - report.objective) / report.objective << ")";
  }
  log << '\n';
  return report;
}

void cmd_all(const RunConfig& config, std::ostream& log) {
  cmd_design_sweep(config, log);
  cmd_reconstruct(config, config.reconstruct_m0, log);
  cmd_variance(config, config.reconstruct_m0, log);
}

void write_design_csv(const fs::path& path, const std::vector<Point>& sensors, const Vector& w) {
  if (static_cast<Index>(sensors.size()) != w.size()) throw std::invalid_argument("design and sensors differ");
  std::ofstream out = open_output(path);
  out << "k,x,y,w\n";
  for (Index k = 0; k < w.size(); ++k) {
    const Point& p = sensors[static_cast<std::size_t>(k)];
    out << k << ',' << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(w(k)) << '\n';
  }
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, std::string* header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + " is empty");
  if (header) *header = line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(parse_csv_numbers(line));
  }
  return rows;
}

Vector read_design_csv(const fs::path& path, Index expected_sensors) {
  std::string header;
  const auto rows = read_numeric_csv(path, &header);
  if (header != "k,x,y,w") throw std::runtime_error(path.string() + ": unexpected header '" + header + "'");
  if (static_cast<Index>(rows.size()) != expected_sensors) {
    throw std::runtime_error(path.string() + ": expected " + std::to_string(expected_sensors) + " sensors");
  }
  Vector w(expected_sensors);
  for (Index k = 0; k < expected_sensors; ++k) {
    const auto& row = rows[static_cast<std::size_t>(k)];
    if (row.size() != 4 || row[0] != static_cast<double>(k)) throw std::runtime_error(path.string() + ": bad row");
    w(k) = row[3];
  }
  return w;
}

}  // namespace oedheat::app
