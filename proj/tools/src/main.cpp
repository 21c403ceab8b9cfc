#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <streambuf>

#include <CLI11.hpp>

#include "oedheat/app/config.hpp"
#include "oedheat/app/pipeline.hpp"

namespace {

// Writes to two stream buffers at once.
class TeeBuffer : public std::streambuf {
 public:
  TeeBuffer(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int ch) override {
    if (ch == traits_type::eof()) return traits_type::not_eof(ch);
    const auto c = traits_type::to_char_type(ch);
    const bool ok = a_->sputc(c) != traits_type::eof() && b_->sputc(c) != traits_type::eof();
    return ok ? ch : traits_type::eof();
  }
  int sync() override { return (a_->pubsync() == 0 && b_->pubsync() == 0) ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace oedheat::app;

  CLI::App cli{"Binary A-optimal sensor placement for heat source reconstruction"};
  cli.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<oedheat::Index> m0;
  std::optional<std::string> out;

  const auto add = [&](const char* name, const char* help, bool takes_m0) {
    CLI::App* sub = cli.add_subcommand(name, help);
    sub->add_option("--config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the master seed");
    sub->add_option("--out", out, "Override the output directory");
    if (takes_m0) sub->add_option("--m0", m0, "Sensor budget (0 selects the empty design for `variance`)");
    return sub;
  };
  CLI::App* factorize = add("factorize", "Build and cache the low-rank factor", false);
  CLI::App* sweep = add("sweep", "Optimise designs for m0 = 1..m0_max and write Aoptimalities.csv", false);
  CLI::App* reconstruct = add("reconstruct", "MAP reconstructions with optimised and random designs", true);
  CLI::App* variance = add("variance", "Pointwise posterior variance field", true);
  CLI::App* all = add("all", "sweep, reconstruct and variance", true);

  CLI11_PARSE(cli, argc, argv);

  RunConfig config;
  try {
    config = load_config(config_path);
    if (seed) config.seed = *seed;
    if (out) config.output_dir = *out;
    if (m0) {
      if (*m0 < 0 || *m0 > static_cast<oedheat::Index>(config.domain.sensors.size()) ||
          (*m0 == 0 && !variance->parsed())) {
        throw std::invalid_argument("--m0 out of range");
      }
      if (*m0 > 0) {
        config.reconstruct_m0 = *m0;
        config.m0_max = std::max(config.m0_max, config.reconstruct_m0);
      }
    }
    validate(config);
  } catch (const std::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 2;
  }

  std::filesystem::create_directories(config.output_dir);
  std::ofstream run_log(config.output_dir / "run.log", std::ios::app);
  TeeBuffer tee(std::cout.rdbuf(), run_log.rdbuf());
  std::ostream log(&tee);

  try {
    if (factorize->parsed()) {
      cmd_factorize(config, log);
    } else if (sweep->parsed()) {
      cmd_design_sweep(config, log);
    } else if (reconstruct->parsed()) {
      cmd_reconstruct(config, config.reconstruct_m0, log);
    } else if (variance->parsed()) {
      cmd_variance(config, m0 ? *m0 : config.reconstruct_m0, log);
    } else if (all->parsed()) {
      cmd_all(config, log);
    }
  } catch (const StageError& e) {
    log.flush();
    std::cerr << "error in stage " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    log.flush();
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  log.flush();
  return 0;
}
