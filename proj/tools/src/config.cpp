#include "oedheat/app/config.hpp"

#include <array>
#include <fstream>
#include <initializer_list>
#include <random>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "oedheat/csv.hpp"

namespace oedheat::app {

namespace {

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw std::invalid_argument(where + " must be a mapping");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& entry : node) {
    const auto key = entry.first.as<std::string>();
    if (!keys.count(key)) throw std::invalid_argument("unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw std::invalid_argument("bad value for '" + where + "." + key + "'");
  }
}

Rect read_rect(const YAML::Node& node, const std::string& key) {
  const auto v = node.as<std::vector<double>>();
  if (v.size() != 4) throw std::invalid_argument(key + " must be [x_min, y_min, x_max, y_max]");
  return Rect{v[0], v[1], v[2], v[3]};
}

Point read_point(const YAML::Node& node, const std::string& key) {
  const auto v = node.as<std::vector<double>>();
  if (v.size() != 2) throw std::invalid_argument(key + " must be [x, y]");
  return Point(v[0], v[1]);
}

void read_domain(const YAML::Node& node, RunConfig& c) {
  check_keys(node, "domain", {"bounds", "source_region", "holes", "sensors", "mesh_size"});
  if (node["bounds"]) c.domain.bounds = read_rect(node["bounds"], "domain.bounds");
  if (node["source_region"]) c.domain.source_region = read_rect(node["source_region"], "domain.source_region");
  read(node, "mesh_size", c.domain.mesh_size, "domain");
  if (node["holes"]) {
    c.domain.holes.clear();
    for (const auto& h : node["holes"]) {
      check_keys(h, "domain.holes[]", {"center", "radius"});
      c.domain.holes.push_back({read_point(h["center"], "domain.holes[].center"), h["radius"].as<double>()});
    }
  }
  if (const auto s = node["sensors"]) {
    check_keys(s, "domain.sensors", {"grid", "points"});
    c.domain.sensors.clear();
    if (const auto g = s["grid"]) {
      check_keys(g, "domain.sensors.grid", {"x", "y"});
      const auto x = g["x"].as<std::vector<double>>();
      const auto y = g["y"].as<std::vector<double>>();
      if (x.size() != 3 || y.size() != 3) throw std::invalid_argument("sensor grid axes are [min, max, count]");
      c.domain.sensors = sensor_grid(x[0], x[1], static_cast<Index>(x[2]), y[0], y[1], static_cast<Index>(y[2]));
    }
    if (const auto p = s["points"]) {
      for (const auto& q : p) c.domain.sensors.push_back(read_point(q, "domain.sensors.points[]"));
    }
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

// FNV-1a over a canonical text rendering.
std::string hash_text(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  RunConfig c;
  if (root.IsNull()) return c;
  check_keys(root, "config", {"seed", "output_dir", "threads", "cache", "domain", "time", "prior", "noise",
                              "lowrank", "optimizer", "sweep", "reconstruct"});
  read(root, "seed", c.seed, "config");
  if (root["output_dir"]) c.output_dir = root["output_dir"].as<std::string>();
  read(root, "threads", c.threads, "config");
  read(root, "cache", c.use_cache, "config");
  if (root["domain"]) read_domain(root["domain"], c);
  if (const auto t = root["time"]) {
    check_keys(t, "time", {"final", "step"});
    read(t, "final", c.final_time, "time");
    read(t, "step", c.dt, "time");
  }
  if (const auto p = root["prior"]) {
    check_keys(p, "prior", {"alpha", "robin_divisor"});
    read(p, "alpha", c.alpha, "prior");
    read(p, "robin_divisor", c.robin_divisor, "prior");
  }
  if (const auto n = root["noise"]) {
    check_keys(n, "noise", {"samples", "level"});
    read(n, "samples", c.noise_samples, "noise");
    read(n, "level", c.noise_level, "noise");
  }
  if (const auto l = root["lowrank"]) {
    check_keys(l, "lowrank", {"ratio_threshold", "rank_cap", "oversample", "power_iterations", "block"});
    read(l, "ratio_threshold", c.lowrank.ratio_threshold, "lowrank");
    read(l, "rank_cap", c.lowrank.rank_cap, "lowrank");
    read(l, "oversample", c.lowrank.oversample, "lowrank");
    read(l, "power_iterations", c.lowrank.power_iterations, "lowrank");
    read(l, "block", c.lowrank.block, "lowrank");
  }
  if (const auto o = root["optimizer"]) {
    check_keys(o, "optimizer", {"relaxed", "continuation"});
    if (const auto r = o["relaxed"]) {
      check_keys(r, "optimizer.relaxed", {"tolerance", "max_iterations"});
      read(r, "tolerance", c.relaxed.tolerance, "optimizer.relaxed");
      read(r, "max_iterations", c.relaxed.max_iterations, "optimizer.relaxed");
    }
    if (const auto k = o["continuation"]) {
      check_keys(k, "optimizer.continuation",
                 {"delta", "p_min", "binariness_tol", "classify_tol", "tolerance", "max_iterations"});
      read(k, "delta", c.continuation.delta, "optimizer.continuation");
      read(k, "p_min", c.continuation.p_min, "optimizer.continuation");
      read(k, "binariness_tol", c.continuation.binariness_tol, "optimizer.continuation");
      read(k, "classify_tol", c.continuation.classify_tol, "optimizer.continuation");
      read(k, "tolerance", c.continuation.inner.tolerance, "optimizer.continuation");
      read(k, "max_iterations", c.continuation.inner.max_iterations, "optimizer.continuation");
    }
  }
  if (const auto s = root["sweep"]) {
    check_keys(s, "sweep", {"m0_max", "random_designs"});
    read(s, "m0_max", c.m0_max, "sweep");
    read(s, "random_designs", c.random_designs, "sweep");
  }
  if (const auto r = root["reconstruct"]) {
    check_keys(r, "reconstruct", {"m0", "noise_seeds"});
    read(r, "m0", c.reconstruct_m0, "reconstruct");
    read(r, "noise_seeds", c.noise_seeds, "reconstruct");
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void validate(const RunConfig& c) {
  const auto m = static_cast<Index>(c.domain.sensors.size());
  require(m >= 1, "at least one sensor is required");
  require(c.domain.mesh_size > 0.0, "domain.mesh_size must be positive");
  require(c.final_time > 0.0 && c.dt > 0.0 && c.dt <= c.final_time, "time.step must lie in (0, time.final]");
  require(c.alpha >= 0.0, "prior.alpha must be non-negative");
  require(c.robin_divisor > 0.0, "prior.robin_divisor must be positive");
  require(c.noise_samples >= 2, "noise.samples must be at least 2");
  require(c.noise_level > 0.0, "noise.level must be positive");
  require(c.lowrank.ratio_threshold > 0.0 && c.lowrank.ratio_threshold < 1.0,
          "lowrank.ratio_threshold must lie in (0, 1)");
  require(c.lowrank.rank_cap >= 1 && c.lowrank.block >= 1, "lowrank.rank_cap and lowrank.block must be positive");
  require(c.lowrank.oversample >= 2, "lowrank.oversample must be at least 2");
  require(c.lowrank.power_iterations >= 0, "lowrank.power_iterations must be non-negative");
  require(c.relaxed.tolerance > 0.0 && c.relaxed.max_iterations >= 1, "optimizer.relaxed settings must be positive");
  require(c.continuation.delta > 0.0 && c.continuation.delta < 1.0, "optimizer.continuation.delta must lie in (0, 1)");
  require(c.continuation.p_min > 0.0 && c.continuation.p_min < 1.0,
          "optimizer.continuation.p_min must lie in (0, 1)");
  require(c.continuation.binariness_tol > 0.0 && c.continuation.binariness_tol < 0.5,
          "optimizer.continuation.binariness_tol must lie in (0, 0.5)");
  require(c.continuation.classify_tol >= 0.0 && c.continuation.classify_tol < 0.5,
          "optimizer.continuation.classify_tol must lie in [0, 0.5)");
  require(c.m0_max >= 1 && c.m0_max <= m, "sweep.m0_max must lie in [1, number of sensors]");
  require(c.random_designs >= 1, "sweep.random_designs must be positive");
  require(c.reconstruct_m0 >= 1 && c.reconstruct_m0 <= c.m0_max, "reconstruct.m0 must lie in [1, sweep.m0_max]");
  require(c.noise_seeds >= 1, "reconstruct.noise_seeds must be positive");
  require(c.threads >= 0, "threads must be non-negative");
}

std::string factor_hash(const RunConfig& c) {
  std::ostringstream s;
  const auto rect = [&](const Rect& r) {
    s << format_double(r.x_min) << ',' << format_double(r.y_min) << ',' << format_double(r.x_max) << ','
      << format_double(r.y_max) << ';';
  };
  rect(c.domain.bounds);
  rect(c.domain.source_region);
  for (const auto& h : c.domain.holes) {
    s << "hole" << format_double(h.center.x()) << ',' << format_double(h.center.y()) << ','
      << format_double(h.radius) << ';';
  }
  for (const auto& p : c.domain.sensors) s << format_double(p.x()) << ',' << format_double(p.y()) << ';';
  s << "h" << format_double(c.domain.mesh_size) << ";T" << format_double(c.final_time) << ";dt"
    << format_double(c.dt) << ";alpha" << format_double(c.alpha) << ";robin" << format_double(c.robin_divisor)
    << ";samples" << c.noise_samples << ";level" << format_double(c.noise_level) << ";ratio"
    << format_double(c.lowrank.ratio_threshold) << ";cap" << c.lowrank.rank_cap << ";over" << c.lowrank.oversample
    << ";power" << c.lowrank.power_iterations << ";block" << c.lowrank.block << ";seed" << c.seed;
  return hash_text(s.str());
}

std::uint64_t sub_seed(std::uint64_t master, Purpose purpose, std::uint64_t stream) {
  std::vector<std::uint32_t> words;
  for (const auto v : {master, static_cast<std::uint64_t>(purpose), stream}) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

}  // namespace oedheat::app
