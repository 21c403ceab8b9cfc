#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include "oedheat/csv.hpp"
#include "oedheat/lowrank.hpp"

namespace oedheat {

namespace {

constexpr const char* kMagic = "oedheat-factor";
constexpr int kVersion = 1;

struct Fnv1a {
  std::uint64_t state = 1469598103934665603ULL;
  void bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state ^= p[i];
      state *= 1099511628211ULL;
    }
  }
};

std::uint64_t checksum(const LowRankFactor& f) {
  Fnv1a h;
  for (const Matrix* m : {&f.Q, &f.R, &f.C}) {
    const Index dims[2] = {m->rows(), m->cols()};
    h.bytes(dims, sizeof(dims));
    h.bytes(m->data(), sizeof(double) * static_cast<std::size_t>(m->size()));
  }
  h.bytes(f.sigma.data(), sizeof(double) * static_cast<std::size_t>(f.sigma.size()));
  h.bytes(&f.prior_trace, sizeof(double));
  return h.state;
}

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << v;
  return out.str();
}

void write_array(const std::filesystem::path& path, const Matrix& m) {
  static_assert(std::endian::native == std::endian::little, "factor files are little-endian");
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

bool read_array(const std::filesystem::path& path, Matrix& m, Index rows, Index cols) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) return false;
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != sizeof(double) * static_cast<std::size_t>(rows * cols)) return false;
  in.seekg(0);
  m.resize(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(bytes));
  return static_cast<bool>(in);
}

}  // namespace

void save_factor(const std::filesystem::path& dir, const LowRankFactor& factor, const FactorMetadata& meta) {
  std::filesystem::create_directories(dir);
  write_array(dir / "Q.bin", factor.Q);
  write_array(dir / "R.bin", factor.R);
  write_array(dir / "C.bin", factor.C);

  std::ofstream out(dir / "factor.txt");
  out << kMagic << ' ' << kVersion << '\n';
  out << "config_hash " << meta.config_hash << '\n';
  out << "seed " << meta.seed << '\n';
  out << "ratio_threshold " << format_double(meta.ratio_threshold) << '\n';
  out << "noise_variance " << format_double(meta.noise_variance) << '\n';
  out << "source_dofs " << factor.Q.rows() << '\n';
  out << "rank " << factor.rank() << '\n';
  out << "sensors " << factor.num_sensors() << '\n';
  out << "collapsed " << (factor.collapsed ? 1 : 0) << '\n';
  out << "prior_trace " << format_double(factor.prior_trace) << '\n';
  out << "sigma";
  for (Index i = 0; i < factor.sigma.size(); ++i) out << ' ' << format_double(factor.sigma(i));
  out << '\n';
  out << "checksum " << hex(checksum(factor)) << '\n';
  if (!out) throw std::runtime_error("failed to write factor header in " + dir.string());
}

std::optional<LoadedFactor> load_factor(const std::filesystem::path& dir) {
  std::ifstream in(dir / "factor.txt");
  if (!in) return std::nullopt;
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic || version != kVersion) return std::nullopt;

  std::map<std::string, std::string> fields;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto space = line.find(' ');
    if (space == std::string::npos) {
      fields[line] = "";
    } else {
      fields[line.substr(0, space)] = line.substr(space + 1);
    }
  }
  try {
    LoadedFactor loaded;
    loaded.meta.config_hash = fields.at("config_hash");
    loaded.meta.seed = std::stoull(fields.at("seed"));
    loaded.meta.ratio_threshold = parse_csv_numbers(fields.at("ratio_threshold")).at(0);
    loaded.meta.noise_variance = parse_csv_numbers(fields.at("noise_variance")).at(0);
    const Index n = std::stol(fields.at("source_dofs"));
    const Index rank = std::stol(fields.at("rank"));
    const Index m = std::stol(fields.at("sensors"));
    LowRankFactor& f = loaded.factor;
    f.collapsed = fields.at("collapsed") == "1";
    f.prior_trace = parse_csv_numbers(fields.at("prior_trace")).at(0);
    std::string sigma = fields.at("sigma");
    for (char& c : sigma) {
      if (c == ' ') c = ',';
    }
    const auto values = parse_csv_numbers(sigma);
    if (static_cast<Index>(values.size()) != rank) return std::nullopt;
    f.sigma = Eigen::Map<const Vector>(values.data(), rank);
    if (!read_array(dir / "Q.bin", f.Q, n, rank) || !read_array(dir / "R.bin", f.R, rank, m) ||
        !read_array(dir / "C.bin", f.C, rank, rank)) {
      return std::nullopt;
    }
    if (hex(checksum(f)) != fields.at("checksum")) return std::nullopt;
    finalize_prior_projection(f);
    return loaded;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace oedheat
