#include "oedheat/assembly.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "oedheat/csv.hpp"

namespace oedheat {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

double checked_area(const std::array<Point, 3>& c, Index element) {
  const Point e1 = c[1] - c[0];
  const Point e2 = c[2] - c[0];
  const double area = 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  if (!(area > 0.0)) {
    throw std::invalid_argument("singular or inverted element " + std::to_string(element));
  }
  return area;
}

double sample_coefficient(const std::array<Point, 3>& c, const ScalarField& coefficient, CoefficientRule rule) {
  if (rule == CoefficientRule::centroid) return coefficient((c[0] + c[1] + c[2]) / 3.0);
  return (coefficient(0.5 * (c[0] + c[1])) + coefficient(0.5 * (c[1] + c[2])) + coefficient(0.5 * (c[2] + c[0]))) /
         3.0;
}

void scatter(Triplets& out, const Eigen::Matrix3d& local, const std::array<Index, 3>& tri, const DofMap& dofs) {
  for (int i = 0; i < 3; ++i) {
    const Index row = dofs[static_cast<std::size_t>(tri[i])];
    if (row < 0) continue;
    for (int j = 0; j < 3; ++j) {
      const Index col = dofs[static_cast<std::size_t>(tri[j])];
      if (col >= 0) out.emplace_back(row, col, local(i, j));
    }
  }
}

SparseMatrix from_triplets(Index rows, Index cols, const Triplets& triplets) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

}  // namespace

double eval_diffusion(const Point& x) {
  const double y = x.y();
  if (y < 0.0) return 1.0;
  return 1.0 + 5.0 * std::pow(y, 5) + std::pow(y, 3);
}

Eigen::Matrix3d p1_stiffness(const std::array<Point, 3>& c, double coefficient) {
  const double area = checked_area(c, -1);
  Eigen::Matrix<double, 2, 3> grad;
  for (int i = 0; i < 3; ++i) {
    const Point& a = c[(i + 1) % 3];
    const Point& b = c[(i + 2) % 3];
    grad.col(i) << a.y() - b.y(), b.x() - a.x();
  }
  grad /= 2.0 * area;
  return coefficient * area * grad.transpose() * grad;
}

Eigen::Matrix3d p1_mass(const std::array<Point, 3>& c) {
  const double area = checked_area(c, -1);
  Eigen::Matrix3d local = Eigen::Matrix3d::Constant(1.0);
  local.diagonal().setConstant(2.0);
  return (area / 12.0) * local;
}

DofMap identity_dofs(const Mesh& mesh) {
  DofMap dofs(static_cast<std::size_t>(mesh.num_vertices()));
  std::iota(dofs.begin(), dofs.end(), Index{0});
  return dofs;
}

DofMap source_dofs(const Mesh& mesh) {
  DofMap dofs(static_cast<std::size_t>(mesh.num_vertices()), -1);
  for (std::size_t k = 0; k < mesh.source_vertices.size(); ++k) {
    dofs[static_cast<std::size_t>(mesh.source_vertices[k])] = static_cast<Index>(k);
  }
  return dofs;
}

SparseMatrix assemble_stiffness(const Mesh& mesh, std::span<const Index> triangles, const DofMap& dofs,
                                Index num_dofs, const ScalarField& coefficient, CoefficientRule rule) {
  Triplets triplets;
  triplets.reserve(9 * triangles.size());
  for (Index t : triangles) {
    const auto c = mesh.corners(t);
    checked_area(c, t);
    scatter(triplets, p1_stiffness(c, sample_coefficient(c, coefficient, rule)),
            mesh.triangles[static_cast<std::size_t>(t)], dofs);
  }
  return from_triplets(num_dofs, num_dofs, triplets);
}

SparseMatrix assemble_mass(const Mesh& mesh, std::span<const Index> triangles, const DofMap& dofs,
                           Index num_dofs) {
  Triplets triplets;
  triplets.reserve(9 * triangles.size());
  for (Index t : triangles) {
    const auto c = mesh.corners(t);
    checked_area(c, t);
    scatter(triplets, p1_mass(c), mesh.triangles[static_cast<std::size_t>(t)], dofs);
  }
  return from_triplets(num_dofs, num_dofs, triplets);
}

Vector lump(const SparseMatrix& mass) {
  Vector lumped = Vector::Zero(mass.rows());
  for (Index k = 0; k < mass.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(mass, k); it; ++it) lumped(it.row()) += it.value();
  }
  return lumped;
}

SparseMatrix assemble_edge_mass(const Mesh& mesh, std::span<const std::array<Index, 2>> edges,
                                const DofMap& dofs, Index num_dofs) {
  Triplets triplets;
  triplets.reserve(4 * edges.size());
  for (const auto& e : edges) {
    const double length =
        (mesh.vertices[static_cast<std::size_t>(e[1])] - mesh.vertices[static_cast<std::size_t>(e[0])]).norm();
    for (int i = 0; i < 2; ++i) {
      const Index row = dofs[static_cast<std::size_t>(e[i])];
      if (row < 0) continue;
      for (int j = 0; j < 2; ++j) {
        const Index col = dofs[static_cast<std::size_t>(e[j])];
        if (col >= 0) triplets.emplace_back(row, col, length / 6.0 * (i == j ? 2.0 : 1.0));
      }
    }
  }
  return from_triplets(num_dofs, num_dofs, triplets);
}

std::vector<std::array<Index, 2>> boundary_of(const Mesh& mesh, std::span<const Index> triangles) {
  std::map<std::pair<Index, Index>, std::pair<int, std::array<Index, 2>>> count;
  for (Index t : triangles) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    for (int e = 0; e < 3; ++e) {
      const Index u = tri[e], v = tri[(e + 1) % 3];
      auto& entry = count[{std::min(u, v), std::max(u, v)}];
      ++entry.first;
      entry.second = {u, v};
    }
  }
  std::vector<std::array<Index, 2>> edges;
  for (const auto& [key, entry] : count) {
    if (entry.first == 1) edges.push_back(entry.second);
  }
  return edges;
}

SparseMatrix assemble_observation(const Mesh& mesh, std::span<const Point> sensors) {
  Triplets triplets;
  triplets.reserve(3 * sensors.size());
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    const auto location = locate_point(mesh, sensors[k]);
    if (!location) {
      std::ostringstream msg;
      msg << "sensor " << k << " at (" << sensors[k].x() << ", " << sensors[k].y()
          << ") is outside the meshed domain";
      throw std::invalid_argument(msg.str());
    }
    const auto& tri = mesh.triangles[static_cast<std::size_t>(location->triangle)];
    for (int i = 0; i < 3; ++i) {
      if (location->barycentric(i) != 0.0) triplets.emplace_back(static_cast<Index>(k), tri[i], location->barycentric(i));
    }
  }
  return from_triplets(static_cast<Index>(sensors.size()), mesh.num_vertices(), triplets);
}

FemOperators assemble_all(const Mesh& mesh, std::span<const Point> sensors, const ScalarField& diffusion,
                          CoefficientRule rule) {
  std::vector<Index> all(static_cast<std::size_t>(mesh.num_triangles()));
  std::iota(all.begin(), all.end(), Index{0});
  const DofMap dofs = identity_dofs(mesh);
  const Index n = mesh.num_vertices();

  FemOperators ops;
  ops.mass = assemble_mass(mesh, all, dofs, n);
  ops.mass_lumped = lump(ops.mass);
  ops.stiffness = assemble_stiffness(mesh, all, dofs, n, diffusion, rule);
  ops.observation = assemble_observation(mesh, sensors);

  Triplets ext;
  for (std::size_t k = 0; k < mesh.source_vertices.size(); ++k) {
    ext.emplace_back(mesh.source_vertices[k], static_cast<Index>(k), 1.0);
  }
  ops.source_extension = from_triplets(n, mesh.num_source_dofs(), ext);
  return ops;
}

void write_coo(const SparseMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path);
  for (Index k = 0; k < matrix.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(matrix, k); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << format_double(it.value()) << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

}  // namespace oedheat
