#pragma once

#include <filesystem>
#include <functional>
#include <span>

#include <Eigen/Dense>

#include "oedheat/geometry.hpp"
#include "oedheat/types.hpp"

namespace oedheat {

/// Diffusion coefficient of the room: 1 below the x2 = 0 line, growing as
/// 1 + 5 x2^5 + x2^3 above it.
double eval_diffusion(const Point& x);

using ScalarField = std::function<double(const Point&)>;

enum class CoefficientRule { edge_midpoint, centroid };

struct FemOperators {
  SparseMatrix mass;              // consistent, n x n
  Vector mass_lumped;             // row sums of `mass`
  SparseMatrix stiffness;         // diffusion with coefficient a(x), pure Neumann
  SparseMatrix observation;       // m x n, barycentric point evaluation
  SparseMatrix source_extension;  // n x n_S, extension by zero

  Index num_dofs() const { return mass.rows(); }
  Index num_source_dofs() const { return source_extension.cols(); }
  Index num_sensors() const { return observation.rows(); }
};

// Element matrices for a P1 triangle.
Eigen::Matrix3d p1_stiffness(const std::array<Point, 3>& corners, double coefficient);
Eigen::Matrix3d p1_mass(const std::array<Point, 3>& corners);

/// Maps mesh vertex ids to dof ids; -1 marks vertices without a dof.
using DofMap = std::vector<Index>;

DofMap identity_dofs(const Mesh& mesh);
DofMap source_dofs(const Mesh& mesh);

SparseMatrix assemble_stiffness(const Mesh& mesh, std::span<const Index> triangles, const DofMap& dofs,
                                Index num_dofs, const ScalarField& coefficient, CoefficientRule rule);
SparseMatrix assemble_mass(const Mesh& mesh, std::span<const Index> triangles, const DofMap& dofs,
                           Index num_dofs);
Vector lump(const SparseMatrix& mass);

/// 1D boundary mass over the given edges (vertex pairs).
SparseMatrix assemble_edge_mass(const Mesh& mesh, std::span<const std::array<Index, 2>> edges,
                                const DofMap& dofs, Index num_dofs);

/// Edges that belong to exactly one of the given triangles.
std::vector<std::array<Index, 2>> boundary_of(const Mesh& mesh, std::span<const Index> triangles);

SparseMatrix assemble_observation(const Mesh& mesh, std::span<const Point> sensors);

FemOperators assemble_all(const Mesh& mesh, std::span<const Point> sensors,
                          const ScalarField& diffusion = eval_diffusion,
                          CoefficientRule rule = CoefficientRule::edge_midpoint);

/// Coordinate text dump: one "row col value" line per stored entry.
void write_coo(const SparseMatrix& matrix, const std::filesystem::path& path);

}  // namespace oedheat
