#pragma once

#include <filesystem>
#include <memory>

#include <Eigen/SparseCholesky>

#include "oedheat/assembly.hpp"
#include "oedheat/types.hpp"

namespace oedheat {

struct TimeGrid {
  double final_time = 1.0;
  double dt = 1e-2;
  Index steps = 100;

  /// Throws std::invalid_argument unless final_time is an integer multiple
  /// of dt (to 1e-12).
  static TimeGrid make(double final_time, double dt);
};

/// Implicit Euler discretisation of u' - div(a grad u) = s, u(0) = 0, with
/// homogeneous Neumann data. The source is constant in time and supported on
/// the source dofs.
///
/// `forward` maps source coefficients to the m sensor readings of the final
/// state. `adjoint` is its exact discrete transpose: for all s and g,
/// g . forward(s) == s . adjoint(g) up to rounding. The factorisation of
/// (M + dt K) is shared by every solve; instances are immutable and may be
/// used from several threads at once.
class HeatWorkspace {
 public:
  HeatWorkspace(std::shared_ptr<const FemOperators> operators, TimeGrid grid);

  Vector final_state(const Vector& source) const;
  Matrix final_state(const Matrix& sources) const;

  Vector forward(const Vector& source) const;
  Matrix forward(const Matrix& sources) const;

  Vector adjoint(const Vector& data) const;
  Matrix adjoint(const Matrix& data) const;

  /// Dense m x n_S matrix of the forward map, built from m adjoint solves.
  Matrix forward_matrix() const;

  const FemOperators& operators() const { return *ops_; }
  const TimeGrid& time_grid() const { return grid_; }
  Index num_sensors() const { return ops_->num_sensors(); }
  Index num_source_dofs() const { return ops_->num_source_dofs(); }

 private:
  using Factorization = Eigen::SimplicialLDLT<SparseMatrix>;

  std::shared_ptr<const FemOperators> ops_;
  TimeGrid grid_;
  std::shared_ptr<const Factorization> system_;
  SparseMatrix load_;  // dt * M * E_S
};

/// Writes a nodal field as CSV with columns id,x,y,value. `vertex_ids`
/// selects which mesh vertices the values belong to (all when empty).
void write_field_csv(const std::filesystem::path& path, const Mesh& mesh, const Vector& values,
                     std::span<const Index> vertex_ids = {});

}  // namespace oedheat
