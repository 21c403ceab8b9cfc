#include "oedheat/heat_solver.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "oedheat/csv.hpp"

namespace oedheat {

TimeGrid TimeGrid::make(double final_time, double dt) {
  if (!(dt > 0.0) || !(final_time > 0.0)) throw std::invalid_argument("final time and dt must be positive");
  const auto steps = static_cast<Index>(std::llround(final_time / dt));
  if (steps < 1 || std::abs(static_cast<double>(steps) * dt - final_time) > 1e-12) {
    throw std::invalid_argument("final time is not an integer multiple of dt");
  }
  return TimeGrid{final_time, dt, steps};
}

HeatWorkspace::HeatWorkspace(std::shared_ptr<const FemOperators> operators, TimeGrid grid)
    : ops_(std::move(operators)), grid_(grid) {
  if (!ops_) throw std::invalid_argument("HeatWorkspace needs assembled operators");
  const SparseMatrix system = ops_->mass + grid_.dt * ops_->stiffness;
  auto factorization = std::make_shared<Factorization>(system);
  if (factorization->info() != Eigen::Success) throw std::runtime_error("factorisation of M + dt K failed");
  system_ = std::move(factorization);
  load_ = grid_.dt * (ops_->mass * ops_->source_extension);
}

Matrix HeatWorkspace::final_state(const Matrix& sources) const {
  if (sources.rows() != num_source_dofs()) throw std::invalid_argument("source has wrong dimension");
  const Matrix load = load_ * sources;
  Matrix u = Matrix::Zero(ops_->num_dofs(), sources.cols());
  for (Index step = 0; step < grid_.steps; ++step) {
    const Matrix rhs = ops_->mass * u + load;
    u = system_->solve(rhs);
  }
  return u;
}

Vector HeatWorkspace::final_state(const Vector& source) const {
  return final_state(Matrix(source)).col(0);
}

Matrix HeatWorkspace::forward(const Matrix& sources) const { return ops_->observation * final_state(sources); }

Vector HeatWorkspace::forward(const Vector& source) const { return forward(Matrix(source)).col(0); }

Matrix HeatWorkspace::adjoint(const Matrix& data) const {
  if (data.rows() != num_sensors()) throw std::invalid_argument("data has wrong dimension");
  // Transpose of the forward recurrence; M and M + dt K are symmetric.
  Matrix v = ops_->observation.transpose() * data;
  Matrix accumulated = Matrix::Zero(ops_->num_dofs(), data.cols());
  for (Index step = 0; step < grid_.steps; ++step) {
    const Matrix p = system_->solve(v);
    v = ops_->mass * p;
    accumulated += grid_.dt * v;
  }
  return ops_->source_extension.transpose() * accumulated;
}

Vector HeatWorkspace::adjoint(const Vector& data) const { return adjoint(Matrix(data)).col(0); }

Matrix HeatWorkspace::forward_matrix() const {
  return adjoint(Matrix(Matrix::Identity(num_sensors(), num_sensors()))).transpose();
}

void write_field_csv(const std::filesystem::path& path, const Mesh& mesh, const Vector& values,
                     std::span<const Index> vertex_ids) {
  const bool all = vertex_ids.empty();
  const Index count = all ? mesh.num_vertices() : static_cast<Index>(vertex_ids.size());
  if (values.size() != count) throw std::invalid_argument("field size does not match vertex selection");
  std::ofstream out(path);
  out << "id,x,y,value\n";
  for (Index k = 0; k < count; ++k) {
    const Index v = all ? k : vertex_ids[static_cast<std::size_t>(k)];
    const Point& p = mesh.vertices[static_cast<std::size_t>(v)];
    out << v << ',' << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(values(k))
        << '\n';
  }
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

}  // namespace oedheat
