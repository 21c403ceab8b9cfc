#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "oedheat/types.hpp"

namespace oedheat {

struct Rect {
  double x_min = -1.0;
  double y_min = -1.0;
  double x_max = 1.0;
  double y_max = 1.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  // Closed containment, widened by `tol`.
  bool contains(const Point& p, double tol = 0.0) const;
};

struct Circle {
  Point center = Point::Zero();
  double radius = 0.0;

  bool contains(const Point& p) const { return (p - center).squaredNorm() < radius * radius; }
};

/// Geometry of the room: bounding rectangle minus circular rods, the source
/// subdomain and the candidate sensor locations.
struct DomainSpec {
  Rect bounds;
  std::vector<Circle> holes;
  Rect source_region{-1.0, -1.0, -0.5, 1.0};
  std::vector<Point> sensors;
  double mesh_size = 0.1;
};

enum class BoundaryTag { exterior, hole };

struct BoundaryEdge {
  std::array<Index, 2> vertices;  // oriented as in the owning triangle
  BoundaryTag tag;
};

/// P1 triangulation. Immutable after build_mesh().
struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<Index, 3>> triangles;  // counter-clockwise
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<Index> source_triangles;  // triangles whose centroid lies in the source region
  std::vector<Index> source_vertices;   // sorted vertex ids of the source triangles

  Index num_vertices() const { return static_cast<Index>(vertices.size()); }
  Index num_triangles() const { return static_cast<Index>(triangles.size()); }
  Index num_source_dofs() const { return static_cast<Index>(source_vertices.size()); }

  std::array<Point, 3> corners(Index t) const;
  // Signed area (positive for counter-clockwise triangles).
  double triangle_area(Index t) const;
  double total_area() const;
  double max_edge_length() const;
};

/// Triangulates the domain by splitting a structured grid of cells of size
/// <= mesh_size and removing triangles whose centroid lies inside a hole.
/// Throws std::invalid_argument on degenerate geometry.
Mesh build_mesh(const DomainSpec& spec);

struct PointLocation {
  Index triangle = -1;
  Eigen::Vector3d barycentric = Eigen::Vector3d::Zero();
};

/// Returns the containing triangle and barycentric coordinates, or nullopt
/// when `x` is outside the meshed domain.
std::optional<PointLocation> locate_point(const Mesh& mesh, const Point& x);

/// Regular nx-by-ny lattice of points spanning [x0,x1] x [y0,y1].
std::vector<Point> sensor_grid(double x0, double x1, Index nx, double y0, double y1, Index ny);

bool is_connected(const Mesh& mesh);

/// Writes vertices.csv (id,x,y) and triangles.csv (id,v0,v1,v2) into `dir`.
void write_mesh_csv(const Mesh& mesh, const std::filesystem::path& dir);

}  // namespace oedheat
