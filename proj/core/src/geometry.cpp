#include "oedheat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "oedheat/csv.hpp"

namespace oedheat {

namespace {

constexpr double kGeomTol = 1e-12;

double distance_to_rect(const Point& p, const Rect& r) {
  const double dx = std::max({r.x_min - p.x(), 0.0, p.x() - r.x_max});
  const double dy = std::max({r.y_min - p.y(), 0.0, p.y() - r.y_max});
  return std::hypot(dx, dy);
}

void validate(const DomainSpec& spec) {
  if (!(spec.mesh_size > 0.0)) throw std::invalid_argument("mesh_size must be positive");
  const Rect& b = spec.bounds;
  if (!(b.width() > 0.0 && b.height() > 0.0)) throw std::invalid_argument("bounds have zero area");

  for (std::size_t i = 0; i < spec.holes.size(); ++i) {
    const Circle& h = spec.holes[i];
    if (!(h.radius > 0.0)) throw std::invalid_argument("hole " + std::to_string(i) + " has non-positive radius");
    if (h.center.x() - h.radius <= b.x_min || h.center.x() + h.radius >= b.x_max ||
        h.center.y() - h.radius <= b.y_min || h.center.y() + h.radius >= b.y_max) {
      throw std::invalid_argument("hole " + std::to_string(i) + " is not strictly inside the bounds");
    }
    for (std::size_t j = 0; j < i; ++j) {
      const Circle& o = spec.holes[j];
      if ((h.center - o.center).norm() <= h.radius + o.radius) {
        throw std::invalid_argument("holes " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
      }
    }
  }

  const Rect& s = spec.source_region;
  if (!(s.width() > 0.0 && s.height() > 0.0)) throw std::invalid_argument("source region has zero area");
  if (s.x_min < b.x_min - kGeomTol || s.x_max > b.x_max + kGeomTol || s.y_min < b.y_min - kGeomTol ||
      s.y_max > b.y_max + kGeomTol) {
    throw std::invalid_argument("source region extends outside the bounds");
  }
  for (std::size_t i = 0; i < spec.holes.size(); ++i) {
    if (distance_to_rect(spec.holes[i].center, s) <= spec.holes[i].radius) {
      throw std::invalid_argument("hole " + std::to_string(i) + " intersects the source region");
    }
  }
}

Point centroid(const std::array<Point, 3>& c) { return (c[0] + c[1] + c[2]) / 3.0; }

bool on_same_side(const Point& a, const Point& b, const Rect& r) {
  const double tx = 1e-9 * r.width();
  const double ty = 1e-9 * r.height();
  auto near = [](double u, double v, double t) { return std::abs(u - v) <= t; };
  return (near(a.x(), r.x_min, tx) && near(b.x(), r.x_min, tx)) ||
         (near(a.x(), r.x_max, tx) && near(b.x(), r.x_max, tx)) ||
         (near(a.y(), r.y_min, ty) && near(b.y(), r.y_min, ty)) ||
         (near(a.y(), r.y_max, ty) && near(b.y(), r.y_max, ty));
}

}  // namespace

bool Rect::contains(const Point& p, double tol) const {
  return p.x() >= x_min - tol && p.x() <= x_max + tol && p.y() >= y_min - tol && p.y() <= y_max + tol;
}

std::array<Point, 3> Mesh::corners(Index t) const {
  const auto& tri = triangles[static_cast<std::size_t>(t)];
  return {vertices[static_cast<std::size_t>(tri[0])], vertices[static_cast<std::size_t>(tri[1])],
          vertices[static_cast<std::size_t>(tri[2])]};
}

double Mesh::triangle_area(Index t) const {
  const auto c = corners(t);
  const Point e1 = c[1] - c[0];
  const Point e2 = c[2] - c[0];
  return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
}

double Mesh::total_area() const {
  double area = 0.0;
  for (Index t = 0; t < num_triangles(); ++t) area += triangle_area(t);
  return area;
}

double Mesh::max_edge_length() const {
  double longest = 0.0;
  for (Index t = 0; t < num_triangles(); ++t) {
    const auto c = corners(t);
    for (int e = 0; e < 3; ++e) longest = std::max(longest, (c[(e + 1) % 3] - c[e]).norm());
  }
  return longest;
}

Mesh build_mesh(const DomainSpec& spec) {
  validate(spec);
  const Rect& b = spec.bounds;
  const Index nx = std::max<Index>(1, static_cast<Index>(std::ceil(b.width() / spec.mesh_size - 1e-9)));
  const Index ny = std::max<Index>(1, static_cast<Index>(std::ceil(b.height() / spec.mesh_size - 1e-9)));

  std::vector<Point> grid;
  grid.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (Index j = 0; j <= ny; ++j) {
    for (Index i = 0; i <= nx; ++i) {
      // Pin the last row/column to the exact bounds.
      const double x = i == nx ? b.x_max : b.x_min + b.width() * static_cast<double>(i) / static_cast<double>(nx);
      const double y = j == ny ? b.y_max : b.y_min + b.height() * static_cast<double>(j) / static_cast<double>(ny);
      grid.emplace_back(x, y);
    }
  }
  auto id = [nx](Index i, Index j) { return j * (nx + 1) + i; };

  std::vector<std::array<Index, 3>> kept;
  std::vector<Index> removed_per_hole(spec.holes.size(), 0);
  auto push = [&](std::array<Index, 3> tri) {
    const Point c = centroid({grid[tri[0]], grid[tri[1]], grid[tri[2]]});
    for (std::size_t h = 0; h < spec.holes.size(); ++h) {
      if (spec.holes[h].contains(c)) {
        ++removed_per_hole[h];
        return;
      }
    }
    kept.push_back(tri);
  };
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      const Index a = id(i, j), bb = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if ((i + j) % 2 == 0) {
        push({a, bb, c});
        push({a, c, d});
      } else {
        push({a, bb, d});
        push({bb, c, d});
      }
    }
  }
  for (std::size_t h = 0; h < spec.holes.size(); ++h) {
    if (removed_per_hole[h] == 0) {
      throw std::invalid_argument("hole " + std::to_string(h) + " is smaller than the mesh resolution");
    }
  }

  // Drop vertices that lost all their triangles; survivors keep grid order.
  std::vector<Index> renumber(grid.size(), -1);
  for (const auto& tri : kept) {
    for (Index v : tri) renumber[static_cast<std::size_t>(v)] = 0;
  }
  Mesh mesh;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (renumber[k] < 0) continue;
    renumber[k] = static_cast<Index>(mesh.vertices.size());
    mesh.vertices.push_back(grid[k]);
  }
  for (auto tri : kept) {
    for (Index& v : tri) v = renumber[static_cast<std::size_t>(v)];
    mesh.triangles.push_back(tri);
  }

  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    if (!(mesh.triangle_area(t) > 0.0)) throw std::logic_error("mesh generator produced a degenerate triangle");
  }

  // Boundary edges: edges owned by a single triangle, kept in triangle orientation.
  std::map<std::pair<Index, Index>, std::pair<int, std::array<Index, 2>>> edges;
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const Index u = tri[e], v = tri[(e + 1) % 3];
      auto& entry = edges[{std::min(u, v), std::max(u, v)}];
      ++entry.first;
      entry.second = {u, v};
    }
  }
  for (const auto& [key, entry] : edges) {
    if (entry.first != 1) continue;
    const auto [u, v] = entry.second;
    const bool exterior = on_same_side(mesh.vertices[static_cast<std::size_t>(u)],
                                       mesh.vertices[static_cast<std::size_t>(v)], b);
    mesh.boundary_edges.push_back({{u, v}, exterior ? BoundaryTag::exterior : BoundaryTag::hole});
  }

  std::vector<char> in_source(mesh.vertices.size(), 0);
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    if (spec.source_region.contains(centroid(mesh.corners(t)))) {
      mesh.source_triangles.push_back(t);
      for (Index v : mesh.triangles[static_cast<std::size_t>(t)]) in_source[static_cast<std::size_t>(v)] = 1;
    }
  }
  for (std::size_t v = 0; v < in_source.size(); ++v) {
    if (in_source[v]) mesh.source_vertices.push_back(static_cast<Index>(v));
  }
  if (mesh.source_vertices.empty()) throw std::invalid_argument("source region contains no mesh triangles");
  if (!is_connected(mesh)) throw std::invalid_argument("holes disconnect the domain");

  for (std::size_t k = 0; k < spec.sensors.size(); ++k) {
    const Point& p = spec.sensors[k];
    std::ostringstream where;
    where << "sensor " << k << " at (" << p.x() << ", " << p.y() << ")";
    if (spec.source_region.contains(p)) throw std::invalid_argument(where.str() + " lies in the source region");
    if (!locate_point(mesh, p)) throw std::invalid_argument(where.str() + " lies outside the meshed domain");
  }
  return mesh;
}

std::optional<PointLocation> locate_point(const Mesh& mesh, const Point& x) {
  constexpr double tol = 1e-12;
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto c = mesh.corners(t);
    const double area2 = 2.0 * mesh.triangle_area(t);
    auto cross = [](const Point& a, const Point& b, const Point& p) {
      return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    };
    Eigen::Vector3d lambda(cross(c[1], c[2], x) / area2, cross(c[2], c[0], x) / area2,
                           cross(c[0], c[1], x) / area2);
    if (lambda.minCoeff() < -tol) continue;
    lambda = lambda.cwiseMax(0.0);
    lambda /= lambda.sum();
    return PointLocation{t, lambda};
  }
  return std::nullopt;
}

std::vector<Point> sensor_grid(double x0, double x1, Index nx, double y0, double y1, Index ny) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("sensor grid needs at least one point per axis");
  auto coord = [](double a, double b, Index n, Index i) {
    return n == 1 ? 0.5 * (a + b) : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  std::vector<Point> points;
  points.reserve(static_cast<std::size_t>(nx * ny));
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) points.emplace_back(coord(x0, x1, nx, i), coord(y0, y1, ny, j));
  }
  return points;
}

bool is_connected(const Mesh& mesh) {
  const auto n = static_cast<std::size_t>(mesh.num_vertices());
  if (n == 0) return false;
  std::vector<std::vector<Index>> adjacency(n);
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      adjacency[static_cast<std::size_t>(tri[e])].push_back(tri[(e + 1) % 3]);
      adjacency[static_cast<std::size_t>(tri[(e + 1) % 3])].push_back(tri[e]);
    }
  }
  std::vector<char> seen(n, 0);
  std::queue<Index> queue;
  queue.push(0);
  seen[0] = 1;
  std::size_t visited = 1;
  while (!queue.empty()) {
    const Index v = queue.front();
    queue.pop();
    for (Index u : adjacency[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(u)]) {
        seen[static_cast<std::size_t>(u)] = 1;
        ++visited;
        queue.push(u);
      }
    }
  }
  return visited == n;
}

void write_mesh_csv(const Mesh& mesh, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream vertices(dir / "vertices.csv");
  vertices << "id,x,y\n";
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const Point& p = mesh.vertices[static_cast<std::size_t>(v)];
    vertices << v << ',' << format_double(p.x()) << ',' << format_double(p.y()) << '\n';
  }
  std::ofstream triangles(dir / "triangles.csv");
  triangles << "id,v0,v1,v2\n";
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    triangles << t << ',' << tri[0] << ',' << tri[1] << ',' << tri[2] << '\n';
  }
  if (!vertices || !triangles) throw std::runtime_error("failed to write mesh CSV into " + dir.string());
}

}  // namespace oedheat
