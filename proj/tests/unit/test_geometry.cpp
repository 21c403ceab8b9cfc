#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "oedheat/geometry.hpp"

namespace oedheat {
namespace {

// Shoelace over the oriented boundary edges: outer loop counter-clockwise,
// hole loops clockwise, so the sum is the polygonal area.
double boundary_area(const Mesh& mesh) {
  double twice = 0.0;
  for (const auto& e : mesh.boundary_edges) {
    const Point& a = mesh.vertices[static_cast<std::size_t>(e.vertices[0])];
    const Point& b = mesh.vertices[static_cast<std::size_t>(e.vertices[1])];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

TEST(BuildMesh, CoarseSquareCoversArea) {
  DomainSpec spec;
  spec.mesh_size = 1.0;
  const Mesh mesh = build_mesh(spec);
  EXPECT_GE(mesh.num_triangles(), 2);
  EXPECT_NEAR(mesh.total_area(), 4.0, 1e-12);
}

TEST(BuildMesh, CircularHoleAreaWithinTwoPercent) {
  DomainSpec spec;
  spec.mesh_size = 0.05;
  spec.holes.push_back({Point(0.0, 0.0), 0.2});
  spec.source_region = {-1.0, -1.0, -0.5, 1.0};
  const Mesh mesh = build_mesh(spec);
  const double expected = 4.0 - std::numbers::pi * 0.04;
  EXPECT_NEAR(mesh.total_area(), expected, 0.02 * expected);
}

TEST(BuildMesh, Invariants) {
  const DomainSpec spec = testing::small_domain(0.1);
  const Mesh mesh = build_mesh(spec);

  for (Index t = 0; t < mesh.num_triangles(); ++t) EXPECT_GT(mesh.triangle_area(t), 0.0);
  EXPECT_NEAR(mesh.total_area(), boundary_area(mesh), 1e-10 * mesh.total_area());
  EXPECT_LE(mesh.max_edge_length(), 2.0 * spec.mesh_size);
  EXPECT_FALSE(mesh.source_vertices.empty());
  EXPECT_TRUE(is_connected(mesh));

  std::vector<int> uses(static_cast<std::size_t>(mesh.num_vertices()), 0);
  for (const auto& tri : mesh.triangles)
    for (Index v : tri) ++uses[static_cast<std::size_t>(v)];
  for (int u : uses) EXPECT_GE(u, 1);

  // Closed loops: every boundary vertex has as many outgoing as incoming edges.
  std::map<Index, int> balance;
  bool has_hole_edge = false;
  for (const auto& e : mesh.boundary_edges) {
    ++balance[e.vertices[0]];
    --balance[e.vertices[1]];
    has_hole_edge |= e.tag == BoundaryTag::hole;
  }
  for (const auto& [v, b] : balance) EXPECT_EQ(b, 0) << "vertex " << v;
  EXPECT_TRUE(has_hole_edge);

  for (Index v : mesh.source_vertices) {
    EXPECT_TRUE(spec.source_region.contains(mesh.vertices[static_cast<std::size_t>(v)], 1e-12));
  }
}

TEST(BuildMesh, DefaultRoomLocatesEverySensor) {
  DomainSpec spec;
  spec.mesh_size = 1.0 / 12.0;
  spec.holes = {{Point(0.7, 0.5), 0.2}, {Point(0.7, -0.5), 0.2}};
  spec.sensors = sensor_grid(-0.4, 0.4, 10, -0.9, 0.9, 10);
  const Mesh mesh = build_mesh(spec);
  ASSERT_EQ(spec.sensors.size(), 100u);
  for (const Point& p : spec.sensors) EXPECT_TRUE(locate_point(mesh, p).has_value());
}

TEST(BuildMesh, RejectsDegenerateGeometry) {
  DomainSpec base;
  base.mesh_size = 0.1;

  DomainSpec outside = base;
  outside.holes.push_back({Point(0.95, 0.0), 0.1});
  EXPECT_THROW(build_mesh(outside), std::invalid_argument);

  DomainSpec overlap = base;
  overlap.holes = {{Point(0.3, 0.0), 0.2}, {Point(0.5, 0.0), 0.2}};
  EXPECT_THROW(build_mesh(overlap), std::invalid_argument);

  DomainSpec in_source = base;
  in_source.holes.push_back({Point(-0.6, 0.0), 0.2});
  EXPECT_THROW(build_mesh(in_source), std::invalid_argument);

  DomainSpec no_size = base;
  no_size.mesh_size = 0.0;
  EXPECT_THROW(build_mesh(no_size), std::invalid_argument);

  DomainSpec sensor_in_source = base;
  sensor_in_source.sensors.push_back(Point(-0.8, 0.0));
  EXPECT_THROW(build_mesh(sensor_in_source), std::invalid_argument);

  DomainSpec sensor_in_hole = base;
  sensor_in_hole.holes.push_back({Point(0.5, 0.0), 0.3});
  sensor_in_hole.sensors.push_back(Point(0.5, 0.0));
  EXPECT_THROW(build_mesh(sensor_in_hole), std::invalid_argument);
}

TEST(LocatePoint, VertexAndCentroid) {
  const Mesh mesh = build_mesh(testing::small_domain(0.25));
  const Index t = mesh.num_triangles() / 2;
  const auto corners = mesh.corners(t);

  const auto at_vertex = locate_point(mesh, corners[1]);
  ASSERT_TRUE(at_vertex);
  const auto& tri = mesh.triangles[static_cast<std::size_t>(at_vertex->triangle)];
  const Index target = mesh.triangles[static_cast<std::size_t>(t)][1];
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(at_vertex->barycentric(i), tri[i] == target ? 1.0 : 0.0);

  const auto at_centroid = locate_point(mesh, (corners[0] + corners[1] + corners[2]) / 3.0);
  ASSERT_TRUE(at_centroid);
  EXPECT_EQ(at_centroid->triangle, t);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(at_centroid->barycentric(i), 1.0 / 3.0, 1e-12);
}

TEST(LocatePoint, RoundTripRandomPoints) {
  const Mesh mesh = build_mesh(testing::small_domain(0.2));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int located = 0;
  for (int i = 0; i < 500; ++i) {
    const Point x(u(rng), u(rng));
    const auto loc = locate_point(mesh, x);
    if (!loc) continue;
    ++located;
    EXPECT_GE(loc->barycentric.minCoeff(), 0.0);
    EXPECT_NEAR(loc->barycentric.sum(), 1.0, 1e-12);
    const auto c = mesh.corners(loc->triangle);
    const Point back = loc->barycentric(0) * c[0] + loc->barycentric(1) * c[1] + loc->barycentric(2) * c[2];
    EXPECT_LE((back - x).norm(), 1e-10);
  }
  EXPECT_GT(located, 400);
}

TEST(LocatePoint, OutsideIsNotFound) {
  const Mesh mesh = build_mesh(testing::small_domain(0.2));
  EXPECT_FALSE(locate_point(mesh, Point(1.5, 0.0)));
  EXPECT_FALSE(locate_point(mesh, Point(0.65, 0.0)));  // rod centre
}

}  // namespace
}  // namespace oedheat
