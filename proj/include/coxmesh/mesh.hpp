#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "coxmesh/geo.hpp"

namespace coxmesh {

/// Triangulation of the domain plus its buffer ring. Triangles are
/// counter-clockwise.
struct Mesh {
  std::vector<PlanarPoint> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::uint8_t> boundary;  // 1 for vertices on the meshed region's boundary

  std::size_t n_vertices() const { return vertices.size(); }
  std::size_t n_triangles() const { return triangles.size(); }
  double triangle_area(std::size_t t) const;
  double total_area() const;
};

struct MeshOptions {
  double inner_res = 5.0;        // target edge length inside the domain, km
  double outer_extension = 0.0;  // buffer ring width, km
  double outer_res = 0.0;        // buffer edge length; 0 picks 4 * inner_res
  double grading = 0.5;          // growth of the edge length per km away from the domain
  double min_angle_deg = 25.0;
  std::size_t max_vertices = 2'000'000;
};

/// Conforming Delaunay refinement of the domain (and the convex-hull buffer
/// ring when outer_extension > 0). Deterministic in its inputs.
Mesh build_mesh(const DomainPolygon& domain, const MeshOptions& options);

struct MeshQuality {
  double min_angle_deg = 0.0;
  double min_edge = 0.0;
  double max_edge = 0.0;
};
MeshQuality mesh_quality(const Mesh& mesh);

/// Voronoi cell area of each vertex, clipped to the domain (km^2).
struct DualWeights {
  std::vector<double> w;
  double total() const;
};

DualWeights dual_weights(const Mesh& mesh, const DomainPolygon& domain);

/// Bucketed point location over the mesh triangles.
class TriangleLocator {
 public:
  explicit TriangleLocator(const Mesh& mesh);

  struct Hit {
    int triangle = -1;
    std::array<double, 3> bary{};
  };
  std::optional<Hit> locate(PlanarPoint p) const;

 private:
  const Mesh* mesh_;
  double x0_ = 0, y0_ = 0, cell_ = 1;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

/// Piecewise-linear interpolation operator: row i holds the barycentric
/// coordinates of point i in its containing triangle.
struct Projector {
  std::size_t n_vertices = 0;
  std::vector<std::array<int, 3>> index;
  std::vector<std::array<double, 3>> weight;

  std::size_t n_points() const { return index.size(); }
  double apply_row(std::size_t i, std::span<const double> field) const;
  std::vector<double> apply(std::span<const double> field) const;
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix() const;
};

/// Throws a data error listing the indices of points outside the mesh.
Projector projector(const Mesh& mesh, std::span<const PlanarPoint> points);

/// Index of the nearest vertex (Voronoi cell membership).
std::vector<int> nearest_vertices(const Mesh& mesh, std::span<const PlanarPoint> points);

}  // namespace coxmesh
