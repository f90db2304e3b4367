#pragma once

// Incremental Bowyer-Watson Delaunay triangulation inside a bounding super
// triangle. Internal to the mesh module.

#include <array>
#include <vector>

#include "coxmesh/geo.hpp"

namespace coxmesh::detail {

long double orient(PlanarPoint a, PlanarPoint b, PlanarPoint c);
/// > 0 when d lies strictly inside the circumcircle of counter-clockwise (a, b, c).
long double incircle(PlanarPoint a, PlanarPoint b, PlanarPoint c, PlanarPoint d);
PlanarPoint circumcenter(PlanarPoint a, PlanarPoint b, PlanarPoint c);

class Triangulator {
 public:
  struct Tri {
    std::array<int, 3> v{};   // counter-clockwise
    std::array<int, 3> nb{};  // nb[i] is across the edge opposite v[i]; -1 at the super hull
    bool alive = true;
  };

  static constexpr int kSuperVertices = 3;

  Triangulator(double xmin, double ymin, double xmax, double ymax);

  /// Inserts p and returns its vertex id. A point within `dup_tol` of an
  /// existing vertex returns that vertex instead. Newly created triangles are
  /// appended to `created` when given.
  int insert(PlanarPoint p, std::vector<int>* created = nullptr, double dup_tol = 1e-9);

  /// Alive triangle containing p (boundary inclusive).
  int locate(PlanarPoint p) const;

  /// Alive triangles incident to vertex v.
  std::vector<int> triangles_around(int v) const;
  /// Apex vertices of the (up to two) triangles sharing edge (a, b); -1 when absent.
  std::array<int, 2> edge_apexes(int a, int b) const;
  bool has_edge(int a, int b) const;

  const std::vector<PlanarPoint>& points() const { return pts_; }
  const std::vector<Tri>& triangles() const { return tris_; }
  const PlanarPoint& point(int v) const { return pts_[static_cast<std::size_t>(v)]; }
  bool is_super(int v) const { return v < kSuperVertices; }

 private:
  std::vector<PlanarPoint> pts_;
  std::vector<Tri> tris_;
  std::vector<int> vert_tri_;
  mutable int last_ = 0;

  // scratch for cavity search
  std::vector<int> mark_;
  int stamp_ = 0;
};

}  // namespace coxmesh::detail
