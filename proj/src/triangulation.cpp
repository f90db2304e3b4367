#include "triangulation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coxmesh/error.hpp"

namespace coxmesh::detail {

long double orient(PlanarPoint a, PlanarPoint b, PlanarPoint c) {
  long double abx = static_cast<long double>(b.x) - a.x, aby = static_cast<long double>(b.y) - a.y;
  long double acx = static_cast<long double>(c.x) - a.x, acy = static_cast<long double>(c.y) - a.y;
  return abx * acy - aby * acx;
}

long double incircle(PlanarPoint a, PlanarPoint b, PlanarPoint c, PlanarPoint d) {
  long double adx = static_cast<long double>(a.x) - d.x, ady = static_cast<long double>(a.y) - d.y;
  long double bdx = static_cast<long double>(b.x) - d.x, bdy = static_cast<long double>(b.y) - d.y;
  long double cdx = static_cast<long double>(c.x) - d.x, cdy = static_cast<long double>(c.y) - d.y;
  long double ad = adx * adx + ady * ady;
  long double bd = bdx * bdx + bdy * bdy;
  long double cd = cdx * cdx + cdy * cdy;
  return ad * (bdx * cdy - cdx * bdy) + bd * (cdx * ady - adx * cdy) + cd * (adx * bdy - bdx * ady);
}

PlanarPoint circumcenter(PlanarPoint a, PlanarPoint b, PlanarPoint c) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  return {a.x + (cy * b2 - by * c2) / d, a.y + (bx * c2 - cx * b2) / d};
}

Triangulator::Triangulator(double xmin, double ymin, double xmax, double ymax) {
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-6});
  const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
  const double m = 20.0 * span;
  pts_ = {{cx - 2 * m, cy - m}, {cx + 2 * m, cy - m}, {cx, cy + 2 * m}};
  tris_.push_back({{0, 1, 2}, {-1, -1, -1}, true});
  vert_tri_ = {0, 0, 0};
}

int Triangulator::locate(PlanarPoint p) const {
  int t = last_;
  if (t < 0 || t >= static_cast<int>(tris_.size()) || !tris_[t].alive) {
    t = -1;
    for (int i = static_cast<int>(tris_.size()) - 1; i >= 0; --i) {
      if (tris_[i].alive) {
        t = i;
        break;
      }
    }
  }
  const std::size_t limit = 4 * tris_.size() + 16;
  for (std::size_t step = 0; step < limit; ++step) {
    const Tri& tri = tris_[t];
    int next = -1;
    for (int k = 0; k < 3; ++k) {
      int i = static_cast<int>((k + step) % 3);
      const PlanarPoint& a = pts_[tri.v[(i + 1) % 3]];
      const PlanarPoint& b = pts_[tri.v[(i + 2) % 3]];
      if (orient(a, b, p) < 0) {
        next = tri.nb[i];
        if (next < 0) throw numerical_error("mesh", "point outside the triangulation bounds");
        break;
      }
    }
    if (next < 0) {
      last_ = t;
      return t;
    }
    t = next;
  }
  // walking cycled on a degenerate configuration; fall back to a scan
  for (int i = 0; i < static_cast<int>(tris_.size()); ++i) {
    const Tri& tri = tris_[i];
    if (!tri.alive) continue;
    if (orient(pts_[tri.v[0]], pts_[tri.v[1]], p) >= 0 && orient(pts_[tri.v[1]], pts_[tri.v[2]], p) >= 0 &&
        orient(pts_[tri.v[2]], pts_[tri.v[0]], p) >= 0) {
      last_ = i;
      return i;
    }
  }
  throw numerical_error("mesh", "point location failed");
}

int Triangulator::insert(PlanarPoint p, std::vector<int>* created, double dup_tol) {
  const int t0 = locate(p);
  for (int k = 0; k < 3; ++k) {
    int v = tris_[t0].v[k];
    if (distance(pts_[v], p) <= dup_tol) return v;
  }
  for (int k = 0; k < 3; ++k) {
    int n = tris_[t0].nb[k];
    if (n < 0) continue;
    for (int v : tris_[n].v) {
      if (distance(pts_[v], p) <= dup_tol) return v;
    }
  }

  if (mark_.size() < tris_.size()) mark_.resize(tris_.size() + tris_.size() / 2 + 16, 0);
  ++stamp_;
  std::vector<int> cavity{t0};
  mark_[t0] = stamp_;
  for (std::size_t q = 0; q < cavity.size(); ++q) {
    const Tri& tri = tris_[cavity[q]];
    for (int n : tri.nb) {
      if (n < 0 || mark_[n] == stamp_) continue;
      const Tri& nt = tris_[n];
      if (incircle(pts_[nt.v[0]], pts_[nt.v[1]], pts_[nt.v[2]], p) > 0) {
        mark_[n] = stamp_;
        cavity.push_back(n);
      }
    }
  }

  struct BoundaryEdge {
    int a, b, outside, old;
  };
  std::vector<BoundaryEdge> boundary;
  for (int guard = 0;; ++guard) {
    boundary.clear();
    int invisible = -2;
    for (int c : cavity) {
      const Tri& tri = tris_[c];
      for (int i = 0; i < 3; ++i) {
        int n = tri.nb[i];
        if (n >= 0 && mark_[n] == stamp_) continue;
        int a = tri.v[(i + 1) % 3], b = tri.v[(i + 2) % 3];
        if (invisible == -2 && orient(pts_[a], pts_[b], p) <= 0) invisible = n;
        boundary.push_back({a, b, n, c});
      }
    }
    if (invisible == -2) break;
    if (invisible < 0 || guard > 64) throw numerical_error("mesh", "cavity is not star-shaped");
    // grow the cavity across the edge p cannot see
    mark_[invisible] = stamp_;
    cavity.push_back(invisible);
  }

  const int pv = static_cast<int>(pts_.size());
  pts_.push_back(p);
  vert_tri_.push_back(-1);

  std::vector<std::pair<int, int>> starts, ends;  // vertex -> new triangle
  starts.reserve(boundary.size());
  ends.reserve(boundary.size());
  const int first = static_cast<int>(tris_.size());
  for (const auto& e : boundary) {
    const int id = static_cast<int>(tris_.size());
    tris_.push_back({{e.a, e.b, pv}, {-1, -1, e.outside}, true});
    starts.emplace_back(e.a, id);
    ends.emplace_back(e.b, id);
    if (e.outside >= 0) {
      Tri& o = tris_[e.outside];
      for (int j = 0; j < 3; ++j) {
        if (o.nb[j] == e.old) o.nb[j] = id;
      }
    }
  }
  auto find = [](const std::vector<std::pair<int, int>>& m, int v) {
    for (const auto& [k, t] : m)
      if (k == v) return t;
    return -1;
  };
  for (int id = first; id < static_cast<int>(tris_.size()); ++id) {
    Tri& tri = tris_[id];
    tri.nb[0] = find(starts, tri.v[1]);
    tri.nb[1] = find(ends, tri.v[0]);
    vert_tri_[tri.v[0]] = id;
    vert_tri_[tri.v[1]] = id;
    vert_tri_[pv] = id;
    if (created) created->push_back(id);
  }
  for (int c : cavity) tris_[c].alive = false;
  last_ = first;
  return pv;
}

std::vector<int> Triangulator::triangles_around(int v) const {
  std::vector<int> out;
  const int start = vert_tri_[v];
  if (start < 0) return out;
  auto index_of = [&](int t) {
    for (int i = 0; i < 3; ++i)
      if (tris_[t].v[i] == v) return i;
    return -1;
  };
  int t = start;
  do {
    out.push_back(t);
    int i = index_of(t);
    t = tris_[t].nb[(i + 2) % 3];
  } while (t >= 0 && t != start);
  if (t < 0) {
    // open fan at the super hull: walk the other way as well
    t = start;
    for (;;) {
      int i = index_of(t);
      t = tris_[t].nb[(i + 1) % 3];
      if (t < 0 || t == start) break;
      out.push_back(t);
    }
  }
  return out;
}

std::array<int, 2> Triangulator::edge_apexes(int a, int b) const {
  std::array<int, 2> out{-1, -1};
  int k = 0;
  for (int t : triangles_around(a)) {
    const auto& v = tris_[t].v;
    for (int i = 0; i < 3; ++i) {
      if (v[i] == b) {
        int apex = v[0] + v[1] + v[2] - a - b;
        if (k < 2) out[k++] = apex;
      }
    }
  }
  return out;
}

bool Triangulator::has_edge(int a, int b) const { return edge_apexes(a, b)[0] >= 0; }

}  // namespace coxmesh::detail
