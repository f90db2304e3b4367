#include "coxmesh/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>

#include "coxmesh/error.hpp"
#include "triangulation.hpp"

namespace coxmesh {
namespace {

using detail::Triangulator;

constexpr double kAcuteInputAngle = std::numbers::pi / 3.0;

long long cell_key(long long i, long long j) { return i * 4'000'037LL + j; }

// Uniform bucket grid keyed by cell; entries are opaque ids.
class BucketGrid {
 public:
  BucketGrid(double x0, double y0, double cell) : x0_(x0), y0_(y0), cell_(cell) {}

  void insert_box(int id, double xmin, double ymin, double xmax, double ymax) {
    auto [i0, j0] = cell(xmin, ymin);
    auto [i1, j1] = cell(xmax, ymax);
    for (long long i = i0; i <= i1; ++i)
      for (long long j = j0; j <= j1; ++j) map_[cell_key(i, j)].push_back(id);
  }
  const std::vector<int>* at(double x, double y) const {
    auto [i, j] = cell(x, y);
    auto it = map_.find(cell_key(i, j));
    return it == map_.end() ? nullptr : &it->second;
  }
  template <class Visit>
  void visit_box(double xmin, double ymin, double xmax, double ymax, Visit&& visit) const {
    auto [i0, j0] = cell(xmin, ymin);
    auto [i1, j1] = cell(xmax, ymax);
    for (long long i = i0; i <= i1; ++i)
      for (long long j = j0; j <= j1; ++j) {
        auto it = map_.find(cell_key(i, j));
        if (it != map_.end())
          for (int id : it->second) visit(id);
      }
  }

 private:
  std::pair<long long, long long> cell(double x, double y) const {
    return {static_cast<long long>(std::floor((x - x0_) / cell_)),
            static_cast<long long>(std::floor((y - y0_) / cell_))};
  }
  double x0_, y0_, cell_;
  std::unordered_map<long long, std::vector<int>> map_;
};

Ring convex_hull(const Ring& ring) {
  std::vector<PlanarPoint> pts(ring.begin(), ring.end() - 1);
  std::sort(pts.begin(), pts.end(),
            [](PlanarPoint a, PlanarPoint b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<PlanarPoint> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k);  // closed: last equals first
  return h;
}

// Convex hull of the domain offset outward by `ext`, with round corners.
Ring buffer_ring(const Ring& outer, double ext, double res) {
  Ring hull = convex_hull(outer);
  const std::size_t m = hull.size() - 1;
  Ring out;
  for (std::size_t i = 0; i < m; ++i) {
    PlanarPoint prev = hull[(i + m - 1) % m], cur = hull[i], next = hull[(i + 1) % m];
    PlanarPoint din = cur - prev, dout = next - cur;
    double a0 = std::atan2(-din.x, din.y);  // outward normal (dy, -dx)
    double a1 = std::atan2(-dout.x, dout.y);
    while (a1 < a0) a1 += 2 * std::numbers::pi;
    int steps = std::max(1, static_cast<int>(std::ceil(ext * (a1 - a0) / res)));
    for (int s = 0; s <= steps; ++s) {
      double a = a0 + (a1 - a0) * s / steps;
      PlanarPoint q{cur.x + ext * std::cos(a), cur.y + ext * std::sin(a)};
      if (out.empty() || distance(out.back(), q) > 1e-9 * (1 + ext)) out.push_back(q);
    }
  }
  if (distance(out.front(), out.back()) <= 1e-9 * (1 + ext)) out.pop_back();
  out.push_back(out.front());
  return out;
}

class Refiner {
 public:
  Refiner(const DomainPolygon& domain, const MeshOptions& opt)
      : domain_(domain), opt_(opt), tri_(init_box(domain, opt)), index_(0, 0, 1) {}

  Mesh run();

 private:
  struct Seg {
    int a = -1, b = -1;
    int input = -1;
    bool boundary = false;
    bool alive = true;
  };

  static std::array<double, 4> init_box(const DomainPolygon& d, const MeshOptions& o) {
    auto b = bounding_box(d.outer);
    double e = o.outer_extension * 1.01 + 1e-9;
    return {b[0] - e, b[1] - e, b[2] + e, b[3] + e};
  }
  // Triangulator has no default constructor; unpack the box here.
  struct BoxTriangulator : Triangulator {
    explicit BoxTriangulator(std::array<double, 4> b) : Triangulator(b[0], b[1], b[2], b[3]) {}
  };

  void add_ring(const Ring& ring, bool boundary, double res);
  int insert_vertex(PlanarPoint p, int input);
  void add_segment(int a, int b, int input, bool boundary);
  bool encroached(const Seg& s) const;
  void split(int s);
  void drain_segments();
  bool in_region(int t);
  double size_at(PlanarPoint p) const;
  bool bad(int t);
  bool exempt(int shortest_u, int shortest_v, int apex) const;
  std::vector<int> inputs_of(int v) const;

  const DomainPolygon& domain_;
  MeshOptions opt_;
  Ring buffer_;
  BoxTriangulator tri_;
  std::vector<Seg> segs_;
  std::vector<std::vector<int>> vseg_;
  std::vector<int> on_input_;
  std::vector<std::vector<int>> corner_inputs_;
  std::vector<double> corner_angle_;
  std::vector<std::array<int, 2>> input_ends_;
  std::vector<signed char> region_;
  std::vector<char> given_up_;
  std::deque<int> seg_queue_;
  std::deque<int> tri_queue_;
  BucketGrid index_;
  std::vector<int> created_;
};

int Refiner::insert_vertex(PlanarPoint p, int input) {
  if (tri_.points().size() >= opt_.max_vertices + Triangulator::kSuperVertices) {
    throw numerical_error("mesh", "refinement exceeded max_vertices = " +
                                      std::to_string(opt_.max_vertices));
  }
  created_.clear();
  const std::size_t before = tri_.points().size();
  int v = tri_.insert(p, &created_);
  if (tri_.points().size() > before) {
    vseg_.emplace_back();
    on_input_.push_back(input);
    corner_inputs_.emplace_back();
    corner_angle_.push_back(std::numeric_limits<double>::infinity());
  }
  if (region_.size() < tri_.triangles().size()) {
    region_.resize(tri_.triangles().size(), -1);
    given_up_.resize(tri_.triangles().size(), 0);
  }
  for (int t : created_) {
    tri_queue_.push_back(t);
    for (int u : tri_.triangles()[t].v) {
      if (tri_.is_super(u)) continue;
      for (int s : vseg_[u])
        if (segs_[s].alive) seg_queue_.push_back(s);
    }
  }
  return v;
}

void Refiner::add_segment(int a, int b, int input, bool boundary) {
  if (a == b) return;
  const int id = static_cast<int>(segs_.size());
  segs_.push_back({a, b, input, boundary, true});
  vseg_[a].push_back(id);
  vseg_[b].push_back(id);
  PlanarPoint pa = tri_.point(a), pb = tri_.point(b);
  PlanarPoint m = 0.5 * (pa + pb);
  double r = 0.5 * distance(pa, pb);
  index_.insert_box(id, m.x - r, m.y - r, m.x + r, m.y + r);
  seg_queue_.push_back(id);
}

void Refiner::add_ring(const Ring& ring, bool boundary, double res) {
  const std::size_t m = ring.size() - 1;
  std::vector<int> ids(m);
  for (std::size_t i = 0; i < m; ++i) ids[i] = insert_vertex(ring[i], -1);
  for (std::size_t i = 0; i < m; ++i) {
    PlanarPoint prev = ring[(i + m - 1) % m], cur = ring[i], next = ring[(i + 1) % m];
    PlanarPoint u = prev - cur, w = next - cur;
    double ang = std::atan2(std::abs(cross(u, w)), dot(u, w));
    corner_angle_[ids[i]] = std::min(corner_angle_[ids[i]], ang);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const int input = static_cast<int>(input_ends_.size());
    int a = ids[i], b = ids[(i + 1) % m];
    input_ends_.push_back({a, b});
    corner_inputs_[a].push_back(input);
    corner_inputs_[b].push_back(input);
    PlanarPoint pa = ring[i], pb = ring[(i + 1) % m];
    const int pieces = std::max(1, static_cast<int>(std::ceil(distance(pa, pb) / res - 1e-9)));
    int prev_id = a;
    for (int k = 1; k < pieces; ++k) {
      double t = static_cast<double>(k) / pieces;
      int v = insert_vertex(pa + t * (pb - pa), input);
      add_segment(prev_id, v, input, boundary);
      prev_id = v;
    }
    add_segment(prev_id, b, input, boundary);
  }
}

bool Refiner::encroached(const Seg& s) const {
  auto apex = tri_.edge_apexes(s.a, s.b);
  if (apex[0] < 0) return true;  // missing from the triangulation
  PlanarPoint pa = tri_.point(s.a), pb = tri_.point(s.b);
  for (int v : apex) {
    if (v < 0 || tri_.is_super(v)) continue;
    PlanarPoint p = tri_.point(v);
    if (dot(pa - p, pb - p) < 0) return true;
  }
  return false;
}

void Refiner::split(int s) {
  Seg seg = segs_[s];
  segs_[s].alive = false;
  PlanarPoint m = 0.5 * (tri_.point(seg.a) + tri_.point(seg.b));
  int v = insert_vertex(m, seg.input);
  add_segment(seg.a, v, seg.input, seg.boundary);
  add_segment(v, seg.b, seg.input, seg.boundary);
}

void Refiner::drain_segments() {
  while (!seg_queue_.empty()) {
    int s = seg_queue_.front();
    seg_queue_.pop_front();
    if (!segs_[s].alive) continue;
    if (encroached(segs_[s])) split(s);
  }
}

bool Refiner::in_region(int t) {
  if (region_[t] >= 0) return region_[t] == 1;
  const auto& v = tri_.triangles()[t].v;
  bool in = false;
  if (!tri_.is_super(v[0]) && !tri_.is_super(v[1]) && !tri_.is_super(v[2])) {
    PlanarPoint c = (1.0 / 3.0) * (tri_.point(v[0]) + tri_.point(v[1]) + tri_.point(v[2]));
    if (buffer_.empty()) {
      in = contains(domain_, c);
    } else {
      in = contains(buffer_, c);
      for (const auto& h : domain_.holes) in = in && !contains(h, c);
    }
  }
  region_[t] = in ? 1 : 0;
  return in;
}

double Refiner::size_at(PlanarPoint p) const {
  if (contains(domain_, p)) return opt_.inner_res;
  return std::min(opt_.outer_res, opt_.inner_res + opt_.grading * distance_to_coast(p, domain_));
}

std::vector<int> Refiner::inputs_of(int v) const {
  if (on_input_[v] >= 0) return {on_input_[v]};
  return corner_inputs_[v];
}

bool Refiner::exempt(int u, int v, int apex) const {
  if (corner_angle_[apex] < kAcuteInputAngle) return true;
  for (int s1 : inputs_of(u)) {
    for (int s2 : inputs_of(v)) {
      if (s1 == s2) continue;
      for (int e1 : input_ends_[s1]) {
        for (int e2 : input_ends_[s2]) {
          if (e1 == e2 && corner_angle_[e1] < kAcuteInputAngle) return true;
        }
      }
    }
  }
  return false;
}

bool Refiner::bad(int t) {
  if (!tri_.triangles()[t].alive || given_up_[t] || !in_region(t)) return false;
  const auto& v = tri_.triangles()[t].v;
  PlanarPoint p[3] = {tri_.point(v[0]), tri_.point(v[1]), tri_.point(v[2])};
  double len[3] = {distance(p[1], p[2]), distance(p[2], p[0]), distance(p[0], p[1])};
  double area2 = std::abs(cross(p[1] - p[0], p[2] - p[0]));
  double radius = len[0] * len[1] * len[2] / (2.0 * area2);
  PlanarPoint c = (1.0 / 3.0) * (p[0] + p[1] + p[2]);
  if (radius > 0.75 * size_at(c)) return true;
  int k = static_cast<int>(std::min_element(len, len + 3) - len);  // opposite the smallest angle
  double sin_min = area2 / (len[(k + 1) % 3] * len[(k + 2) % 3]);
  if (sin_min >= std::sin(opt_.min_angle_deg * std::numbers::pi / 180.0)) return false;
  return !exempt(v[(k + 1) % 3], v[(k + 2) % 3], v[k]);
}

Mesh Refiner::run() {
  if (!(opt_.inner_res > 0)) throw config_error("mesh", "inner_res must be > 0");
  if (!(opt_.outer_extension >= 0)) throw config_error("mesh", "outer_extension must be >= 0");
  if (opt_.outer_res <= 0) opt_.outer_res = 4.0 * opt_.inner_res;
  opt_.outer_res = std::max(opt_.outer_res, opt_.inner_res);
  if (!(area(domain_) > 0)) throw data_error("mesh", "degenerate polygon");

  vseg_.assign(Triangulator::kSuperVertices, {});
  on_input_.assign(Triangulator::kSuperVertices, -1);
  corner_inputs_.assign(Triangulator::kSuperVertices, {});
  corner_angle_.assign(Triangulator::kSuperVertices, std::numeric_limits<double>::infinity());
  auto box = bounding_box(domain_.outer);
  index_ = BucketGrid(box[0], box[1], 2.0 * opt_.inner_res);

  const bool buffered = opt_.outer_extension > 0;
  add_ring(domain_.outer, !buffered, opt_.inner_res);
  for (const auto& h : domain_.holes) add_ring(h, true, opt_.inner_res);
  if (buffered) {
    buffer_ = buffer_ring(domain_.outer, opt_.outer_extension, opt_.outer_res);
    add_ring(buffer_, true, opt_.outer_res);
  }
  drain_segments();

  region_.assign(tri_.triangles().size(), -1);
  given_up_.assign(tri_.triangles().size(), 0);
  tri_queue_.clear();
  for (int t = 0; t < static_cast<int>(tri_.triangles().size()); ++t)
    if (tri_.triangles()[t].alive) tri_queue_.push_back(t);

  while (!tri_queue_.empty()) {
    drain_segments();
    if (tri_queue_.empty()) break;
    int t = tri_queue_.front();
    tri_queue_.pop_front();
    if (!bad(t)) continue;
    const auto& v = tri_.triangles()[t].v;
    PlanarPoint c = detail::circumcenter(tri_.point(v[0]), tri_.point(v[1]), tri_.point(v[2]));
    std::vector<int> hit;
    if (const auto* cands = index_.at(c.x, c.y)) {
      for (int s : *cands) {
        const Seg& seg = segs_[s];
        if (!seg.alive) continue;
        PlanarPoint pa = tri_.point(seg.a), pb = tri_.point(seg.b);
        if (dot(pa - c, pb - c) < 0) hit.push_back(s);
      }
    }
    if (!hit.empty()) {
      for (int s : hit)
        if (segs_[s].alive) split(s);
      tri_queue_.push_back(t);
      continue;
    }
    int tc = tri_.locate(c);
    if (!in_region(tc)) {
      given_up_[t] = 1;
      continue;
    }
    insert_vertex(c, -1);
  }

  // extract region triangles
  Mesh mesh;
  const auto& pts = tri_.points();
  std::vector<int> remap(pts.size(), -1);
  std::vector<std::array<int, 3>> tris;
  for (int t = 0; t < static_cast<int>(tri_.triangles().size()); ++t) {
    const auto& tr = tri_.triangles()[t];
    if (!tr.alive || !in_region(t)) continue;
    tris.push_back(tr.v);
    for (int u : tr.v) remap[u] = 0;
  }
  for (std::size_t u = 0; u < pts.size(); ++u) {
    if (remap[u] == 0) {
      remap[u] = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(pts[u]);
    }
  }
  mesh.triangles.reserve(tris.size());
  for (auto& t : tris) mesh.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
  mesh.boundary.assign(mesh.vertices.size(), 0);
  for (const auto& s : segs_) {
    if (!s.alive || !s.boundary) continue;
    if (remap[s.a] >= 0) mesh.boundary[remap[s.a]] = 1;
    if (remap[s.b] >= 0) mesh.boundary[remap[s.b]] = 1;
  }
  return mesh;
}

// Keeps the part of `poly` with dot(n, x) <= c.
std::vector<PlanarPoint> clip_halfplane(const std::vector<PlanarPoint>& poly, PlanarPoint n, double c) {
  std::vector<PlanarPoint> out;
  const std::size_t m = poly.size();
  if (m == 0) return out;
  out.reserve(m + 4);
  for (std::size_t i = 0; i < m; ++i) {
    PlanarPoint a = poly[i], b = poly[(i + 1) % m];
    double da = dot(n, a) - c, db = dot(n, b) - c;
    if (da <= 0) out.push_back(a);
    if ((da < 0 && db > 0) || (da > 0 && db < 0)) {
      double t = da / (da - db);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

double polygon_area(const std::vector<PlanarPoint>& poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) a += cross(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * a;
}

// Area of `ring` inside the convex counter-clockwise polygon `cell`.
double clipped_area(const Ring& ring, const std::vector<PlanarPoint>& cell) {
  std::vector<PlanarPoint> poly(ring.begin(), ring.end() - 1);
  for (std::size_t i = 0; i < cell.size() && !poly.empty(); ++i) {
    PlanarPoint a = cell[i], b = cell[(i + 1) % cell.size()];
    PlanarPoint n{b.y - a.y, a.x - b.x};  // outward for a counter-clockwise cell
    poly = clip_halfplane(poly, n, dot(n, a));
  }
  return std::abs(polygon_area(poly));
}

}  // namespace

Mesh build_mesh(const DomainPolygon& domain, const MeshOptions& options) {
  Refiner refiner(domain, options);
  return refiner.run();
}

double Mesh::triangle_area(std::size_t t) const {
  const auto& tr = triangles[t];
  return 0.5 * cross(vertices[tr[1]] - vertices[tr[0]], vertices[tr[2]] - vertices[tr[0]]);
}

double Mesh::total_area() const {
  double a = 0;
  for (std::size_t t = 0; t < triangles.size(); ++t) a += triangle_area(t);
  return a;
}

MeshQuality mesh_quality(const Mesh& mesh) {
  MeshQuality q{180.0, std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& t : mesh.triangles) {
    for (int i = 0; i < 3; ++i) {
      PlanarPoint a = mesh.vertices[t[i]], b = mesh.vertices[t[(i + 1) % 3]], c = mesh.vertices[t[(i + 2) % 3]];
      PlanarPoint u = b - a, w = c - a;
      double ang = std::atan2(std::abs(cross(u, w)), dot(u, w)) * 180.0 / std::numbers::pi;
      q.min_angle_deg = std::min(q.min_angle_deg, ang);
      double len = norm(u);
      q.min_edge = std::min(q.min_edge, len);
      q.max_edge = std::max(q.max_edge, len);
    }
  }
  return q;
}

double DualWeights::total() const {
  // compensated sum
  double s = 0, c = 0;
  for (double v : w) {
    double y = v - c, t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

DualWeights dual_weights(const Mesh& mesh, const DomainPolygon& domain) {
  const std::size_t n = mesh.n_vertices();
  DualWeights out;
  out.w.assign(n, 0.0);
  if (n == 0) return out;

  double xmin = std::numeric_limits<double>::max(), ymin = xmin, xmax = -xmin, ymax = -xmin;
  auto grow = [&](PlanarPoint p) {
    xmin = std::min(xmin, p.x);
    ymin = std::min(ymin, p.y);
    xmax = std::max(xmax, p.x);
    ymax = std::max(ymax, p.y);
  };
  for (auto p : mesh.vertices) grow(p);
  for (auto p : domain.outer) grow(p);
  const double span = std::max(xmax - xmin, ymax - ymin);

  // Voronoi neighbours come from an unconstrained Delaunay triangulation of the vertices.
  Triangulator dt(xmin, ymin, xmax, ymax);
  std::vector<int> id(n);
  for (std::size_t i = 0; i < n; ++i) id[i] = dt.insert(mesh.vertices[i], nullptr, 0.0);

  // boundary segments bucketed to find cells that straddle the coast
  std::vector<std::pair<PlanarPoint, PlanarPoint>> bsegs;
  auto collect = [&](const Ring& r) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i) bsegs.emplace_back(r[i], r[i + 1]);
  };
  collect(domain.outer);
  for (const auto& h : domain.holes) collect(h);
  const double cell = std::max(span / std::max(1.0, std::sqrt(static_cast<double>(bsegs.size()))), 1e-9);
  BucketGrid grid(xmin, ymin, cell);
  for (int s = 0; s < static_cast<int>(bsegs.size()); ++s) {
    auto [a, b] = bsegs[s];
    grid.insert_box(s, std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y));
  }

  const double pad = span + 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const PlanarPoint pi = mesh.vertices[i];
    std::vector<PlanarPoint> poly{{xmin - pad, ymin - pad}, {xmax + pad, ymin - pad},
                                  {xmax + pad, ymax + pad}, {xmin - pad, ymax + pad}};
    for (int t : dt.triangles_around(id[i])) {
      for (int u : dt.triangles()[t].v) {
        if (u == id[i] || dt.is_super(u)) continue;
        PlanarPoint pj = dt.point(u);
        PlanarPoint nrm = pj - pi;
        poly = clip_halfplane(poly, nrm, dot(nrm, 0.5 * (pi + pj)));
      }
    }
    if (poly.size() < 3) continue;
    double bx0 = poly[0].x, by0 = poly[0].y, bx1 = bx0, by1 = by0;
    for (auto p : poly) {
      bx0 = std::min(bx0, p.x);
      by0 = std::min(by0, p.y);
      bx1 = std::max(bx1, p.x);
      by1 = std::max(by1, p.y);
    }
    bool straddles = false;
    grid.visit_box(bx0, by0, bx1, by1, [&](int s) {
      if (straddles) return;
      auto [a, b] = bsegs[s];
      if (std::max(a.x, b.x) >= bx0 && std::min(a.x, b.x) <= bx1 && std::max(a.y, b.y) >= by0 &&
          std::min(a.y, b.y) <= by1)
        straddles = true;
    });
    if (!straddles) {
      out.w[i] = contains(domain, pi) ? std::abs(polygon_area(poly)) : 0.0;
      continue;
    }
    double w = clipped_area(domain.outer, poly);
    for (const auto& h : domain.holes) w -= clipped_area(h, poly);
    out.w[i] = std::max(0.0, w);
  }
  return out;
}

TriangleLocator::TriangleLocator(const Mesh& mesh) : mesh_(&mesh) {
  double xmin = std::numeric_limits<double>::max(), ymin = xmin, xmax = -xmin, ymax = -xmin;
  for (auto p : mesh.vertices) {
    xmin = std::min(xmin, p.x);
    ymin = std::min(ymin, p.y);
    xmax = std::max(xmax, p.x);
    ymax = std::max(ymax, p.y);
  }
  if (mesh.vertices.empty()) return;
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
  const int target = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.n_triangles()))));
  cell_ = span / target;
  x0_ = xmin;
  y0_ = ymin;
  nx_ = static_cast<int>((xmax - xmin) / cell_) + 1;
  ny_ = static_cast<int>((ymax - ymin) / cell_) + 1;
  buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (int t = 0; t < static_cast<int>(mesh.n_triangles()); ++t) {
    const auto& tr = mesh.triangles[t];
    double bx0 = xmax, by0 = ymax, bx1 = xmin, by1 = ymin;
    for (int k : tr) {
      bx0 = std::min(bx0, mesh.vertices[k].x);
      by0 = std::min(by0, mesh.vertices[k].y);
      bx1 = std::max(bx1, mesh.vertices[k].x);
      by1 = std::max(by1, mesh.vertices[k].y);
    }
    int i0 = std::clamp(static_cast<int>((bx0 - x0_) / cell_), 0, nx_ - 1);
    int i1 = std::clamp(static_cast<int>((bx1 - x0_) / cell_), 0, nx_ - 1);
    int j0 = std::clamp(static_cast<int>((by0 - y0_) / cell_), 0, ny_ - 1);
    int j1 = std::clamp(static_cast<int>((by1 - y0_) / cell_), 0, ny_ - 1);
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(t);
  }
}

std::optional<TriangleLocator::Hit> TriangleLocator::locate(PlanarPoint p) const {
  if (buckets_.empty()) return std::nullopt;
  const double fx = (p.x - x0_) / cell_, fy = (p.y - y0_) / cell_;
  if (fx < -1e-9 || fy < -1e-9 || fx > nx_ + 1e-9 || fy > ny_ + 1e-9) return std::nullopt;
  int i = std::clamp(static_cast<int>(fx), 0, nx_ - 1);
  int j = std::clamp(static_cast<int>(fy), 0, ny_ - 1);
  std::optional<Hit> best;
  double best_violation = std::numeric_limits<double>::infinity();
  for (int t : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
    const auto& tr = mesh_->triangles[t];
    PlanarPoint a = mesh_->vertices[tr[0]], b = mesh_->vertices[tr[1]], c = mesh_->vertices[tr[2]];
    double det = cross(b - a, c - a);
    double l1 = cross(c - b, p - b) / det;  // weight of a
    double l2 = cross(a - c, p - c) / det;  // weight of b
    double l3 = 1.0 - l1 - l2;
    double violation = std::max({-l1, -l2, -l3, 0.0});
    if (violation < best_violation) {
      best_violation = violation;
      best = Hit{t, {l1, l2, l3}};
      if (violation == 0.0) break;
    }
  }
  if (!best || best_violation > 1e-10) return std::nullopt;
  auto& w = best->bary;
  for (double& x : w) x = std::max(0.0, x);
  double s = w[0] + w[1] + w[2];
  for (double& x : w) x /= s;
  return best;
}

double Projector::apply_row(std::size_t i, std::span<const double> field) const {
  const auto& ix = index[i];
  const auto& w = weight[i];
  return w[0] * field[ix[0]] + w[1] * field[ix[1]] + w[2] * field[ix[2]];
}

std::vector<double> Projector::apply(std::span<const double> field) const {
  std::vector<double> out(n_points());
  for (std::size_t i = 0; i < n_points(); ++i) out[i] = apply_row(i, field);
  return out;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> Projector::matrix() const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(3 * n_points());
  for (std::size_t i = 0; i < n_points(); ++i)
    for (int k = 0; k < 3; ++k)
      if (weight[i][k] != 0.0) trip.emplace_back(static_cast<int>(i), index[i][k], weight[i][k]);
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(static_cast<Eigen::Index>(n_points()),
                                                 static_cast<Eigen::Index>(n_vertices));
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

Projector projector(const Mesh& mesh, std::span<const PlanarPoint> points) {
  TriangleLocator locator(mesh);
  Projector a;
  a.n_vertices = mesh.n_vertices();
  a.index.reserve(points.size());
  a.weight.reserve(points.size());
  std::vector<std::size_t> outside;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto hit = locator.locate(points[i]);
    if (!hit) {
      outside.push_back(i);
      a.index.push_back({0, 0, 0});
      a.weight.push_back({1.0, 0.0, 0.0});
      continue;
    }
    a.index.push_back(mesh.triangles[hit->triangle]);
    a.weight.push_back(hit->bary);
  }
  if (!outside.empty()) {
    std::string list;
    for (std::size_t k = 0; k < outside.size() && k < 20; ++k) list += (k ? "," : "") + std::to_string(outside[k]);
    if (outside.size() > 20) list += ",...";
    throw data_error("mesh", std::to_string(outside.size()) + " point(s) outside the mesh: indices " + list);
  }
  return a;
}

std::vector<int> nearest_vertices(const Mesh& mesh, std::span<const PlanarPoint> points) {
  std::vector<int> out(points.size(), -1);
  if (mesh.vertices.empty()) return out;
  double xmin = std::numeric_limits<double>::max(), ymin = xmin, xmax = -xmin, ymax = -xmin;
  for (auto p : mesh.vertices) {
    xmin = std::min(xmin, p.x);
    ymin = std::min(ymin, p.y);
    xmax = std::max(xmax, p.x);
    ymax = std::max(ymax, p.y);
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
  const double cell = span / std::max(1.0, std::sqrt(static_cast<double>(mesh.n_vertices())));
  BucketGrid grid(xmin, ymin, cell);
  for (int v = 0; v < static_cast<int>(mesh.n_vertices()); ++v)
    grid.insert_box(v, mesh.vertices[v].x, mesh.vertices[v].y, mesh.vertices[v].x, mesh.vertices[v].y);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PlanarPoint p = points[i];
    double best = std::numeric_limits<double>::infinity();
    int best_v = -1;
    for (int r = 0;; ++r) {
      double lo = r * cell;
      grid.visit_box(p.x - lo, p.y - lo, p.x + lo, p.y + lo, [&](int v) {
        double d = distance(p, mesh.vertices[v]);
        if (d < best || (d == best && v < best_v)) {
          best = d;
          best_v = v;
        }
      });
      if (best_v >= 0 && best <= lo) break;
      if (lo > 4 * span + distance(p, {xmin, ymin})) break;
    }
    out[i] = best_v;
  }
  return out;
}

}  // namespace coxmesh
