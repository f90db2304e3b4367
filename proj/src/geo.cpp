#include "coxmesh/geo.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "coxmesh/error.hpp"

namespace coxmesh {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void require_ring(const Ring& ring, const char* what) {
  if (ring.size() < 4) {
    throw data_error("geo", std::string(what) + " ring needs at least 3 distinct vertices");
  }
  if (!(ring.front() == ring.back())) {
    throw data_error("geo", std::string(what) + " ring is not closed (first != last vertex)");
  }
  for (const auto& p : ring) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw data_error("geo", std::string(what) + " ring has a non-finite vertex");
    }
  }
}

bool segments_intersect(PlanarPoint a, PlanarPoint b, PlanarPoint c, PlanarPoint d) {
  auto orient = [](PlanarPoint p, PlanarPoint q, PlanarPoint r) {
    double v = cross(q - p, r - p);
    return (v > 0) - (v < 0);
  };
  auto on_segment = [](PlanarPoint p, PlanarPoint q, PlanarPoint r) {
    return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y &&
           r.y <= std::max(p.y, q.y);
  };
  int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

// Bucketed pairwise edge check; adjacent edges of the same ring are skipped.
void require_simple(const std::vector<const Ring*>& rings) {
  struct Edge {
    PlanarPoint a, b;
    std::size_t ring, index, count;
  };
  std::vector<Edge> edges;
  double xmin = std::numeric_limits<double>::max(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (std::size_t r = 0; r < rings.size(); ++r) {
    const Ring& ring = *rings[r];
    std::size_t m = ring.size() - 1;
    for (std::size_t i = 0; i < m; ++i) {
      edges.push_back({ring[i], ring[i + 1], r, i, m});
      xmin = std::min(xmin, ring[i].x);
      xmax = std::max(xmax, ring[i].x);
      ymin = std::min(ymin, ring[i].y);
      ymax = std::max(ymax, ring[i].y);
    }
  }
  const double span = std::max(xmax - xmin, ymax - ymin);
  const int cells = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(edges.size()))));
  const double cell = span > 0 ? span / cells : 1.0;
  std::unordered_map<long long, std::vector<std::size_t>> buckets;
  auto key = [&](int i, int j) { return static_cast<long long>(i) * 1000003LL + j; };
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& ed = edges[e];
    int i0 = static_cast<int>((std::min(ed.a.x, ed.b.x) - xmin) / cell);
    int i1 = static_cast<int>((std::max(ed.a.x, ed.b.x) - xmin) / cell);
    int j0 = static_cast<int>((std::min(ed.a.y, ed.b.y) - ymin) / cell);
    int j1 = static_cast<int>((std::max(ed.a.y, ed.b.y) - ymin) / cell);
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) buckets[key(i, j)].push_back(e);
  }
  auto adjacent = [](const Edge& p, const Edge& q) {
    if (p.ring != q.ring) return false;
    std::size_t d = p.index > q.index ? p.index - q.index : q.index - p.index;
    return d == 1 || d == p.count - 1;
  };
  std::vector<std::pair<std::size_t, std::size_t>> checked;
  for (auto& [k, list] : buckets) {
    for (std::size_t u = 0; u < list.size(); ++u) {
      for (std::size_t v = u + 1; v < list.size(); ++v) {
        const Edge& p = edges[list[u]];
        const Edge& q = edges[list[v]];
        if (adjacent(p, q)) continue;
        if (segments_intersect(p.a, p.b, q.a, q.b)) {
          throw data_error("geo", "polygon is self-intersecting near (" + std::to_string(p.a.x) +
                                      ", " + std::to_string(p.a.y) + ")");
        }
      }
    }
  }
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

double signed_area(const Ring& ring) {
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) a += cross(ring[i], ring[i + 1]);
  return 0.5 * a;
}

DomainPolygon make_domain(Ring outer, std::vector<Ring> holes) {
  require_ring(outer, "outer");
  for (const auto& h : holes) require_ring(h, "hole");
  std::vector<const Ring*> rings{&outer};
  for (const auto& h : holes) rings.push_back(&h);
  require_simple(rings);
  if (signed_area(outer) < 0) std::reverse(outer.begin(), outer.end());
  for (auto& h : holes) {
    if (signed_area(h) > 0) std::reverse(h.begin(), h.end());
    for (std::size_t i = 0; i + 1 < h.size(); ++i) {
      if (!contains(outer, h[i])) throw data_error("geo", "hole vertex outside the outer ring");
    }
  }
  DomainPolygon d{std::move(outer), std::move(holes)};
  if (!(area(d) > 0.0)) throw data_error("geo", "polygon has non-positive area");
  return d;
}

DomainPolygon make_rectangle(double x0, double y0, double x1, double y1) {
  return make_domain(Ring{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}});
}

double area(const DomainPolygon& domain) {
  double a = std::abs(signed_area(domain.outer));
  for (const auto& h : domain.holes) a -= std::abs(signed_area(h));
  return a;
}

std::array<double, 4> bounding_box(const Ring& ring) {
  std::array<double, 4> b{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
                          -std::numeric_limits<double>::max(), -std::numeric_limits<double>::max()};
  for (const auto& p : ring) {
    b[0] = std::min(b[0], p.x);
    b[1] = std::min(b[1], p.y);
    b[2] = std::max(b[2], p.x);
    b[3] = std::max(b[3], p.y);
  }
  return b;
}

double segment_distance(PlanarPoint p, PlanarPoint a, PlanarPoint b, PlanarPoint* closest) {
  PlanarPoint ab = b - a;
  double len2 = dot(ab, ab);
  double t = len2 > 0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  PlanarPoint c = a + t * ab;
  if (closest) *closest = c;
  return distance(p, c);
}

bool contains(const Ring& ring, PlanarPoint p) {
  bool inside = false;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    PlanarPoint a = ring[i], b = ring[i + 1];
    if (segment_distance(p, a, b) <= 1e-12 * (1.0 + std::abs(p.x) + std::abs(p.y))) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xc) inside = !inside;
    }
  }
  return inside;
}

bool contains(const DomainPolygon& domain, PlanarPoint p) {
  if (!contains(domain.outer, p)) return false;
  for (const auto& h : domain.holes) {
    if (contains(h, p)) {
      // points on a hole boundary are on the coast, hence inside the domain
      for (std::size_t i = 0; i + 1 < h.size(); ++i) {
        if (segment_distance(p, h[i], h[i + 1]) <= 1e-12 * (1.0 + std::abs(p.x) + std::abs(p.y)))
          return true;
      }
      return false;
    }
  }
  return true;
}

namespace {
template <class Visit>
void for_each_boundary_segment(const DomainPolygon& d, Visit&& visit) {
  auto ring = [&](const Ring& r) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i) visit(r[i], r[i + 1]);
  };
  ring(d.outer);
  for (const auto& h : d.holes) ring(h);
}
}  // namespace

double distance_to_coast(PlanarPoint p, const DomainPolygon& coast) {
  if (coast.outer.size() < 2) throw data_error("geo", "distance_to_coast: empty polygon");
  double best = std::numeric_limits<double>::infinity();
  for_each_boundary_segment(coast, [&](PlanarPoint a, PlanarPoint b) {
    best = std::min(best, segment_distance(p, a, b));
  });
  return best;
}

PlanarPoint nearest_boundary_point(PlanarPoint p, const DomainPolygon& domain) {
  if (domain.outer.size() < 2) throw data_error("geo", "nearest_boundary_point: empty polygon");
  double best = std::numeric_limits<double>::infinity();
  PlanarPoint out = domain.outer.front();
  for_each_boundary_segment(domain, [&](PlanarPoint a, PlanarPoint b) {
    PlanarPoint c;
    double d = segment_distance(p, a, b, &c);
    if (d < best) {
      best = d;
      out = c;
    }
  });
  return out;
}

double great_circle_km(LonLatPoint a, LonLatPoint b) {
  double p1 = a.lat * kDeg, p2 = b.lat * kDeg, dl = (b.lon - a.lon) * kDeg;
  double h = std::sin((p2 - p1) / 2);
  double g = std::sin(dl / 2);
  double hav = h * h + std::cos(p1) * std::cos(p2) * g * g;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(hav)));
}

PlanarPoint project(LonLatPoint p, LonLatPoint center) {
  const double phi = p.lat * kDeg, phi0 = center.lat * kDeg;
  const double dl = (p.lon - center.lon) * kDeg;
  const double c = great_circle_km(center, p) / kEarthRadiusKm;
  const double k = c < 1e-12 ? 1.0 : c / std::sin(c);
  return {kEarthRadiusKm * k * std::cos(phi) * std::sin(dl),
          kEarthRadiusKm * k *
              (std::cos(phi0) * std::sin(phi) - std::sin(phi0) * std::cos(phi) * std::cos(dl))};
}

LonLatPoint unproject(PlanarPoint p, LonLatPoint center) {
  const double rho = norm(p);
  if (rho == 0.0) return center;
  const double c = rho / kEarthRadiusKm;
  const double phi0 = center.lat * kDeg;
  const double sc = std::sin(c), cc = std::cos(c);
  const double phi = std::asin(std::clamp(cc * std::sin(phi0) + p.y * sc * std::cos(phi0) / rho, -1.0, 1.0));
  const double lam = std::atan2(p.x * sc, rho * std::cos(phi0) * cc - p.y * std::sin(phi0) * sc);
  double lon = center.lon + lam / kDeg;
  if (lon > 180.0) lon -= 360.0;
  if (lon < -180.0) lon += 360.0;
  return {lon, phi / kDeg};
}

std::vector<PlanarPoint> project(std::span<const LonLatPoint> points, LonLatPoint center) {
  std::vector<PlanarPoint> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(std::abs(p.lat) <= 89.9) || !(std::abs(p.lon) <= 180.0)) {
      throw data_error("geo", "coordinate out of range at record " + std::to_string(i) + " (lon=" +
                                  std::to_string(p.lon) + ", lat=" + std::to_string(p.lat) + ")");
    }
    out.push_back(project(p, center));
  }
  return out;
}

std::vector<LonLatPoint> unproject(std::span<const PlanarPoint> points, LonLatPoint center) {
  std::vector<LonLatPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(unproject(p, center));
  return out;
}

bool CovariateGrid::is_missing(int i, int j) const {
  double v = at(i, j);
  return !std::isfinite(v) || v == missing;
}

void CovariateGrid::validate() const {
  if (!(dx > 0) || !(dy > 0)) throw data_error("geo", "covariate grid needs dx, dy > 0");
  if (nx < 2 || ny < 2) throw data_error("geo", "covariate grid needs nx, ny >= 2");
  if (values.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny)) {
    throw data_error("geo", "covariate grid has " + std::to_string(values.size()) +
                                " values, expected ny*nx = " + std::to_string(nx * ny));
  }
}

BilinearValue bilinear(const CovariateGrid& grid, PlanarPoint p) {
  const double fx = (p.x - grid.x0) / grid.dx;
  const double fy = (p.y - grid.y0) / grid.dy;
  const double eps = 1e-9;
  if (!(fx >= -eps && fx <= grid.nx - 1 + eps && fy >= -eps && fy <= grid.ny - 1 + eps)) {
    throw data_error("geo", "bilinear: point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                ") outside the grid hull (extrapolation)");
  }
  const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, grid.nx - 2);
  const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, grid.ny - 2);
  const double u = std::clamp(fx - i, 0.0, 1.0);
  const double v = std::clamp(fy - j, 0.0, 1.0);
  if (!grid.is_missing(i, j) && !grid.is_missing(i + 1, j) && !grid.is_missing(i, j + 1) &&
      !grid.is_missing(i + 1, j + 1)) {
    double val = (1 - u) * (1 - v) * grid.at(i, j) + u * (1 - v) * grid.at(i + 1, j) +
                 (1 - u) * v * grid.at(i, j + 1) + u * v * grid.at(i + 1, j + 1);
    return {val, false};
  }
  // nearest non-missing node, searching square rings around the nearest node
  const int ci = std::clamp(static_cast<int>(std::lround(fx)), 0, grid.nx - 1);
  const int cj = std::clamp(static_cast<int>(std::lround(fy)), 0, grid.ny - 1);
  const int max_r = std::max(grid.nx, grid.ny);
  double best = std::numeric_limits<double>::infinity();
  double value = 0.0;
  for (int r = 0; r <= max_r; ++r) {
    for (int jj = cj - r; jj <= cj + r; ++jj) {
      for (int ii = ci - r; ii <= ci + r; ++ii) {
        if (std::max(std::abs(ii - ci), std::abs(jj - cj)) != r) continue;
        if (ii < 0 || jj < 0 || ii >= grid.nx || jj >= grid.ny || grid.is_missing(ii, jj)) continue;
        double d = distance(p, grid.node(ii, jj));
        if (d < best) {
          best = d;
          value = grid.at(ii, jj);
        }
      }
    }
    // every node beyond ring r is at least (r + 0.5) cells away
    if (std::isfinite(best) && best <= (r + 0.5) * std::min(grid.dx, grid.dy)) break;
  }
  if (!std::isfinite(best)) throw data_error("geo", "bilinear: grid has no non-missing values");
  return {value, true};
}

Standardization standardize(std::span<const double> values) {
  if (values.size() < 2) throw data_error("geo", "standardize needs at least 2 values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 1e-14 * (1.0 + std::abs(mean)))) throw data_error("geo", "zero variance covariate");
  Standardization out{{}, mean, sd};
  out.values.reserve(values.size());
  for (double v : values) out.values.push_back((v - mean) / sd);
  return out;
}

std::string_view to_string(Species s) { return s == Species::Beluga ? "beluga" : "bowhead"; }

std::string_view to_string(Behavior b) {
  static constexpr std::array<std::string_view, kBehaviorCount> names{"dive", "feed", "mill",
                                                                      "other", "rest", "swim"};
  return names[static_cast<int>(b)];
}

std::optional<Species> parse_species(std::string_view s) {
  auto l = lower(s);
  if (l == "beluga") return Species::Beluga;
  if (l == "bowhead") return Species::Bowhead;
  return std::nullopt;
}

std::optional<Behavior> parse_behavior(std::string_view s) {
  auto l = lower(s);
  for (int b = 0; b < kBehaviorCount; ++b) {
    if (l == to_string(static_cast<Behavior>(b))) return static_cast<Behavior>(b);
  }
  return std::nullopt;
}

SnapResult snap_to_domain(std::span<const Sighting> points, const DomainPolygon& domain,
                          double snap_km) {
  SnapResult out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    Sighting s = points[i];
    if (contains(domain, s.location)) {
      out.kept.push_back(s);
      continue;
    }
    PlanarPoint q = nearest_boundary_point(s.location, domain);
    if (distance(q, s.location) <= snap_km) {
      s.location = q;
      out.kept.push_back(s);
      out.snapped.push_back(i);
    } else {
      out.rejected.push_back(i);
    }
  }
  return out;
}

}  // namespace coxmesh
