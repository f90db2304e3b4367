#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace coxmesh {

inline constexpr double kEarthRadiusKm = 6371.0088;

struct LonLatPoint {
  double lon = 0.0;
  double lat = 0.0;
};

struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;

  friend PlanarPoint operator+(PlanarPoint a, PlanarPoint b) { return {a.x + b.x, a.y + b.y}; }
  friend PlanarPoint operator-(PlanarPoint a, PlanarPoint b) { return {a.x - b.x, a.y - b.y}; }
  friend PlanarPoint operator*(double s, PlanarPoint a) { return {s * a.x, s * a.y}; }
  friend bool operator==(PlanarPoint a, PlanarPoint b) = default;
};

inline double dot(PlanarPoint a, PlanarPoint b) { return a.x * b.x + a.y * b.y; }
inline double cross(PlanarPoint a, PlanarPoint b) { return a.x * b.y - a.y * b.x; }
inline double norm(PlanarPoint a) { return std::hypot(a.x, a.y); }
inline double distance(PlanarPoint a, PlanarPoint b) { return norm(a - b); }

/// Closed ring: first vertex repeated at the end.
using Ring = std::vector<PlanarPoint>;

/// Polygon with optional holes. After make_domain the outer ring is
/// counter-clockwise and holes are clockwise.
struct DomainPolygon {
  Ring outer;
  std::vector<Ring> holes;
};

/// Validates closure, area and simplicity, then fixes ring orientation.
/// Throws a data error on violation.
DomainPolygon make_domain(Ring outer, std::vector<Ring> holes = {});
DomainPolygon make_rectangle(double x0, double y0, double x1, double y1);

double signed_area(const Ring& ring);
double area(const DomainPolygon& domain);
bool contains(const Ring& ring, PlanarPoint p);
/// Inside the outer ring and outside every hole (boundary counts as inside).
bool contains(const DomainPolygon& domain, PlanarPoint p);
std::array<double, 4> bounding_box(const Ring& ring);  // xmin, ymin, xmax, ymax

/// Point-segment distance and the closest point on the segment.
double segment_distance(PlanarPoint p, PlanarPoint a, PlanarPoint b, PlanarPoint* closest = nullptr);

/// Minimum distance from p to any boundary segment (outer ring and holes).
double distance_to_coast(PlanarPoint p, const DomainPolygon& coast);
PlanarPoint nearest_boundary_point(PlanarPoint p, const DomainPolygon& domain);

/// Local azimuthal equidistant projection (spherical earth) about `center`.
std::vector<PlanarPoint> project(std::span<const LonLatPoint> points, LonLatPoint center);
std::vector<LonLatPoint> unproject(std::span<const PlanarPoint> points, LonLatPoint center);
PlanarPoint project(LonLatPoint p, LonLatPoint center);
LonLatPoint unproject(PlanarPoint p, LonLatPoint center);
double great_circle_km(LonLatPoint a, LonLatPoint b);

/// Node-registered grid: value(i, j) sits at (x0 + i dx, y0 + j dy); values are
/// row-major with j (y index) as the row.
struct CovariateGrid {
  double x0 = 0.0;
  double y0 = 0.0;
  double dx = 1.0;
  double dy = 1.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> values;
  double missing = -9999.0;
  int month = 0;
  int year = 0;

  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }
  bool is_missing(int i, int j) const;
  PlanarPoint node(int i, int j) const { return {x0 + i * dx, y0 + j * dy}; }
  void validate() const;
};

struct BilinearValue {
  double value = 0.0;
  bool fallback = false;  // a neighbouring node was missing; nearest non-missing node used
};

/// Bilinear interpolation inside the grid hull. Throws a data error outside it.
BilinearValue bilinear(const CovariateGrid& grid, PlanarPoint p);

struct Standardization {
  std::vector<double> values;
  double mean = 0.0;
  double sd = 1.0;
};

/// Centers to mean 0 and scales to sample sd 1.
Standardization standardize(std::span<const double> values);

struct Scaler {
  double mean = 0.0;
  double sd = 1.0;
  double apply(double v) const { return (v - mean) / sd; }
  double invert(double z) const { return z * sd + mean; }
};

enum class Species : int { Beluga = 0, Bowhead = 1 };
inline constexpr int kSpeciesCount = 2;

enum class Behavior : int { Dive = 0, Feed, Mill, Other, Rest, Swim };
inline constexpr int kBehaviorCount = 6;

inline constexpr int kFirstMonth = 7;
inline constexpr int kLastMonth = 10;

std::string_view to_string(Species s);
std::string_view to_string(Behavior b);
/// Case-insensitive; nullopt on unknown names.
std::optional<Species> parse_species(std::string_view s);
std::optional<Behavior> parse_behavior(std::string_view s);

struct SightingRecord {
  LonLatPoint location;
  Species species = Species::Beluga;
  int year = 0;
  int month = kFirstMonth;
  Behavior behavior = Behavior::Swim;
  int group_size = 1;
};

/// A sighting in planar km.
struct Sighting {
  PlanarPoint location;
  Species species = Species::Beluga;
  int year = 0;
  int month = kFirstMonth;
  Behavior behavior = Behavior::Swim;
  int group_size = 1;
};

using MarkedPointPattern = std::vector<Sighting>;

struct SnapResult {
  std::vector<Sighting> kept;
  std::vector<std::size_t> snapped;   // input indices moved onto the boundary
  std::vector<std::size_t> rejected;  // input indices dropped
};

/// Points outside the domain are moved to the nearest boundary point when
/// within `snap_km`, otherwise dropped.
SnapResult snap_to_domain(std::span<const Sighting> points, const DomainPolygon& domain,
                          double snap_km = 2.0);

}  // namespace coxmesh
