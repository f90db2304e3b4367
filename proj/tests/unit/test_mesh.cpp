#include <doctest.h>

#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "coxmesh/error.hpp"
#include "coxmesh/mesh.hpp"

using namespace coxmesh;

namespace {
double shoelace(const Ring& r) {
  double a = 0;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) a += r[i].x * r[i + 1].y - r[i + 1].x * r[i].y;
  return std::abs(a) / 2;
}

std::set<std::pair<int, int>> boundary_edges(const Mesh& m) {
  std::map<std::pair<int, int>, int> count;
  for (const auto& t : m.triangles)
    for (int i = 0; i < 3; ++i) {
      int a = t[i], b = t[(i + 1) % 3];
      count[{std::min(a, b), std::max(a, b)}]++;
    }
  std::set<std::pair<int, int>> out;
  for (auto& [e, c] : count)
    if (c == 1) out.insert(e);
  return out;
}
}  // namespace

TEST_CASE("unit square mesh: resolution band, angle bound, orientation") {
  auto sq = make_rectangle(0, 0, 1, 1);
  MeshOptions opt;
  opt.inner_res = 0.25;
  auto mesh = build_mesh(sq, opt);
  REQUIRE(mesh.n_triangles() > 0);
  auto bedges = boundary_edges(mesh);
  double min_e = 1e9, max_e = 0;
  for (const auto& t : mesh.triangles) {
    CHECK(cross(mesh.vertices[t[1]] - mesh.vertices[t[0]], mesh.vertices[t[2]] - mesh.vertices[t[0]]) > 0);
    for (int i = 0; i < 3; ++i) {
      int a = t[i], b = t[(i + 1) % 3];
      if (bedges.count({std::min(a, b), std::max(a, b)})) continue;
      double len = distance(mesh.vertices[a], mesh.vertices[b]);
      min_e = std::min(min_e, len);
      max_e = std::max(max_e, len);
    }
  }
  INFO("interior edges in [", min_e, ", ", max_e, "]");
  CHECK(min_e >= 0.12);
  CHECK(max_e <= 0.5);
  CHECK(mesh_quality(mesh).min_angle_deg >= 20.0);
  CHECK(mesh.total_area() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mesh covers a convex domain and is deterministic") {
  Ring hex;
  for (int k = 0; k < 6; ++k) hex.push_back({3 * std::cos(k * M_PI / 3), 3 * std::sin(k * M_PI / 3)});
  hex.push_back(hex.front());
  auto dom = make_domain(hex);
  MeshOptions opt;
  opt.inner_res = 0.4;
  opt.outer_extension = 2.0;
  opt.outer_res = 1.0;
  auto a = build_mesh(dom, opt);
  auto b = build_mesh(dom, opt);
  CHECK(a.vertices == b.vertices);
  CHECK(a.triangles == b.triangles);
  TriangleLocator loc(a);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 500; ++i) {
    PlanarPoint p{u(rng), u(rng)};
    if (contains(dom, p)) CHECK(loc.locate(p).has_value());
  }
  for (const auto& v : hex) CHECK(loc.locate(v).has_value());
  CHECK(mesh_quality(a).min_angle_deg >= 20.0);
  // coarser buffer: mean edge outside the domain exceeds inner_res
  double outer_sum = 0;
  int outer_n = 0;
  for (const auto& t : a.triangles) {
    PlanarPoint c = (1.0 / 3) * (a.vertices[t[0]] + a.vertices[t[1]] + a.vertices[t[2]]);
    if (distance_to_coast(c, dom) > 1.0 && !contains(dom, c)) {
      outer_sum += distance(a.vertices[t[0]], a.vertices[t[1]]);
      ++outer_n;
    }
  }
  REQUIRE(outer_n > 0);
  CHECK(outer_sum / outer_n > opt.inner_res);
}

TEST_CASE("mesh with a hole excludes the hole") {
  auto dom = make_domain(Ring{{0, 0}, {4, 0}, {4, 4}, {0, 4}, {0, 0}},
                         {Ring{{1.5, 1.5}, {2.5, 1.5}, {2.5, 2.5}, {1.5, 2.5}, {1.5, 1.5}}});
  MeshOptions opt;
  opt.inner_res = 0.3;
  auto mesh = build_mesh(dom, opt);
  CHECK(mesh.total_area() == doctest::Approx(15.0).epsilon(1e-10));
  TriangleLocator loc(mesh);
  CHECK_FALSE(loc.locate({2.0, 2.0}).has_value());
  CHECK(loc.locate({0.5, 0.5}).has_value());
  CHECK(mesh_quality(mesh).min_angle_deg >= 20.0);
}

TEST_CASE("build_mesh rejects bad options") {
  auto sq = make_rectangle(0, 0, 1, 1);
  MeshOptions opt;
  opt.inner_res = 0.0;
  CHECK_THROWS_AS(build_mesh(sq, opt), Error);
  opt.inner_res = 0.1;
  opt.outer_extension = -1;
  CHECK_THROWS_AS(build_mesh(sq, opt), Error);
}

TEST_CASE("dual weights: regular lattice and partition of area") {
  // hand-built uniform grid mesh on [0,1]^2, spacing 0.1
  Mesh m;
  const int k = 11;
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) m.vertices.push_back({i * 0.1, j * 0.1});
  for (int j = 0; j + 1 < k; ++j)
    for (int i = 0; i + 1 < k; ++i) {
      int a = j * k + i, b = a + 1, c = a + k, d = c + 1;
      m.triangles.push_back({a, b, d});
      m.triangles.push_back({a, d, c});
    }
  m.boundary.assign(m.vertices.size(), 0);
  auto sq = make_rectangle(0, 0, 1, 1);
  auto w = dual_weights(m, sq);
  CHECK(w.w[5 * k + 5] == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(w.w[0] == doctest::Approx(0.0025).epsilon(1e-9));
  CHECK(w.total() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("dual weights of a refined mesh equal the polygon area") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> rad(4.0, 8.0);
  for (int rep = 0; rep < 3; ++rep) {
    Ring ring;
    for (int k = 0; k < 12; ++k) {
      double a = 2 * M_PI * k / 12;
      double r = rad(rng);
      ring.push_back({r * std::cos(a), r * std::sin(a)});
    }
    ring.push_back(ring.front());
    auto dom = make_domain(ring);
    MeshOptions opt;
    opt.inner_res = 0.8;
    opt.outer_extension = 2.0;
    auto mesh = build_mesh(dom, opt);
    auto w = dual_weights(mesh, dom);
    CHECK(std::abs(w.total() - shoelace(ring)) / shoelace(ring) < 1e-6);
    for (double x : w.w) CHECK(x >= 0.0);
  }
}

TEST_CASE("projector: vertices, centroids and affine reproduction") {
  auto sq = make_rectangle(0, 0, 2, 1);
  MeshOptions opt;
  opt.inner_res = 0.2;
  auto mesh = build_mesh(sq, opt);
  std::vector<PlanarPoint> pts{mesh.vertices[7]};
  const auto& t = mesh.triangles[3];
  pts.push_back((1.0 / 3) * (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ux(0, 2), uy(0, 1);
  for (int i = 0; i < 200; ++i) pts.push_back({ux(rng), uy(rng)});
  auto a = projector(mesh, pts);
  // vertex row is a unit vector
  double w7 = 0;
  for (int k = 0; k < 3; ++k)
    if (a.index[0][k] == 7) w7 += a.weight[0][k];
  CHECK(w7 == doctest::Approx(1.0));
  for (int k = 0; k < 3; ++k) CHECK(a.weight[1][k] == doctest::Approx(1.0 / 3));
  std::vector<double> fx(mesh.n_vertices()), fy(mesh.n_vertices());
  for (std::size_t v = 0; v < mesh.n_vertices(); ++v) {
    fx[v] = mesh.vertices[v].x;
    fy[v] = 3 - 2 * mesh.vertices[v].x + 0.5 * mesh.vertices[v].y;
  }
  auto px = a.apply(fx), py = a.apply(fy);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(std::abs(px[i] - pts[i].x) < 1e-10);
    CHECK(std::abs(py[i] - (3 - 2 * pts[i].x + 0.5 * pts[i].y)) < 1e-10);
    double s = a.weight[i][0] + a.weight[i][1] + a.weight[i][2];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
  std::vector<PlanarPoint> outside{{0.5, 0.5}, {5, 5}};
  try {
    projector(mesh, outside);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("indices 1") != std::string::npos);
  }
}

TEST_CASE("nearest_vertices matches brute force") {
  auto sq = make_rectangle(0, 0, 1, 1);
  MeshOptions opt;
  opt.inner_res = 0.1;
  auto mesh = build_mesh(sq, opt);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<PlanarPoint> pts(300);
  for (auto& p : pts) p = {u(rng), u(rng)};
  auto nv = nearest_vertices(mesh, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = 1e9;
    for (const auto& v : mesh.vertices) best = std::min(best, distance(v, pts[i]));
    CHECK(distance(mesh.vertices[nv[i]], pts[i]) == doctest::Approx(best));
  }
}
