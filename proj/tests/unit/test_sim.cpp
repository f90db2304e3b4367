#include <doctest.h>

#include <cmath>

#include "coxmesh/sim.hpp"
#include "toy.hpp"

using namespace coxmesh;

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / v.size();
}

double var_of(const std::vector<double>& v) {
  double m = mean_of(v), s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

std::vector<double> constant(const Mesh& mesh, double v) { return std::vector<double>(mesh.n_vertices(), v); }

}  // namespace

TEST_CASE("field: interior sd near sigma and zero mean") {
  SpdeParams p{0.1, 0.1, 0.0, 1.0};
  auto dom = make_rectangle(0, 0, 1, 1);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.025, .outer_extension = 0.6, .outer_res = 0.1});
  auto f = factorize(assemble_precision(mesh, p));
  std::vector<int> inner;
  for (std::size_t v = 0; v < mesh.n_vertices(); ++v)
    if (contains(make_rectangle(0.2, 0.2, 0.8, 0.8), mesh.vertices[v])) inner.push_back(static_cast<int>(v));
  const int draws = 500;
  std::vector<double> sum(inner.size()), sum2(inner.size());
  double grand = 0;
  for (int d = 0; d < draws; ++d) {
    Vec w = simulate_field(f, stream_seed(3, {stream::field, static_cast<std::uint64_t>(d)}));
    for (std::size_t i = 0; i < inner.size(); ++i) {
      sum[i] += w[inner[i]];
      sum2[i] += w[inner[i]] * w[inner[i]];
      grand += w[inner[i]];
    }
  }
  double sd = 0;
  for (std::size_t i = 0; i < inner.size(); ++i) sd += std::sqrt(sum2[i] / draws);
  sd /= inner.size();
  INFO("mean interior sd ", sd);
  CHECK(std::abs(sd - 1.0) < 0.1);
  // mean over vertices of a draw has sd well below 1; per-vertex mean sd is 1/sqrt(500)
  for (std::size_t i = 0; i < inner.size(); i += 37) CHECK(std::abs(sum[i] / draws) < 4.5 / std::sqrt(draws));
}

TEST_CASE("field: anisotropy stretches correlation along x") {
  SpdeParams p{0.15, 0.04, 0.0, 1.0};
  auto dom = make_rectangle(0, 0, 2, 2);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.04, .outer_extension = 0.6, .outer_res = 0.2});
  auto f = factorize(assemble_precision(mesh, p));
  auto idx = nearest_vertices(mesh, std::vector<PlanarPoint>{{1.0, 1.0}, {1.3, 1.0}, {1.0, 1.3}});
  const int draws = 300;
  std::vector<double> a, bx, by;
  for (int d = 0; d < draws; ++d) {
    Vec w = simulate_field(f, 100 + d);
    a.push_back(w[idx[0]]);
    bx.push_back(w[idx[1]]);
    by.push_back(w[idx[2]]);
  }
  auto corr = [](const std::vector<double>& u, const std::vector<double>& v) {
    double mu = mean_of(u), mv = mean_of(v), c = 0;
    for (std::size_t i = 0; i < u.size(); ++i) c += (u[i] - mu) * (v[i] - mv);
    return c / (u.size() - 1) / std::sqrt(var_of(u) * var_of(v));
  };
  double cx = corr(a, bx), cy = corr(a, by);
  INFO("corr x ", cx, " corr y ", cy);
  CHECK(cx > cy + 0.2);
}

TEST_CASE("pattern: zero intensity gives nothing") {
  auto dom = make_rectangle(0, 0, 1, 1);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.2});
  auto ll = constant(mesh, -std::numeric_limits<double>::infinity());
  CHECK(simulate_pattern(mesh, ll, dom, 1).empty());
  CHECK(integrate_intensity(mesh, ll, dom) == 0.0);
}

TEST_CASE("pattern: homogeneous count over 200 sims") {
  auto dom = make_rectangle(0, 0, 1, 1);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.2, .outer_extension = 0.3});
  auto ll = constant(mesh, std::log(50.0));
  CHECK(integrate_intensity(mesh, ll, dom) == doctest::Approx(50.0).epsilon(1e-10));
  double total = 0;
  for (int r = 0; r < 200; ++r) {
    auto pts = simulate_pattern(mesh, ll, dom, stream_seed(7, {stream::pattern, 0, static_cast<std::uint64_t>(r)}));
    for (auto p : pts) REQUIRE(contains(dom, p));
    total += pts.size();
  }
  CHECK(std::abs(total / 200 - 50.0) < 3 * std::sqrt(50.0 / 200));
}

TEST_CASE("pattern: x-histogram matches exp(a+bx) bin integrals") {
  const double a = 4.0, b = 1.5;
  auto dom = make_rectangle(0, 0, 1, 1);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.1});
  std::vector<double> ll(mesh.n_vertices());
  for (std::size_t v = 0; v < ll.size(); ++v) ll[v] = a + b * mesh.vertices[v].x;
  std::array<double, 10> expect;
  for (int k = 0; k < 10; ++k) expect[k] = std::exp(a) * (std::exp(b * (k + 1) / 10.0) - std::exp(b * k / 10.0)) / b;
  CHECK(integrate_intensity(mesh, ll, dom) == doctest::Approx(std::exp(a) * std::expm1(b) / b).epsilon(1e-8));
  const double crit = 21.666;  // chi-square 0.99 quantile, 9 df
  int pass = 0;
  const int runs = 100;
  for (int r = 0; r < runs; ++r) {
    auto pts = simulate_pattern(mesh, ll, dom, 1000 + r);
    std::array<double, 10> obs{};
    for (auto p : pts) obs[std::min(9, static_cast<int>(p.x * 10))] += 1;
    // conditional on n: multinomial with the bin integral shares
    double tot = 0;
    for (double e : expect) tot += e;
    double chi = 0;
    for (int k = 0; k < 10; ++k) {
      double e = pts.size() * expect[k] / tot;
      chi += (obs[k] - e) * (obs[k] - e) / e;
    }
    if (chi < crit) ++pass;
  }
  CHECK(pass >= 95);
}

TEST_CASE("pattern: rectangle counts match the intensity integral") {
  auto dom = make_rectangle(0, 0, 2, 1);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.1});
  std::vector<double> ll(mesh.n_vertices());
  for (std::size_t v = 0; v < ll.size(); ++v) ll[v] = 3.0 + std::sin(3 * mesh.vertices[v].x) * mesh.vertices[v].y;
  auto sub = make_rectangle(0.5, 0.0, 1.5, 0.6);
  // oracle: Riemann sum of the piecewise-linear interpolant over the sub-rectangle
  TriangleLocator loc(mesh);
  const int n = 400;
  double oracle = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      PlanarPoint p{0.5 + (i + 0.5) / n, 0.6 * (j + 0.5) / n};
      auto h = loc.locate(p);
      REQUIRE(h);
      const auto& t = mesh.triangles[h->triangle];
      oracle += std::exp(h->bary[0] * ll[t[0]] + h->bary[1] * ll[t[1]] + h->bary[2] * ll[t[2]]);
    }
  oracle *= 1.0 * 0.6 / (n * n);
  const int runs = 300;
  double cnt = 0;
  for (int r = 0; r < runs; ++r)
    for (auto p : simulate_pattern(mesh, ll, dom, 5000 + r))
      if (contains(sub, p)) cnt += 1;
  INFO("mean ", cnt / runs, " oracle ", oracle);
  CHECK(std::abs(cnt / runs - oracle) < 4 * std::sqrt(oracle / runs));
}

TEST_CASE("marks: negative binomial moments and determinism") {
  const int n = 10000;
  std::vector<double> lmu(n, std::log(5.0)), k(n, 1.727);
  auto y = simulate_marks(lmu, k, 11);
  std::vector<double> yd(y.begin(), y.end());
  INFO("mean ", mean_of(yd), " var ", var_of(yd));
  CHECK(std::abs(var_of(yd) / (5.0 + 25.0 / 1.727) - 1.0) < 0.1);
  CHECK(y == simulate_marks(lmu, k, 11));
  CHECK(y != simulate_marks(lmu, k, 12));

  std::vector<double> big(n, 1e8);
  auto p = simulate_marks(lmu, big, 13);
  std::vector<double> pd(p.begin(), p.end());
  CHECK(std::abs(mean_of(pd) / var_of(pd) - 1.0) < 0.05);
}

namespace {

SimConfig small_config() {
  SimConfig c;
  c.domain = make_rectangle(0, 0, 3, 3);
  c.mesh = build_mesh(c.domain, MeshOptions{.inner_res = 0.3, .outer_extension = 0.6, .outer_res = 0.6});
  c.spec.years = {2015, 2016};
  c.spec.months = {8, 9};
  c.spec.use_sst = false;
  c.field = SpdeParams{0.3, 0.3, 0.0, 0.5};
  for (auto& e : c.effects) {
    e.alpha = 2.0;
    e.beta = 0.3;
    e.size = 2.0;
    e.xi = {0.5, 1.0, 0.7, 0.2, 0.4, 0.6};
  }
  c.seed = 99;
  return c;
}

}  // namespace

TEST_CASE("dataset: zero intensity is empty") {
  auto c = small_config();
  for (auto& e : c.effects) e.alpha = -1000;
  CHECK(simulate_dataset(c).sightings.empty());
}

TEST_CASE("dataset: total count matches summed stratum integrals") {
  auto c = small_config();
  c.spec.random_effects = false;
  const int runs = 60;
  double total = 0, expected = 0;
  for (int r = 0; r < runs; ++r) {
    c.seed = 200 + r;
    auto res = simulate_dataset(c);
    total += res.sightings.size();
    for (const auto& v : res.truth.expected_count)
      for (double e : v) expected += e;
    for (const auto& s : res.sightings) REQUIRE(contains(c.domain, s.location));
  }
  // conditional on the fields the count is Poisson with the summed integral
  INFO("total ", total, " expected ", expected);
  CHECK(std::abs(total - expected) < 4 * std::sqrt(expected));
}

TEST_CASE("dataset: species streams are isolated") {
  auto c = small_config();
  auto a = simulate_dataset(c);
  c.effects[static_cast<int>(Species::Bowhead)].alpha = 0.5;
  c.effects[static_cast<int>(Species::Bowhead)].xi[0] = 3.0;
  auto b = simulate_dataset(c);
  auto only = [](const std::vector<Sighting>& v, Species s) {
    std::vector<std::tuple<double, double, int, int>> out;
    for (const auto& x : v)
      if (x.species == s) out.emplace_back(x.location.x, x.location.y, x.group_size, static_cast<int>(x.behavior));
    return out;
  };
  CHECK(only(a.sightings, Species::Beluga) == only(b.sightings, Species::Beluga));
  CHECK(only(a.sightings, Species::Bowhead) != only(b.sightings, Species::Bowhead));
}

TEST_CASE("dataset: rho moves marks, not locations") {
  auto c = small_config();
  c.spec.random_effects = false;
  auto a = simulate_dataset(c);
  for (auto& e : c.effects) e.rho = 1.5;
  auto d = simulate_dataset(c);
  REQUIRE(d.sightings.size() == a.sightings.size());
  bool differ = false;
  for (std::size_t i = 0; i < a.sightings.size(); ++i) {
    CHECK(a.sightings[i].location == d.sightings[i].location);
    differ = differ || a.sightings[i].group_size != d.sightings[i].group_size;
  }
  CHECK(differ);
}
