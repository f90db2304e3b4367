#include <doctest.h>

#include <cmath>
#include <random>

#include "coxmesh/error.hpp"
#include "coxmesh/model.hpp"
#include "unit/toy.hpp"

using namespace coxmesh;

namespace {

ModelSpec minimal_spec() {
  ModelSpec s;
  s.species = {Species::Beluga};
  s.months = {8};
  s.years = {2015};
  s.use_dcoast = false;
  s.use_sst = false;
  s.include_marks = false;
  s.baseline = true;
  return s;
}

// Random vector on the fixed/random/mark part and a smooth field.
Vec random_state(const LatentLayout& L, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, scale);
  Vec x(L.dim);
  for (int i = 0; i < L.dim; ++i) x[i] = z(rng);
  return x;
}

struct Toy {
  DomainPolygon dom = make_rectangle(0, 0, 1, 1);
  Mesh mesh;
  std::vector<CovariateGrid> sst;
  std::vector<Sighting> pts;
  ModelSpec spec;
};

Toy two_species_toy() {
  Toy t;
  t.mesh = build_mesh(t.dom, MeshOptions{.inner_res = 0.25});
  t.sst = {toy::linear_grid(-0.1, -0.1, 1.1, 1.1, 0.1, 2.0, 1.0, -0.5, 8, 2015),
           toy::linear_grid(-0.1, -0.1, 1.1, 1.1, 0.1, 1.0, 0.3, 0.5, 9, 2015),
           toy::linear_grid(-0.1, -0.1, 1.1, 1.1, 0.1, 3.0, -1.0, 0.2, 8, 2016),
           toy::linear_grid(-0.1, -0.1, 1.1, 1.1, 0.1, 0.0, 0.5, 0.5, 9, 2016)};
  t.pts = toy::random_sightings(50, t.dom, 4);
  std::mt19937_64 rng(8);
  for (auto& s : t.pts) {
    s.month = 8 + static_cast<int>(rng() % 2);
    s.year = 2015 + static_cast<int>(rng() % 2);
  }
  t.spec.months = {8, 9};
  t.spec.years = {2015, 2016};
  return t;
}

}  // namespace

TEST_CASE("latent and hyper layouts") {
  ModelSpec s;
  s.years = {2012, 2013, 2014};
  auto L = LatentLayout::build(s, 10);
  // 2 fields + per species: alpha, beta, gamma, 4 months, 3 years, eta, 6 xi
  CHECK(L.dim == 20 + 2 * (3 + 4 + 3 + 1 + 6));
  CHECK(L.names[L.block(Species::Bowhead).xi + 1] == "mark_feed_bowhead");
  HyperLayout H(s);
  CHECK(H.size() == 4 + 4 + 2 + 2);
  HyperState h;
  h.theta = {1, 2, 3, 4};
  h.rho = {0.5, -0.25};
  h.log_size = {0.1, 0.2};
  auto back = H.unpack(H.pack(h), HyperState{});
  CHECK(back.theta == h.theta);
  CHECK(back.rho == h.rho);
  s.tie_rho = true;
  CHECK(HyperLayout(s).size() == 11);
  s.baseline = true;
  CHECK(HyperLayout(s).size() == 2);
  CHECK(LatentLayout::build(s, 10).field_offset.empty());
  ModelSpec bad;
  CHECK_THROWS_AS(bad.validate(), Error);  // no years
}

TEST_CASE("log_intensity: zero, intercept and covariate slope") {
  auto dom = make_rectangle(0, 0, 1, 1);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.25});
  ModelSpec spec = minimal_spec();
  spec.use_dcoast = true;
  auto data = prepare_data(spec, mesh, dom, toy::random_sightings(10, dom, 1, {Species::Beluga}), {});
  Model m(spec, data);
  const auto& b = m.layout().block(Species::Beluga);
  std::vector<PlanarPoint> locs{{0.2, 0.3}, {0.7, 0.1}};
  std::vector<double> dz{0.0, 1.0}, sz{0.0, 0.0};
  Vec x = Vec::Zero(m.layout().dim);
  for (double v : m.log_intensity(x, Species::Beluga, locs, 8, 2015, dz, sz)) CHECK(v == 0.0);
  x[b.alpha] = -26.0;
  for (double v : m.log_intensity(x, Species::Beluga, locs, 8, 2015, dz, sz)) CHECK(v == -26.0);
  x[b.beta] = -1.542;
  auto li = m.log_intensity(x, Species::Beluga, locs, 8, 2015, dz, sz);
  CHECK(li[0] - li[1] == doctest::Approx(1.542).epsilon(1e-14));
  std::vector<double> bad{0.0, std::nan("")};
  CHECK_THROWS_AS(m.log_intensity(x, Species::Beluga, locs, 8, 2015, bad, sz), Error);
}

TEST_CASE("lgcp_nll: homogeneous closed forms") {
  auto dom = make_rectangle(0, 0, 1, 1);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.2});
  auto spec = minimal_spec();
  auto pts = toy::random_sightings(37, dom, 2, {Species::Beluga});
  Model m(spec, prepare_data(spec, mesh, dom, pts, {}));
  Vec x = Vec::Zero(m.layout().dim);
  const double lam = 3.7;
  x[m.layout().block(Species::Beluga).alpha] = std::log(lam);
  CHECK(m.lgcp_nll(x) == doctest::Approx(-37 * std::log(lam) + lam).epsilon(1e-12));

  auto dom3 = make_rectangle(0, 0, 3, 1);
  auto mesh3 = build_mesh(dom3, MeshOptions{.inner_res = 0.3});
  Model empty(spec, prepare_data(spec, mesh3, dom3, {}, {}));
  Vec x3 = Vec::Zero(empty.layout().dim);
  x3[0] = std::log(2.0);
  CHECK(empty.lgcp_nll(x3) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("lgcp_nll: quadrature of exp(x + y) against a Riemann sum") {
  auto dom = make_rectangle(0, 0, 1, 1);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.02});
  auto spec = minimal_spec();
  spec.use_sst = true;
  std::vector<CovariateGrid> grid{toy::linear_grid(-0.05, -0.05, 1.05, 1.05, 0.05, 0.0, 1.0, 1.0)};
  DataOptions opt;
  opt.sst_scaler = Scaler{0.0, 1.0};
  Model m(spec, prepare_data(spec, mesh, dom, {}, grid, opt));
  Vec x = Vec::Zero(m.layout().dim);
  x[m.layout().block(Species::Beluga).gamma] = 1.0;
  const int k = 1000;  // 10^6 midpoint cells
  double riemann = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) riemann += std::exp((i + 0.5) / k + (j + 0.5) / k);
  riemann /= double(k) * k;
  CHECK(std::abs(m.lgcp_nll(x) - riemann) / riemann < 1e-3);
}

TEST_CASE("nb_log_pmf") {
  double poisson = 3 * std::log(2.0) - 2.0 - std::lgamma(4.0);
  CHECK(std::abs(nb_log_pmf(3, 2.0, 1e8) - poisson) < 1e-4);
  CHECK(nb_log_pmf(0, 2.5, 1.727) == doctest::Approx(1.727 * std::log(1.727 / (1.727 + 2.5))));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> umu(0.1, 10.0), uk(0.3, 50.0);
  for (int rep = 0; rep < 20; ++rep) {
    double mu = umu(rng), k = uk(rng), s = 0.0, mean = 0.0;
    for (int y = 0; y <= 500; ++y) {
      double p = std::exp(nb_log_pmf(y, mu, k));
      s += p;
      mean += y * p;
    }
    CHECK(std::abs(s - 1.0) < 1e-8);
    CHECK(mean == doctest::Approx(mu).epsilon(1e-6));
  }
  // the two evaluation branches agree
  CHECK(nb_log_pmf(64, 30.0, 2.0) ==
        doctest::Approx(std::lgamma(66.0) - std::lgamma(2.0) - std::lgamma(65.0) + 2 * std::log(2.0 / 32.0) +
                        64 * std::log(30.0 / 32.0))
            .epsilon(1e-12));
  CHECK_THROWS_AS(nb_log_pmf(1, 1.0, 0.0), Error);
}

TEST_CASE("neg_log_posterior: zero data and zero state") {
  auto t = two_species_toy();
  std::vector<CovariateGrid> effort;
  for (const auto& g : t.sst) {
    auto e = g;
    std::fill(e.values.begin(), e.values.end(), 0.0);
    effort.push_back(e);
  }
  DataOptions opt;
  opt.effort = effort;
  Model m(t.spec, prepare_data(t.spec, t.mesh, t.dom, {}, t.sst, opt));
  auto obj = m.objective(m.default_hyper());
  CHECK(obj->value(Vec::Zero(m.layout().dim)) == 0.0);
}

TEST_CASE("neg_log_posterior: gradient and Hessian against finite differences") {
  auto t = two_species_toy();
  auto data = prepare_data(t.spec, t.mesh, t.dom, t.pts, t.sst);
  INFO("vertices ", t.mesh.n_vertices());
  CHECK(t.mesh.n_vertices() >= 20);
  CHECK(t.mesh.n_vertices() <= 40);
  Model m(t.spec, data);
  HyperState h = m.default_hyper();
  h.theta = {std::log(0.2), std::log(0.3), 0.3, 0.0};
  h.log_size = {std::log(1.727), std::log(16.3)};
  h.rho = {0.4, -0.7};
  auto obj = m.objective(h);
  Vec x = random_state(m.layout(), 3);
  Vec g;
  SymSparse H;
  obj->evaluate(x, &g, &H);
  Eigen::MatrixXd Hd = H.dense();
  const double step = 1e-5;
  double max_rel = 0.0, max_rel_h = 0.0;
  for (int i = 0; i < m.layout().dim; ++i) {
    Vec xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    double fd = (obj->value(xp) - obj->value(xm)) / (2 * step);
    max_rel = std::max(max_rel, std::abs(g[i] - fd) / std::max(1.0, std::abs(fd)));
    Vec gp, gm;
    obj->evaluate(xp, &gp, nullptr);
    obj->evaluate(xm, &gm, nullptr);
    Vec col = (gp - gm) / (2 * step);
    max_rel_h = std::max(max_rel_h, std::abs(Hd(i, i) - col[i]) / std::max(1.0, std::abs(col[i])));
    // the full column matches too (the NB curvature is exact)
    CHECK((Hd.col(i) - col).lpNorm<Eigen::Infinity>() < 1e-4 * std::max(1.0, col.lpNorm<Eigen::Infinity>()));
  }
  CHECK(max_rel < 1e-5);
  CHECK(max_rel_h < 1e-3);
  // Hessian is SPD
  CHECK_NOTHROW(factorize(H));
}

TEST_CASE("neg_log_posterior: quadratic form, separability and mark coupling") {
  auto t = two_species_toy();
  auto data = prepare_data(t.spec, t.mesh, t.dom, t.pts, t.sst);
  Model m(t.spec, data);
  const auto& L = m.layout();
  HyperState h = m.default_hyper();
  Vec x = random_state(L, 9);

  // prior part alone equals 1/2 w'Qw + diagonal terms
  {
    ModelSpec s2 = t.spec;
    std::vector<CovariateGrid> effort;
    for (const auto& g : t.sst) {
      auto e = g;
      std::fill(e.values.begin(), e.values.end(), 0.0);
      effort.push_back(e);
    }
    DataOptions opt;
    opt.effort = effort;
    Model m0(s2, prepare_data(s2, t.mesh, t.dom, {}, t.sst, opt));
    Vec x0 = random_state(m0.layout(), 10);
    auto q = assemble_precision(m0.data().fem, h.spde());
    double expect = 0.0;
    for (int f = 0; f < 2; ++f) {
      Vec w = x0.segment(m0.layout().field_offset[f], m0.layout().n_vertices);
      expect += 0.5 * w.dot(q.multiply(w));
    }
    for (int i = 0; i < m0.layout().dim; ++i) {
      const std::string& nm = m0.layout().names[i];
      if (m0.layout().is_fixed[i]) expect += 0.5 * x0[i] * x0[i] / 100.0;
      if (nm.rfind("month", 0) == 0) expect += 0.5 * std::exp(h.log_tau_month[0]) * x0[i] * x0[i];
      if (nm.rfind("year", 0) == 0) expect += 0.5 * std::exp(h.log_tau_year[0]) * x0[i] * x0[i];
    }
    CHECK(m0.objective(h)->value(x0) == doctest::Approx(expect).epsilon(1e-13));
  }

  // without marks the objective ignores size and rho exactly
  {
    ModelSpec s2 = t.spec;
    s2.include_marks = false;
    Model mm(s2, prepare_data(s2, t.mesh, t.dom, t.pts, t.sst));
    Vec xm = random_state(mm.layout(), 11);
    HyperState h2 = h;
    h2.log_size = {3.0, -2.0};
    h2.rho = {1.5, 2.5};
    CHECK(mm.objective(h)->value(xm) == mm.objective(h2)->value(xm));
    CHECK(mm.nb_mark_nll(xm, h2) == 0.0);
  }

  // perturbing a field changes the mark likelihood iff rho != 0
  {
    Vec xp = x;
    const auto& b = L.block(Species::Beluga);
    const int off = L.field_offset[b.field];
    for (int v = 0; v < L.n_vertices; ++v) xp[off + v] += 0.3;
    HyperState h0 = h, h1 = h;
    h0.rho = {0.0, 0.0};
    h1.rho = {0.5, 0.0};
    CHECK(m.nb_mark_nll(x, h0) == m.nb_mark_nll(xp, h0));
    CHECK(m.nb_mark_nll(x, h1) != m.nb_mark_nll(xp, h1));
  }
}

TEST_CASE("baseline intercept-only optimum is log(n / total weight)") {
  auto dom = make_rectangle(0, 0, 2, 1.5);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.2});
  auto spec = minimal_spec();
  spec.months = {7, 8};
  auto pts = toy::random_sightings(40, dom, 6, {Species::Beluga});
  Model m(spec, prepare_data(spec, mesh, dom, pts, {}));
  // derivative of the nll in alpha vanishes at the closed form
  const double a = std::log(40.0 / (3.0 * 2));
  Vec x = Vec::Zero(m.layout().dim);
  x[0] = a;
  const double h = 1e-6;
  Vec xp = x, xm = x;
  xp[0] += h;
  xm[0] -= h;
  CHECK(std::abs((m.lgcp_nll(xp) - m.lgcp_nll(xm)) / (2 * h)) < 1e-6);
}

TEST_CASE("prepare_data: errors and strata") {
  auto dom = make_rectangle(0, 0, 1, 1);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.25});
  auto spec = minimal_spec();
  auto pts = toy::random_sightings(5, dom, 1, {Species::Beluga}, 9, 2015);
  CHECK_THROWS_AS(prepare_data(spec, mesh, dom, pts, {}), Error);  // month 9 not modelled
  spec.use_sst = true;
  auto ok = toy::random_sightings(5, dom, 1, {Species::Beluga});
  try {
    prepare_data(spec, mesh, dom, ok, {});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("missing covariate stratum") != std::string::npos);
  }
  spec.use_sst = false;
  spec.months = {7, 8, 9};
  spec.years = {2014, 2015};
  CHECK(prepare_data(spec, mesh, dom, ok, {}).strata.size() == 6);
  spec.observed_strata_only = true;
  CHECK(prepare_data(spec, mesh, dom, ok, {}).strata.size() == 1);
}
