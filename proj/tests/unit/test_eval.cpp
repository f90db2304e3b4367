#include <doctest.h>

#include <cmath>
#include <random>

#include "coxmesh/eval.hpp"
#include "coxmesh/sim.hpp"
#include "toy.hpp"

using namespace coxmesh;

namespace {

double normal_log_pdf(double y, double m, double v) { return -0.5 * std::log(2 * M_PI * v) - 0.5 * (y - m) * (y - m) / v; }

std::vector<PlanarPoint> uniform_points(int n, double w, double h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(0, w), uy(0, h);
  std::vector<PlanarPoint> p(n);
  for (auto& q : p) q = {ux(rng), uy(rng)};
  return p;
}

std::vector<PlanarPoint> poisson_square(double lambda, std::mt19937_64& rng) {
  std::poisson_distribution<int> np(lambda);
  return uniform_points(np(rng), 1, 1, rng);
}

}  // namespace

TEST_CASE("scores: point-mass posterior has zero penalty") {
  std::vector<double> lp{-1.25, -0.5, -3.0, -7.75};
  ScoreAccumulator acc(lp.size());
  for (int d = 0; d < 50; ++d) acc.add_draw(lp);
  auto r = acc.report();
  CHECK(r.p_waic == 0.0);
  CHECK(r.lppd == doctest::Approx(-12.5).epsilon(1e-15));
  CHECK(r.waic == -2.0 * (r.lppd - r.p_waic));
  CHECK(r.waic_per_obs == r.waic / 4);
  CHECK(r.mean_log_score == r.lppd / 4);
}

TEST_CASE("scores: negative binomial point mass matches the pmf") {
  const double mu = 2.0, k = 1.727;
  std::vector<int> ys{0, 1, 2, 5, 17, 80};
  std::vector<double> lp;
  double direct = 0;
  for (int y : ys) {
    lp.push_back(nb_log_pmf(y, mu, k));
    double pmf = std::tgamma(y + k) / (std::tgamma(k) * std::tgamma(y + 1.0)) * std::pow(k / (k + mu), k) *
                 std::pow(mu / (k + mu), y);
    direct += std::log(pmf);
  }
  ScoreAccumulator acc(ys.size());
  for (int d = 0; d < 100; ++d) acc.add_draw(lp);
  CHECK(acc.report().lppd == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("scores: conjugate normal model against closed forms") {
  // y_i ~ N(theta, 1), theta | y ~ N(m, v)
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<double> y(20);
  for (auto& v : y) v = 0.7 + z(rng);
  const double prior_var = 4.0;
  double post_prec = 1.0 / prior_var + y.size(), sum = 0;
  for (double v : y) sum += v;
  const double m = sum / post_prec, v = 1.0 / post_prec;
  double lppd = 0, pw = 0;
  for (double yi : y) {
    lppd += normal_log_pdf(yi, m, 1.0 + v);
    pw += v * v / 2 + (yi - m) * (yi - m) * v;
  }
  ScoreAccumulator acc(y.size());
  std::vector<double> lp(y.size());
  for (int d = 0; d < 40000; ++d) {
    double th = m + std::sqrt(v) * z(rng);
    for (std::size_t i = 0; i < y.size(); ++i) lp[i] = normal_log_pdf(y[i], th, 1.0);
    acc.add_draw(lp);
  }
  auto r = acc.report();
  const double waic_exact = -2 * (lppd - pw);
  INFO("waic ", r.waic, " exact ", waic_exact, " lppd ", r.lppd, " exact ", lppd);
  CHECK(std::abs(r.waic / waic_exact - 1) < 0.005);
  CHECK(std::abs(r.mean_log_score / (lppd / y.size()) - 1) < 0.005);
  CHECK(r.p_waic >= 0);
  CHECK(r.waic == -2.0 * (r.lppd - r.p_waic));
}

TEST_CASE("scores: underflow is handled and zero density is flagged") {
  ScoreAccumulator acc(2);
  acc.add_draw(std::vector<double>{-2000.0, -std::numeric_limits<double>::infinity()});
  acc.add_draw(std::vector<double>{-2001.0, -std::numeric_limits<double>::infinity()});
  auto r = acc.report(0, 1);
  CHECK(r.lppd == doctest::Approx(-2000 + std::log((1 + std::exp(-1.0)) / 2)));
  auto all = acc.report();
  CHECK(all.n_zero_density == 1);
  CHECK(all.lppd == -std::numeric_limits<double>::infinity());
}

TEST_CASE("K: two points, no edge correction") {
  auto dom = make_rectangle(0, 0, 2, 3);
  std::vector<PlanarPoint> p{{1.0, 1.0}, {1.3, 1.4}};
  std::vector<double> lam{4.0, 4.0};
  std::vector<double> r{0.1, 0.49, 0.5, 0.8};
  auto k = k_inhom(p, lam, dom, r, EdgeCorrection::None);
  CHECK(k[0] == 0.0);
  CHECK(k[1] == 0.0);
  CHECK(k[2] == doctest::Approx(2.0 / (6.0 * 16.0)));
  CHECK(k[3] == doctest::Approx(2.0 / (6.0 * 16.0)));
  CHECK_THROWS(k_inhom(std::span<const PlanarPoint>(p.data(), 1), std::span<const double>(lam.data(), 1), dom, r));
  std::vector<double> bad{4.0, 0.0};
  CHECK_THROWS(k_inhom(p, bad, dom, r));
}

TEST_CASE("K: translation weights on a rectangle and symmetry") {
  auto dom = make_rectangle(0, 0, 2, 1);
  std::mt19937_64 rng(8);
  auto p = uniform_points(60, 2, 1, rng);
  std::vector<double> lam(p.size(), 30.0);
  auto r = default_radii(0.4, 8);
  auto k = k_inhom(p, lam, dom, r, EdgeCorrection::Translation);
  std::vector<double> oracle(r.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (i == j) continue;
      double dx = std::abs(p[i].x - p[j].x), dy = std::abs(p[i].y - p[j].y);
      for (std::size_t q = 0; q < r.size(); ++q)
        if (std::hypot(dx, dy) <= r[q]) oracle[q] += 1.0 / (900.0 * (2 - dx) * (1 - dy));
    }
  for (std::size_t q = 0; q < r.size(); ++q) CHECK(k[q] == doctest::Approx(oracle[q]).epsilon(1e-10));
  for (std::size_t q = 1; q < r.size(); ++q) CHECK(k[q] >= k[q - 1]);
  auto rev = p;
  std::reverse(rev.begin(), rev.end());
  auto k2 = k_inhom(rev, lam, dom, r, EdgeCorrection::Translation);
  for (std::size_t q = 0; q < r.size(); ++q) CHECK(k2[q] == doctest::Approx(k[q]).epsilon(1e-12));
  auto holed = make_domain(make_rectangle(0, 0, 2, 1).outer, {make_rectangle(0.5, 0.4, 0.6, 0.5).outer});
  CHECK_THROWS(k_inhom(p, lam, holed, r, EdgeCorrection::Translation));
}

TEST_CASE("K: border correction against brute force") {
  auto dom = make_rectangle(0, 0, 1, 1);
  std::mt19937_64 rng(9);
  auto p = uniform_points(80, 1, 1, rng);
  std::vector<double> lam(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) lam[i] = 50 + 60 * p[i].x;
  std::vector<double> r{0.05, 0.1, 0.2};
  auto k = k_inhom(p, lam, dom, r, EdgeCorrection::Border);
  for (std::size_t q = 0; q < r.size(); ++q) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      double b = std::min({p[i].x, p[i].y, 1 - p[i].x, 1 - p[i].y});
      if (b < r[q]) continue;
      for (std::size_t j = 0; j < p.size(); ++j)
        if (i != j && distance(p[i], p[j]) <= r[q]) s += 1 / (lam[i] * lam[j]);
    }
    double eroded = (1 - 2 * r[q]) * (1 - 2 * r[q]);
    CHECK(k[q] == doctest::Approx(s / eroded).epsilon(0.01));
  }
}

TEST_CASE("K: homogeneous Poisson has zero normalized mean") {
  auto dom = make_rectangle(0, 0, 1, 1);
  std::mt19937_64 rng(10);
  std::vector<double> r{0.02, 0.05, 0.1, 0.15, 0.2};
  for (auto corr : {EdgeCorrection::Border, EdgeCorrection::Translation}) {
    std::vector<double> mean(r.size());
    for (int s = 0; s < 100; ++s) {
      auto p = poisson_square(200, rng);
      std::vector<double> lam(p.size(), static_cast<double>(p.size()));  // plug-in n / |A|
      auto nk = normalize_k(k_inhom(p, lam, dom, r, corr), r);
      for (std::size_t q = 0; q < r.size(); ++q) mean[q] += nk[q] / 100;
    }
    for (std::size_t q = 0; q < r.size(); ++q) {
      INFO(to_string(corr), " r=", r[q], " mean=", mean[q]);
      CHECK(std::abs(mean[q]) < 0.05);
    }
  }
}

TEST_CASE("K: Thomas process is clustered") {
  auto dom = make_rectangle(0, 0, 1, 1);
  std::mt19937_64 rng(11);
  std::poisson_distribution<int> np(20), nk(10);
  std::normal_distribution<double> off(0.0, 0.02);
  std::vector<PlanarPoint> pts;
  // parents on a dilated window so clusters near the edge are not lost
  std::uniform_real_distribution<double> u(-0.1, 1.1);
  const int parents = np(rng);
  for (int i = 0; i < static_cast<int>(parents * 1.44); ++i) {
    PlanarPoint c{u(rng), u(rng)};
    for (int j = nk(rng); j > 0; --j) {
      PlanarPoint q{c.x + off(rng), c.y + off(rng)};
      if (contains(dom, q)) pts.push_back(q);
    }
  }
  std::vector<double> lam(pts.size(), 200.0);
  std::vector<double> r{0.05};
  auto nk5 = normalize_k(k_inhom(pts, lam, dom, r), r);
  INFO("normalized K at 0.05: ", nk5[0]);
  CHECK(nk5[0] > 0.5);
}

TEST_CASE("quantile and radii helpers") {
  CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3);
  CHECK(quantile({1, 2}, 0.25) == 1.25);
  CHECK(std::isnan(quantile({}, 0.5)));
  auto r = default_radii(1.0, 4);
  CHECK(r == std::vector<double>{0.25, 0.5, 0.75, 1.0});
  CHECK(parse_edge_correction("translation") == EdgeCorrection::Translation);
  CHECK_THROWS(parse_edge_correction("ripley"));
}

namespace {

struct SmallFit {
  DomainPolygon dom = make_rectangle(0, 0, 2, 2);
  Mesh mesh;
  std::unique_ptr<Model> model;
  ModelFit fit;
};

SmallFit small_fit(bool marks = true) {
  SmallFit s;
  s.mesh = build_mesh(s.dom, MeshOptions{.inner_res = 0.25, .outer_extension = 0.5});
  ModelSpec spec;
  spec.species = {Species::Beluga, Species::Bowhead};
  spec.months = {8};
  spec.years = {2015};
  spec.use_sst = false;
  spec.random_effects = false;
  spec.include_marks = marks;
  auto pts = toy::random_sightings(90, s.dom, 21);
  s.model = std::make_unique<Model>(spec, prepare_data(spec, s.mesh, s.dom, pts, {}));
  HyperState h = s.model->default_hyper();
  h.theta = {std::log(0.3), std::log(0.3), 0.0, std::log(0.5)};
  h.log_size = {std::log(2.0), std::log(3.0)};
  s.fit = fit_at(*s.model, h);
  return s;
}

}  // namespace

TEST_CASE("scores on a fitted model") {
  auto s = small_fit();
  auto sc = score(*s.model, s.fit, {200, 3});
  CHECK(sc.marks.n == 90);
  CHECK(sc.combined.n == sc.marks.n + sc.locations.n);
  CHECK(sc.combined.lppd == doctest::Approx(sc.marks.lppd + sc.locations.lppd).epsilon(1e-12));
  CHECK(sc.combined.p_waic == doctest::Approx(sc.marks.p_waic + sc.locations.p_waic).epsilon(1e-12));
  CHECK(sc.combined.waic == -2.0 * (sc.combined.lppd - sc.combined.p_waic));
  CHECK(sc.combined.p_waic > 0);
  auto again = score(*s.model, s.fit, {200, 3});
  CHECK(again.combined.waic == sc.combined.waic);
  CHECK_THROWS(waic(*s.model, s.fit, 499, 1));
  CHECK_THROWS(mean_log_score(*s.model, s.fit, 99, 1));

  // near-degenerate posterior reduces to the plug-in density
  ModelFit sharp = s.fit;
  sharp.factor = std::make_shared<CholFactor>(factorize(s.fit.hessian.scaled(1e16)));
  auto pm = score(*s.model, sharp, {100, 4});
  CHECK(pm.marks.lppd == doctest::Approx(-s.model->nb_mark_nll(s.fit.mode, s.fit.hyper)).epsilon(1e-6));
  CHECK(pm.combined.p_waic < 1e-6);
  // location units: Poisson counts of nearest-vertex cells, brute force
  const auto& d = s.model->data();
  double loc = 0;
  for (int g = 0; g < 2; ++g) {
    Species sp = s.model->spec().species[g];
    Vec eta = s.model->vertex_log_intensity(s.fit.mode, sp, 0);
    const auto& st = d.strata[0];
    for (std::size_t k = 0; k < st.node.size(); ++k) {
      int v = st.node[k], n = 0;
      for (const auto& p : d.points) {
        if (p.species != sp) continue;
        int best = 0;
        for (std::size_t u = 1; u < d.mesh.n_vertices(); ++u)
          if (distance(d.mesh.vertices[u], p.location) < distance(d.mesh.vertices[best], p.location)) best = u;
        if (best == v) ++n;
      }
      double e = std::exp(eta[v]) * st.weight[k];
      loc += n * std::log(e) - e - std::lgamma(n + 1.0);
    }
  }
  CHECK(pm.locations.lppd == doctest::Approx(loc).epsilon(1e-6));
}

TEST_CASE("envelope: shape, ordering and determinism") {
  auto s = small_fit(false);
  auto r = default_radii(0.6, 12);
  EnvelopeOptions opt;
  opt.n_sim = 19;
  opt.seed = 4;
  auto k = k_envelope(*s.model, s.fit, s.dom, Species::Beluga, 8, 2015, r, opt);
  CHECK(k.radii == r);
  CHECK(k.khat.size() == r.size());
  CHECK(k.lo.size() == r.size());
  CHECK(k.simulated.size() == 19);
  for (std::size_t q = 0; q < r.size(); ++q) CHECK(k.lo[q] <= k.hi[q]);
  auto k2 = k_envelope(*s.model, s.fit, s.dom, Species::Beluga, 8, 2015, r, opt);
  CHECK(k2.lo == k.lo);
  CHECK(k2.hi == k.hi);
  CHECK(k2.khat == k.khat);
  CHECK_THROWS(k_envelope(*s.model, s.fit, s.dom, Species::Beluga, 9, 2015, r, opt));
}

TEST_CASE("envelope: refit and plug-in intensities against direct computation") {
  auto dom = make_rectangle(0, 0, 2, 2);
  auto mesh = build_mesh(dom, MeshOptions{.inner_res = 0.25, .outer_extension = 0.5});
  ModelSpec spec;
  spec.species = {Species::Beluga};
  spec.months = {8};
  spec.years = {2015};
  spec.use_sst = spec.use_dcoast = false;
  spec.random_effects = false;
  auto pts = toy::random_sightings(80, dom, 5, {Species::Beluga});
  Model model(spec, prepare_data(spec, mesh, dom, pts, {}));
  HyperState h = model.default_hyper();
  h.theta = {std::log(0.3), std::log(0.4), 0.2, std::log(0.7)};
  h.log_size = {std::log(2.0), 0.0};
  h.rho = {0.8, 0.0};
  auto fit = fit_at(model, h);
  auto r = default_radii(0.5, 8);

  std::vector<PlanarPoint> obs;
  for (const auto& p : model.data().points) obs.push_back(p.location);
  auto k_with = [&](const Model& m, const Vec& x) {
    const Vec eta = m.vertex_log_intensity(x, Species::Beluga, 0);
    auto lam = projector(mesh, obs).apply(std::vector<double>(eta.begin(), eta.end()));
    for (auto& v : lam) v = std::exp(v);
    return k_inhom(obs, lam, dom, r);
  };

  EnvelopeOptions opt;
  opt.n_sim = 3;
  opt.intensity = EnvelopeIntensity::PlugIn;
  auto plug = k_envelope(model, fit, dom, Species::Beluga, 8, 2015, r, opt);
  auto k_plug = k_with(model, fit.mode);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(plug.khat[i] == doctest::Approx(k_plug[i]).epsilon(1e-12));

  // refit: conditional mode of the location-only model at the same hyperparameters
  ModelSpec loc = spec;
  loc.include_marks = false;
  Model lm(loc, model.data());
  auto lfit = fit_at(lm, h);
  auto k_loc = k_with(lm, lfit.mode);
  opt.intensity = EnvelopeIntensity::Refit;
  auto refit = k_envelope(model, fit, dom, Species::Beluga, 8, 2015, r, opt);
  double diff = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(refit.khat[i] == doctest::Approx(k_loc[i]).epsilon(1e-6));
    diff = std::max(diff, std::abs(refit.khat[i] - plug.khat[i]) / plug.khat[i]);
  }
  CHECK(diff > 1e-4);  // the marks pull the joint mode away from the location-only one
}
