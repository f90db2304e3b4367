#include "coxmesh/sim.hpp"

#include <algorithm>
#include <cmath>

#include "coxmesh/error.hpp"

namespace coxmesh {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double finite_or_floor(double v) { return std::isfinite(v) ? v : -1e300; }

bool triangle_in_domain(const Mesh& mesh, int t, const DomainPolygon& domain) {
  const auto& tri = mesh.triangles[t];
  PlanarPoint c = (1.0 / 3) * (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]);
  return contains(domain, c);
}

// 7-point degree-5 rule on the reference triangle (barycentric, weight).
struct QuadPoint {
  double a, b, c, w;
};
const std::array<QuadPoint, 7>& dunavant5() {
  static const std::array<QuadPoint, 7> q = [] {
    const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
    const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
    return std::array<QuadPoint, 7>{{{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225},
                                     {a1, b1, b1, w1},
                                     {b1, a1, b1, w1},
                                     {b1, b1, a1, w1},
                                     {a2, b2, b2, w2},
                                     {b2, a2, b2, w2},
                                     {b2, b2, a2, w2}}};
  }();
  return q;
}

double integrate_exp_triangle(double l0, double l1, double l2, double area, int depth) {
  const double hi = std::max({l0, l1, l2}), lo = std::min({l0, l1, l2});
  if (hi < -700) return 0.0;
  if (hi - lo > 0.1 && depth < 12) {
    const double m01 = 0.5 * (l0 + l1), m12 = 0.5 * (l1 + l2), m02 = 0.5 * (l0 + l2);
    const double a = area / 4;
    return integrate_exp_triangle(l0, m01, m02, a, depth + 1) + integrate_exp_triangle(m01, l1, m12, a, depth + 1) +
           integrate_exp_triangle(m02, m12, l2, a, depth + 1) + integrate_exp_triangle(m01, m12, m02, a, depth + 1);
  }
  double s = 0.0;
  for (const auto& q : dunavant5()) s += q.w * std::exp(q.a * l0 + q.b * l1 + q.c * l2);
  return s * area;
}

}  // namespace

Vec simulate_field(const CholFactor& q_factor, std::uint64_t seed) { return sample_gmrf(q_factor, seed); }

Vec simulate_field(const Mesh& mesh, const SpdeParams& params, std::uint64_t seed) {
  return simulate_field(factorize(assemble_precision(mesh, params)), seed);
}

std::vector<PlanarPoint> simulate_pattern(const Mesh& mesh, std::span<const double> log_lambda,
                                          const DomainPolygon& domain, Rng& rng) {
  if (log_lambda.size() != mesh.n_vertices())
    throw numerical_error("sim", "log-intensity length does not match the mesh");
  std::vector<PlanarPoint> out;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    double l[3];
    bool any_in = false;
    for (int k = 0; k < 3; ++k) {
      l[k] = finite_or_floor(log_lambda[tri[k]]);
      if (std::isnan(log_lambda[tri[k]])) throw numerical_error("sim", "NaN log-intensity at vertex " + std::to_string(tri[k]));
      any_in = any_in || contains(domain, mesh.vertices[tri[k]]);
    }
    if (!any_in && !triangle_in_domain(mesh, static_cast<int>(t), domain)) continue;
    const double lmax = std::max({l[0], l[1], l[2]});
    if (lmax < -700) continue;
    const double bound = std::exp(lmax);
    const double area = mesh.triangle_area(t);
    std::poisson_distribution<long> npois(bound * area);
    const long n = npois(rng);
    const PlanarPoint p0 = mesh.vertices[tri[0]], p1 = mesh.vertices[tri[1]], p2 = mesh.vertices[tri[2]];
    for (long i = 0; i < n; ++i) {
      double r1 = u01(rng), r2 = u01(rng);
      if (r1 + r2 > 1.0) {
        r1 = 1.0 - r1;
        r2 = 1.0 - r2;
      }
      const double b0 = 1.0 - r1 - r2;
      const PlanarPoint p = b0 * p0 + r1 * p1 + r2 * p2;
      const double accept = std::exp(b0 * l[0] + r1 * l[1] + r2 * l[2] - lmax);
      if (accept > 1.0 + 1e-12) throw numerical_error("sim", "thinning bound violated");
      const double u = u01(rng);
      if (u < accept && contains(domain, p)) out.push_back(p);
    }
  }
  return out;
}

std::vector<PlanarPoint> simulate_pattern(const Mesh& mesh, std::span<const double> log_lambda,
                                          const DomainPolygon& domain, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_pattern(mesh, log_lambda, domain, rng);
}

double integrate_intensity(const Mesh& mesh, std::span<const double> log_lambda, const DomainPolygon& domain) {
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    if (!triangle_in_domain(mesh, static_cast<int>(t), domain)) continue;
    const auto& tri = mesh.triangles[t];
    total += integrate_exp_triangle(finite_or_floor(log_lambda[tri[0]]), finite_or_floor(log_lambda[tri[1]]),
                                    finite_or_floor(log_lambda[tri[2]]), mesh.triangle_area(t), 0);
  }
  return total;
}

std::vector<int> simulate_marks(std::span<const double> log_mu, std::span<const double> size, Rng& rng) {
  if (log_mu.size() != size.size()) throw numerical_error("sim", "mark inputs differ in length");
  std::vector<int> y(log_mu.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double mu = std::exp(log_mu[i]), k = size[i];
    if (!(k > 0) || !std::isfinite(mu)) throw numerical_error("sim", "invalid mark parameters");
    std::gamma_distribution<double> gam(k, mu / k);
    const double lam = gam(rng);
    std::poisson_distribution<int> pois(lam);
    y[i] = lam > 0 ? pois(rng) : 0;
  }
  return y;
}

std::vector<int> simulate_marks(std::span<const double> log_mu, std::span<const double> size, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_marks(log_mu, size, rng);
}

SimResult simulate_dataset(const SimConfig& c) {
  c.spec.validate();
  const Mesh& mesh = c.mesh;
  const int nv = static_cast<int>(mesh.n_vertices());
  SimResult res;
  SimTruth& truth = res.truth;

  std::vector<double> raw_d(nv);
  std::vector<double> in_d;
  for (int v = 0; v < nv; ++v) {
    raw_d[v] = distance_to_coast(mesh.vertices[v], c.domain);
    if (contains(c.domain, mesh.vertices[v])) in_d.push_back(raw_d[v]);
  }
  auto scaler_of = [](const std::vector<double>& v) {
    if (v.size() < 2) return Scaler{};
    double m = 0, ss = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) ss += (x - m) * (x - m);
    double sd = std::sqrt(ss / (v.size() - 1));
    return sd > 0 ? Scaler{m, sd} : Scaler{m, 1.0};
  };
  truth.dcoast_scaler = c.dcoast_scaler ? *c.dcoast_scaler : scaler_of(in_d);

  // strata in the same order as prepare_data: years outer, months inner
  struct St {
    int month, year, mi, yi;
    std::vector<double> sst;  // raw, per vertex
  };
  std::vector<St> strata;
  std::vector<double> in_sst;
  for (std::size_t yi = 0; yi < c.spec.years.size(); ++yi)
    for (std::size_t mi = 0; mi < c.spec.months.size(); ++mi) {
      St s{c.spec.months[mi], c.spec.years[yi], static_cast<int>(mi), static_cast<int>(yi), {}};
      if (c.spec.use_sst) {
        s.sst.resize(nv);
        for (int v = 0; v < nv; ++v) {
          s.sst[v] = sst_at(c.sst, s.month, s.year, mesh.vertices[v]);
          if (contains(c.domain, mesh.vertices[v])) in_sst.push_back(s.sst[v]);
        }
      }
      strata.push_back(std::move(s));
    }
  truth.sst_scaler = c.sst_scaler ? *c.sst_scaler : scaler_of(in_sst);

  if (c.spec.has_fields()) {
    CholFactor qf = factorize(assemble_precision(mesh, c.field));
    for (int f = 0; f < c.spec.n_fields(); ++f) {
      std::uint64_t g = c.spec.share_single_field ? 0 : static_cast<std::uint64_t>(c.spec.species[f]);
      truth.fields.push_back(simulate_field(qf, stream_seed(c.seed, {stream::field, g})));
    }
  }

  for (std::size_t gi = 0; gi < c.spec.species.size(); ++gi) {
    const Species sp = c.spec.species[gi];
    const int g = static_cast<int>(sp);
    const SpeciesEffects& e = c.effects[g];
    auto& me = truth.month_effect[g];
    auto& ye = truth.year_effect[g];
    me.assign(c.spec.months.size(), 0.0);
    ye.assign(c.spec.years.size(), 0.0);
    if (c.spec.has_random_effects()) {
      Rng rr = make_rng(c.seed, {stream::random_effects, static_cast<std::uint64_t>(g)});
      std::normal_distribution<double> z;
      for (auto& v : me) v = z(rr) / std::sqrt(e.tau_month);
      for (auto& v : ye) v = z(rr) / std::sqrt(e.tau_year);
    }
    const Vec* field = c.spec.has_fields() ? &truth.fields[c.spec.share_single_field ? 0 : gi] : nullptr;
    for (std::size_t si = 0; si < strata.size(); ++si) {
      const St& st = strata[si];
      std::vector<double> ll(nv);
      for (int v = 0; v < nv; ++v) {
        double eta = e.alpha + me[st.mi] + ye[st.yi];
        if (c.spec.use_dcoast) eta += e.beta * truth.dcoast_scaler.apply(raw_d[v]);
        if (c.spec.use_sst) eta += e.gamma * truth.sst_scaler.apply(st.sst[v]);
        if (field) eta += (*field)[v];
        ll[v] = eta;
      }
      truth.expected_count[g].push_back(integrate_intensity(mesh, ll, c.domain));
      const std::uint64_t sid = si;
      auto pts = simulate_pattern(mesh, ll, c.domain,
                                  stream_seed(c.seed, {stream::pattern, static_cast<std::uint64_t>(g), sid}));
      Rng brng = make_rng(c.seed, {stream::behaviors, static_cast<std::uint64_t>(g), sid});
      std::discrete_distribution<int> beh(e.behavior_probs.begin(), e.behavior_probs.end());
      std::vector<Behavior> behaviors(pts.size());
      for (auto& b : behaviors) b = static_cast<Behavior>(beh(brng));
      std::vector<int> sizes(pts.size(), 1);
      if (c.spec.include_marks && !pts.empty()) {
        Projector proj = field ? projector(mesh, pts) : Projector{};
        std::vector<double> lmu(pts.size()), k(pts.size(), e.size);
        for (std::size_t i = 0; i < pts.size(); ++i) {
          double z = e.xi[static_cast<int>(behaviors[i])];
          if (c.spec.use_dcoast) z += e.eta * truth.dcoast_scaler.apply(distance_to_coast(pts[i], c.domain));
          if (field && c.spec.has_rho()) z += e.rho * proj.apply_row(i, std::span<const double>(field->data(), nv));
          lmu[i] = z;
        }
        sizes = simulate_marks(lmu, k, stream_seed(c.seed, {stream::marks, static_cast<std::uint64_t>(g), sid}));
      }
      for (std::size_t i = 0; i < pts.size(); ++i) {
        Sighting s;
        s.location = pts[i];
        s.species = sp;
        s.month = st.month;
        s.year = st.year;
        s.behavior = behaviors[i];
        s.group_size = sizes[i];
        res.sightings.push_back(s);
      }
    }
  }
  return res;
}

std::vector<PlanarPoint> simulate_from_fit(const Model& model, const ModelFit& fit, const DomainPolygon& domain,
                                           Species species, int stratum, std::uint64_t seed) {
  Vec x = posterior_draw(fit, stream_seed(seed, {stream::posterior}));
  Vec ll = model.vertex_log_intensity(x, species, stratum);
  return simulate_pattern(model.data().mesh, std::span<const double>(ll.data(), ll.size()), domain,
                          stream_seed(seed, {stream::pattern, static_cast<std::uint64_t>(species),
                                             static_cast<std::uint64_t>(stratum)}));
}

}  // namespace coxmesh
