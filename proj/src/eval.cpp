#include "coxmesh/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "coxmesh/error.hpp"
#include "coxmesh/parallel.hpp"
#include "coxmesh/sim.hpp"

namespace coxmesh {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ScoreAccumulator::ScoreAccumulator(std::size_t n)
    : max_(n, -kInf), sum_(n, 0.0), mean_(n, 0.0), m2_(n, 0.0) {}

void ScoreAccumulator::add_draw(std::span<const double> lp) {
  if (lp.size() != max_.size()) throw numerical_error("eval", "score unit count mismatch");
  ++draws_;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    const double v = lp[i];
    if (std::isnan(v)) throw numerical_error("eval", "NaN log density at unit " + std::to_string(i));
    if (v > max_[i]) {
      sum_[i] = (max_[i] == -kInf ? 0.0 : sum_[i] * std::exp(max_[i] - v)) + 1.0;
      max_[i] = v;
    } else if (v > -kInf) {
      sum_[i] += std::exp(v - max_[i]);
    }
    if (std::isfinite(mean_[i])) {
      const double d = v - mean_[i];
      mean_[i] += d / static_cast<double>(draws_);
      m2_[i] += d * (v - mean_[i]);
    }
  }
}

ScoreReport ScoreAccumulator::report(std::size_t begin, std::size_t end) const {
  ScoreReport r;
  r.n = end - begin;
  if (draws_ == 0) throw numerical_error("eval", "no posterior draws");
  const double log_s = std::log(static_cast<double>(draws_));
  for (std::size_t i = begin; i < end; ++i) {
    if (max_[i] == -kInf) {
      ++r.n_zero_density;
      r.lppd = -kInf;
      continue;
    }
    r.lppd += max_[i] + std::log(sum_[i]) - log_s;
    if (draws_ > 1 && std::isfinite(m2_[i])) r.p_waic += m2_[i] / static_cast<double>(draws_ - 1);
  }
  r.waic = -2.0 * (r.lppd - r.p_waic);
  r.mean_log_score = r.n ? r.lppd / static_cast<double>(r.n) : 0.0;
  r.waic_per_obs = r.n ? r.waic / static_cast<double>(r.n) : 0.0;
  return r;
}

namespace {

struct LocationUnit {
  int species_pos, stratum, vertex;
  double weight;
  int count;
};

std::vector<LocationUnit> location_units(const Model& model) {
  const ModelData& d = model.data();
  std::vector<PlanarPoint> locs;
  for (const auto& p : d.points) locs.push_back(p.location);
  auto nearest = nearest_vertices(d.mesh, locs);
  std::vector<LocationUnit> units;
  const auto& species = model.spec().species;
  for (int g = 0; g < static_cast<int>(species.size()); ++g)
    for (int s = 0; s < static_cast<int>(d.strata.size()); ++s) {
      const Stratum& st = d.strata[s];
      std::vector<int> pos(d.mesh.n_vertices(), -1);
      for (std::size_t k = 0; k < st.node.size(); ++k) {
        pos[st.node[k]] = static_cast<int>(units.size());
        units.push_back({g, s, st.node[k], st.weight[k], 0});
      }
      for (std::size_t i = 0; i < d.points.size(); ++i) {
        const auto& p = d.points[i];
        if (p.species != species[g] || p.stratum != s) continue;
        const int v = nearest[i];
        if (pos[v] < 0) {
          pos[v] = static_cast<int>(units.size());
          units.push_back({g, s, v, 0.0, 0});
        }
        ++units[pos[v]].count;
      }
    }
  return units;
}

double poisson_log_pmf(int n, double log_mean, double weight) {
  if (weight <= 0.0) return n == 0 ? 0.0 : -kInf;
  const double lm = log_mean + std::log(weight);
  return n * lm - std::exp(lm) - std::lgamma(n + 1.0);
}

}  // namespace

Scores score(const Model& model, const ModelFit& fit, const ScoreOptions& opt) {
  if (opt.n_draws < 1) throw config_error("eval", "n_draws must be positive");
  if (fit.mode.size() != model.layout().dim) throw config_error("eval", "fit does not match the model layout");
  const ModelData& d = model.data();
  const bool marks = model.spec().include_marks;
  const std::size_t n_marks = marks ? d.points.size() : 0;
  auto units = location_units(model);
  const std::size_t n = n_marks + units.size();
  std::vector<DesignRow> mark_rows;
  std::vector<double> mark_k;
  for (std::size_t i = 0; i < n_marks; ++i) {
    mark_rows.push_back(model.mark_design(d.points[i], fit.hyper));
    mark_k.push_back(std::exp(fit.hyper.log_size[static_cast<int>(d.points[i].species)]));
  }
  const auto& species = model.spec().species;
  const int n_strata = static_cast<int>(d.strata.size());

  ScoreAccumulator acc(n);
  const std::size_t batch = std::max<std::size_t>(1, 2 * thread_count());
  std::vector<std::vector<double>> lp(batch, std::vector<double>(n));
  for (int d0 = 0; d0 < opt.n_draws; d0 += static_cast<int>(batch)) {
    const std::size_t m = std::min<std::size_t>(batch, opt.n_draws - d0);
    parallel_for(m, [&](std::size_t b) {
      const Vec x = posterior_draw(fit, stream_seed(opt.seed, {stream::scores, static_cast<std::uint64_t>(d0 + b)}));
      auto& out = lp[b];
      for (std::size_t i = 0; i < n_marks; ++i) {
        double eta = 0.0;
        for (auto [j, w] : mark_rows[i]) eta += w * x[j];
        out[i] = nb_log_pmf(d.points[i].group_size, std::exp(eta), mark_k[i]);
      }
      std::vector<Vec> eta(species.size() * n_strata);
      for (std::size_t g = 0; g < species.size(); ++g)
        for (int s = 0; s < n_strata; ++s) eta[g * n_strata + s] = model.vertex_log_intensity(x, species[g], s);
      for (std::size_t u = 0; u < units.size(); ++u) {
        const auto& lu = units[u];
        out[n_marks + u] = poisson_log_pmf(lu.count, eta[lu.species_pos * n_strata + lu.stratum][lu.vertex], lu.weight);
      }
    });
    for (std::size_t b = 0; b < m; ++b) acc.add_draw(lp[b]);
  }
  Scores sc;
  sc.marks = acc.report(0, n_marks);
  sc.locations = acc.report(n_marks, n);
  sc.combined = acc.report();
  return sc;
}

ScoreReport waic(const Model& model, const ModelFit& fit, int n_draws, std::uint64_t seed) {
  if (n_draws < 500) throw config_error("eval", "waic needs at least 500 draws");
  return score(model, fit, {n_draws, seed}).combined;
}

double mean_log_score(const Model& model, const ModelFit& fit, int n_draws, std::uint64_t seed) {
  if (n_draws < 100) throw config_error("eval", "mean log score needs at least 100 draws");
  return score(model, fit, {n_draws, seed}).combined.mean_log_score;
}

EnvelopeIntensity parse_envelope_intensity(const std::string& name) {
  if (name == "refit") return EnvelopeIntensity::Refit;
  if (name == "plugin") return EnvelopeIntensity::PlugIn;
  throw config_error("eval", "unknown envelope intensity '" + name + "' (refit or plugin)");
}

std::string to_string(EnvelopeIntensity i) { return i == EnvelopeIntensity::Refit ? "refit" : "plugin"; }

EdgeCorrection parse_edge_correction(const std::string& name) {
  if (name == "none") return EdgeCorrection::None;
  if (name == "border") return EdgeCorrection::Border;
  if (name == "translation") return EdgeCorrection::Translation;
  throw config_error("eval", "unknown edge correction '" + name + "'");
}

std::string to_string(EdgeCorrection c) {
  switch (c) {
    case EdgeCorrection::None: return "none";
    case EdgeCorrection::Border: return "border";
    case EdgeCorrection::Translation: return "translation";
  }
  return "border";
}

namespace {

bool is_convex(const DomainPolygon& dom) {
  if (!dom.holes.empty()) return false;
  const auto& r = dom.outer;
  const std::size_t m = r.size() - 1;
  for (std::size_t i = 0; i < m; ++i) {
    PlanarPoint a = r[i], b = r[(i + 1) % m], c = r[(i + 2) % m];
    if (cross(b - a, c - b) < -1e-12) return false;
  }
  return true;
}

// Sutherland-Hodgman: subject clipped by a convex counter-clockwise ring.
std::vector<PlanarPoint> clip_convex(std::vector<PlanarPoint> subject, const std::vector<PlanarPoint>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    PlanarPoint a = clip[e], b = clip[(e + 1) % clip.size()];
    auto inside = [&](PlanarPoint p) { return cross(b - a, p - a) >= 0; };
    std::vector<PlanarPoint> out;
    for (std::size_t i = 0; i < subject.size(); ++i) {
      PlanarPoint p = subject[i], q = subject[(i + 1) % subject.size()];
      bool ip = inside(p), iq = inside(q);
      if (ip) out.push_back(p);
      if (ip != iq) {
        double t = cross(b - a, p - a) / cross(b - a, p - q);
        out.push_back(p + t * (q - p));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

double poly_area(const std::vector<PlanarPoint>& p) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += cross(p[i], p[(i + 1) % p.size()]);
  return 0.5 * s;
}

class KWindow {
 public:
  KWindow(const DomainPolygon& dom, EdgeCorrection c) : dom_(dom), corr_(c), area_(coxmesh::area(dom)) {
    if (c == EdgeCorrection::Translation) {
      if (!is_convex(dom)) throw config_error("eval", "translation correction needs a convex domain without holes");
      ring_.assign(dom.outer.begin(), dom.outer.end() - 1);
    }
    if (c == EdgeCorrection::Border) {
      auto bb = bounding_box(dom.outer);
      const int m = 200;
      const double dx = (bb[2] - bb[0]) / m, dy = (bb[3] - bb[1]) / m;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          PlanarPoint p{bb[0] + (i + 0.5) * dx, bb[1] + (j + 0.5) * dy};
          if (contains(dom, p)) lattice_.push_back(distance_to_coast(p, dom));
        }
      std::sort(lattice_.begin(), lattice_.end());
    }
  }

  double area() const { return area_; }
  // |A eroded by r|
  double eroded(double r) const {
    if (lattice_.empty()) return 0.0;
    auto it = std::lower_bound(lattice_.begin(), lattice_.end(), r);
    return area_ * static_cast<double>(lattice_.end() - it) / static_cast<double>(lattice_.size());
  }
  // |A ∩ (A + v)|
  double overlap(PlanarPoint v) const {
    std::vector<PlanarPoint> shifted(ring_.size());
    for (std::size_t i = 0; i < ring_.size(); ++i) shifted[i] = ring_[i] + v;
    return poly_area(clip_convex(shifted, ring_));
  }
  const DomainPolygon& domain() const { return dom_; }
  EdgeCorrection correction() const { return corr_; }

 private:
  const DomainPolygon& dom_;
  EdgeCorrection corr_;
  double area_;
  std::vector<double> lattice_;
  std::vector<PlanarPoint> ring_;
};

std::vector<double> k_inhom_window(std::span<const PlanarPoint> pts, std::span<const double> lambda, const KWindow& win,
                                   std::span<const double> radii) {
  if (pts.size() < 2) throw data_error("eval", "K-function needs at least 2 points");
  if (lambda.size() != pts.size()) throw data_error("eval", "intensity length differs from the pattern");
  for (std::size_t i = 0; i < lambda.size(); ++i)
    if (!(lambda[i] > 0) || !std::isfinite(lambda[i]))
      throw data_error("eval", "intensity must be positive at point " + std::to_string(i));
  for (std::size_t k = 0; k < radii.size(); ++k)
    if (!(radii[k] > 0) || (k && radii[k] <= radii[k - 1]))
      throw config_error("eval", "radii must be positive and increasing");
  const std::size_t nr = radii.size();
  if (nr == 0) return {};
  const double rmax = radii.back();
  const EdgeCorrection corr = win.correction();

  std::vector<double> border;
  if (corr == EdgeCorrection::Border)
    for (auto p : pts) border.push_back(distance_to_coast(p, win.domain()));

  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pts[a].x < pts[b].x; });

  // diff[k] accumulates contributions that switch on at radius index k
  std::vector<double> diff(nr + 1, 0.0);
  auto add = [&](std::size_t i, double dist, double val) {
    std::size_t lo = std::lower_bound(radii.begin(), radii.end(), dist) - radii.begin();
    std::size_t hi = nr;
    if (corr == EdgeCorrection::Border) hi = std::upper_bound(radii.begin(), radii.end(), border[i]) - radii.begin();
    if (lo < hi) {
      diff[lo] += val;
      diff[hi] -= val;
    }
  };
  for (std::size_t a = 0; a < order.size(); ++a) {
    const std::size_t i = order[a];
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const std::size_t j = order[b];
      if (pts[j].x - pts[i].x > rmax) break;
      const double dist = distance(pts[i], pts[j]);
      if (dist > rmax) continue;
      double val = 1.0 / (lambda[i] * lambda[j]);
      if (corr == EdgeCorrection::Translation) {
        const double ov = win.overlap(pts[i] - pts[j]);
        if (!(ov > 0)) continue;
        val *= win.area() / ov;
      }
      add(i, dist, val);
      add(j, dist, val);
    }
  }
  std::vector<double> k(nr);
  double run = 0.0;
  for (std::size_t r = 0; r < nr; ++r) {
    run += diff[r];
    if (corr == EdgeCorrection::Border) {
      const double ea = win.eroded(radii[r]);
      k[r] = ea > 0 ? run / ea : std::numeric_limits<double>::quiet_NaN();
    } else {
      k[r] = run / win.area();
    }
  }
  return k;
}

}  // namespace

std::vector<double> k_inhom(std::span<const PlanarPoint> points, std::span<const double> lambda,
                            const DomainPolygon& domain, std::span<const double> radii, EdgeCorrection correction) {
  KWindow win(domain, correction);
  return k_inhom_window(points, lambda, win, radii);
}

std::vector<double> normalize_k(std::span<const double> khat, std::span<const double> radii) {
  std::vector<double> out(khat.size());
  for (std::size_t i = 0; i < khat.size(); ++i) out[i] = khat[i] / (M_PI * radii[i] * radii[i]) - 1.0;
  return out;
}

std::vector<double> default_radii(double r_max, int n) {
  std::vector<double> r(n);
  for (int i = 0; i < n; ++i) r[i] = r_max * (i + 1) / n;
  return r;
}

double quantile(std::vector<double> v, double p) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (v.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

namespace {

// Model data with the points of one species and stratum replaced; covariates
// at the new points are interpolated from the vertex values.
ModelData with_points(const ModelData& base, Species species, int stratum, std::span<const PlanarPoint> pts) {
  ModelData d = base;
  std::erase_if(d.points, [&](const ObsPoint& p) { return p.species == species && p.stratum == stratum; });
  const Projector pr = projector(d.mesh, pts);
  const auto& vsst = d.strata[stratum].vertex_sst;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ObsPoint p;
    p.species = species;
    p.stratum = stratum;
    p.location = pts[i];
    p.vertex = pr.index[i];
    p.weight = pr.weight[i];
    for (int k = 0; k < 3; ++k) {
      p.dcoast += p.weight[k] * d.vertex_dcoast[p.vertex[k]];
      if (!vsst.empty()) p.sst += p.weight[k] * vsst[p.vertex[k]];
    }
    d.points.push_back(p);
  }
  return d;
}

}  // namespace

KFunctionResult k_envelope(const Model& model, const ModelFit& fit, const DomainPolygon& domain, Species species,
                           int month, int year, std::span<const double> radii, const EnvelopeOptions& opt) {
  const int s = model.stratum_index(month, year);
  if (s < 0) throw config_error("eval", "stratum " + std::to_string(month) + "/" + std::to_string(year) + " is not in the model");
  if (opt.n_sim < 1) throw config_error("eval", "n_sim must be positive");
  const Mesh& mesh = model.data().mesh;
  TriangleLocator loc(mesh);
  auto lambda_at = [&](std::span<const PlanarPoint> pts, const Vec& log_lam) {
    std::vector<double> lam(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto h = loc.locate(pts[i]);
      if (!h) throw data_error("eval", "point " + std::to_string(i) + " lies outside the mesh");
      const auto& t = mesh.triangles[h->triangle];
      lam[i] = std::exp(h->bary[0] * log_lam[t[0]] + h->bary[1] * log_lam[t[1]] + h->bary[2] * log_lam[t[2]]);
    }
    return lam;
  };

  ModelSpec loc_spec = model.spec();
  loc_spec.include_marks = false;
  Vec loc_init;
  {
    LatentLayout ll = LatentLayout::build(loc_spec, static_cast<int>(mesh.n_vertices()));
    const auto& full = model.layout().names;
    loc_init = Vec::Zero(ll.dim);
    for (int i = 0; i < ll.dim; ++i)
      if (auto it = std::find(full.begin(), full.end(), ll.names[i]); it != full.end()) loc_init[i] = fit.mode[it - full.begin()];
  }
  const Vec plug = model.vertex_log_intensity(fit.mode, species, s);
  auto fitted_log_lambda = [&](std::span<const PlanarPoint> pts) -> Vec {
    if (opt.intensity == EnvelopeIntensity::PlugIn) return plug;
    Model m(loc_spec, with_points(model.data(), species, s, pts));
    auto obj = m.objective(fit.hyper);
    return m.vertex_log_intensity(inner_mode(*obj, loc_init).mode, species, s);
  };
  KWindow win(domain, opt.correction);

  std::vector<PlanarPoint> obs;
  for (const auto& p : model.data().points)
    if (p.species == species && p.stratum == s) obs.push_back(p.location);
  KFunctionResult res;
  res.radii.assign(radii.begin(), radii.end());
  res.khat = k_inhom_window(obs, lambda_at(obs, fitted_log_lambda(obs)), win, radii);
  res.normalized = normalize_k(res.khat, radii);
  res.n_sim = opt.n_sim;
  res.simulated.resize(opt.n_sim);

  parallel_for(static_cast<std::size_t>(opt.n_sim), [&](std::size_t r) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > opt.max_retries)
        throw numerical_error("eval", "envelope simulation " + std::to_string(r) + " produced fewer than 2 points");
      auto pts = simulate_from_fit(model, fit, domain, species, s,
                                   stream_seed(opt.seed, {stream::envelope, r, static_cast<std::uint64_t>(attempt)}));
      if (pts.size() < 2) continue;
      res.simulated[r] = normalize_k(k_inhom_window(pts, lambda_at(pts, fitted_log_lambda(pts)), win, radii), radii);
      return;
    }
  });
  const std::size_t nr = radii.size();
  res.lo.resize(nr);
  res.hi.resize(nr);
  for (std::size_t k = 0; k < nr; ++k) {
    std::vector<double> col(opt.n_sim);
    for (int r = 0; r < opt.n_sim; ++r) col[r] = res.simulated[r][k];
    res.lo[k] = quantile(col, 0.025);
    res.hi[k] = quantile(col, 0.975);
  }
  return res;
}

}  // namespace coxmesh
