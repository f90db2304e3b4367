#include "coxmesh/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "coxmesh/error.hpp"

namespace coxmesh {

namespace {

std::string lower_name(Species s) { return std::string(to_string(s)); }
std::string lower_name(Behavior b) { return std::string(to_string(b)); }

}  // namespace

void ModelSpec::validate() const {
  if (species.empty()) throw config_error("model", "at least one species is required");
  std::set<Species> seen(species.begin(), species.end());
  if (seen.size() != species.size()) throw config_error("model", "duplicate species");
  if (years.empty()) throw config_error("model", "years must be nonempty");
  if (months.empty()) throw config_error("model", "months must be nonempty");
  for (int m : months)
    if (m < 1 || m > 12) throw config_error("model", "month out of range: " + std::to_string(m));
  if (!(fixed_prior_sd > 0)) throw config_error("model", "fixed_prior_sd must be positive");
  if (!(tau_prior_shape > 0) || !(tau_prior_rate > 0))
    throw config_error("model", "precision prior parameters must be positive");
  if (!(hyper_prior_sd > 0)) throw config_error("model", "hyper_prior_sd must be positive");
}

LatentLayout LatentLayout::build(const ModelSpec& spec, int n_vertices) {
  spec.validate();
  LatentLayout L;
  L.n_vertices = n_vertices;
  L.n_months = static_cast<int>(spec.months.size());
  L.n_years = static_cast<int>(spec.years.size());
  int next = 0;
  auto add = [&](std::string name, bool fixed) {
    L.names.push_back(std::move(name));
    L.is_fixed.push_back(fixed);
    return next++;
  };
  for (int f = 0; f < spec.n_fields(); ++f) {
    L.field_offset.push_back(next);
    std::string tag = spec.share_single_field ? "shared" : lower_name(spec.species[f]);
    for (int v = 0; v < n_vertices; ++v) add("field_" + tag + "[" + std::to_string(v) + "]", false);
  }
  for (std::size_t g = 0; g < spec.species.size(); ++g) {
    Block b;
    b.species = spec.species[g];
    std::string sp = lower_name(b.species);
    if (spec.has_fields()) b.field = spec.share_single_field ? 0 : static_cast<int>(g);
    b.alpha = add("intercept_" + sp, true);
    if (spec.use_dcoast) b.beta = add("dcoast_" + sp, true);
    if (spec.use_sst) b.gamma = add("sst_" + sp, true);
    if (spec.has_random_effects()) {
      b.month = next;
      for (int m : spec.months) add("month" + std::to_string(m) + "_" + sp, false);
      b.year = next;
      for (int y : spec.years) add("year" + std::to_string(y) + "_" + sp, false);
    }
    if (spec.include_marks) {
      if (spec.use_dcoast) b.eta = add("mark_dcoast_" + sp, true);
      b.xi = next;
      for (int k = 0; k < kBehaviorCount; ++k)
        add("mark_" + lower_name(static_cast<Behavior>(k)) + "_" + sp, true);
    }
    L.blocks.push_back(b);
  }
  L.dim = next;
  return L;
}

int LatentLayout::block_index(Species s) const {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].species == s) return static_cast<int>(i);
  return -1;
}

const LatentLayout::Block& LatentLayout::block(Species s) const {
  int i = block_index(s);
  if (i < 0) throw config_error("model", "species not in model: " + lower_name(s));
  return blocks[i];
}

HyperLayout::HyperLayout(const ModelSpec& spec) {
  auto add = [&](std::string name, Kind k, int i) {
    names_.push_back(std::move(name));
    entries_.push_back({k, i});
  };
  if (spec.has_fields())
    for (int i = 0; i < 4; ++i) add("theta" + std::to_string(i + 1), Kind::Theta, i);
  if (spec.has_random_effects())
    for (Species s : spec.species) {
      add("log_tau_month_" + lower_name(s), Kind::TauMonth, static_cast<int>(s));
      add("log_tau_year_" + lower_name(s), Kind::TauYear, static_cast<int>(s));
    }
  if (spec.include_marks)
    for (Species s : spec.species) add("log_size_" + lower_name(s), Kind::Size, static_cast<int>(s));
  if (spec.has_rho()) {
    if (spec.tie_rho)
      add("rho", Kind::RhoTied, 0);
    else
      for (Species s : spec.species) add("rho_" + lower_name(s), Kind::Rho, static_cast<int>(s));
  }
}

void HyperLayout::fix(const std::string& name) {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw config_error("model", "unknown hyperparameter: " + name);
  auto k = it - names_.begin();
  names_.erase(it);
  entries_.erase(entries_.begin() + k);
}

Vec HyperLayout::pack(const HyperState& h) const {
  Vec v(size());
  for (int i = 0; i < size(); ++i) {
    const auto& e = entries_[i];
    switch (e.kind) {
      case Kind::Theta: v[i] = h.theta[e.index]; break;
      case Kind::TauMonth: v[i] = h.log_tau_month[e.index]; break;
      case Kind::TauYear: v[i] = h.log_tau_year[e.index]; break;
      case Kind::Size: v[i] = h.log_size[e.index]; break;
      case Kind::Rho: v[i] = h.rho[e.index]; break;
      case Kind::RhoTied: v[i] = h.rho[0]; break;
    }
  }
  return v;
}

HyperState HyperLayout::unpack(const Vec& v, HyperState h) const {
  if (v.size() != size()) throw numerical_error("model", "hyperparameter vector has the wrong size");
  for (int i = 0; i < size(); ++i) {
    const auto& e = entries_[i];
    switch (e.kind) {
      case Kind::Theta: h.theta[e.index] = v[i]; break;
      case Kind::TauMonth: h.log_tau_month[e.index] = v[i]; break;
      case Kind::TauYear: h.log_tau_year[e.index] = v[i]; break;
      case Kind::Size: h.log_size[e.index] = v[i]; break;
      case Kind::Rho: h.rho[e.index] = v[i]; break;
      case Kind::RhoTied: h.rho = {v[i], v[i]}; break;
    }
  }
  return h;
}

double nb_log_pmf(int y, double mu, double k) {
  if (!(k > 0)) throw numerical_error("model", "negative binomial size must be positive");
  if (y < 0) return -std::numeric_limits<double>::infinity();
  double lg;
  if (y <= 64) {
    lg = 0.0;
    for (int j = 0; j < y; ++j) lg += std::log((k + j) / (j + 1.0));
  } else {
    lg = std::lgamma(y + k) - std::lgamma(k) - std::lgamma(y + 1.0);
  }
  // k log(k / (k + mu)) + y log(mu / (k + mu))
  double out = lg - k * std::log1p(mu / k);
  if (y > 0) out += y * (std::log(mu) - std::log(k + mu));
  return out;
}

double sst_at(std::span<const CovariateGrid> sst, int month, int year, PlanarPoint p) {
  for (const auto& g : sst) {
    if (g.month != month || g.year != year) continue;
    PlanarPoint q{std::clamp(p.x, g.x0, g.x0 + (g.nx - 1) * g.dx), std::clamp(p.y, g.y0, g.y0 + (g.ny - 1) * g.dy)};
    return bilinear(g, q).value;
  }
  throw data_error("model", "missing covariate stratum: sst for month " + std::to_string(month) + ", year " +
                                std::to_string(year));
}

namespace {

Scaler fit_scaler(const std::vector<double>& primary, const std::vector<double>& fallback, const char* name) {
  auto try_fit = [](const std::vector<double>& v) -> std::optional<Scaler> {
    if (v.size() < 2) return std::nullopt;
    double m = 0;
    for (double x : v) m += x;
    m /= v.size();
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    double sd = std::sqrt(ss / (v.size() - 1));
    if (!(sd > 1e-12 * (1 + std::abs(m)))) return std::nullopt;
    return Scaler{m, sd};
  };
  if (auto s = try_fit(primary)) return *s;
  if (auto s = try_fit(fallback)) return *s;
  if (primary.size() < 2 && fallback.size() < 2) return Scaler{};
  throw data_error("model", std::string("zero variance covariate: ") + name);
}

double effort_at(std::span<const CovariateGrid> effort, int month, int year, PlanarPoint p) {
  for (const auto& g : effort) {
    if (g.month != month || g.year != year) continue;
    if (p.x < g.x0 || p.y < g.y0 || p.x > g.x0 + (g.nx - 1) * g.dx || p.y > g.y0 + (g.ny - 1) * g.dy) return 0.0;
    return std::max(0.0, bilinear(g, p).value);
  }
  return 1.0;
}

}  // namespace

ModelData prepare_data(const ModelSpec& spec, const Mesh& mesh, const DomainPolygon& domain,
                       std::span<const Sighting> sightings, std::span<const CovariateGrid> sst,
                       const DataOptions& options) {
  spec.validate();
  ModelData d;
  d.mesh = mesh;
  d.fem = fem_matrices(mesh);
  const int nv = static_cast<int>(mesh.n_vertices());
  auto month_idx = [&](int m) {
    auto it = std::find(spec.months.begin(), spec.months.end(), m);
    return it == spec.months.end() ? -1 : static_cast<int>(it - spec.months.begin());
  };
  auto year_idx = [&](int y) {
    auto it = std::find(spec.years.begin(), spec.years.end(), y);
    return it == spec.years.end() ? -1 : static_cast<int>(it - spec.years.begin());
  };
  std::set<std::pair<int, int>> observed;
  for (std::size_t i = 0; i < sightings.size(); ++i) {
    const auto& s = sightings[i];
    if (month_idx(s.month) < 0 || year_idx(s.year) < 0)
      throw data_error("model", "record " + std::to_string(i) + ": month/year outside the model strata");
    if (s.group_size < 0) throw data_error("model", "record " + std::to_string(i) + ": negative group_size");
    if (std::find(spec.species.begin(), spec.species.end(), s.species) == spec.species.end())
      throw data_error("model", "record " + std::to_string(i) + ": species not in model");
    observed.insert({s.year, s.month});
  }

  auto dual = dual_weights(mesh, domain);
  std::vector<double> vdcoast(nv);
  for (int v = 0; v < nv; ++v) vdcoast[v] = distance_to_coast(mesh.vertices[v], domain);

  for (int y : spec.years)
    for (int m : spec.months) {
      if (spec.observed_strata_only && !observed.count({y, m})) continue;
      Stratum st;
      st.month = m;
      st.year = y;
      st.month_idx = month_idx(m);
      st.year_idx = year_idx(y);
      for (int v = 0; v < nv; ++v) {
        double w = dual.w[v];
        if (!options.effort.empty()) w *= effort_at(options.effort, m, y, mesh.vertices[v]);
        if (!(w > 0)) continue;
        st.node.push_back(v);
        st.weight.push_back(w);
        st.dcoast.push_back(vdcoast[v]);
        st.sst.push_back(spec.use_sst ? sst_at(sst, m, y, mesh.vertices[v]) : 0.0);
      }
      if (spec.use_sst)
        for (int v = 0; v < nv; ++v) st.vertex_sst.push_back(sst_at(sst, m, y, mesh.vertices[v]));
      d.strata.push_back(std::move(st));
    }
  if (d.strata.empty()) throw data_error("model", "no active strata");

  std::vector<PlanarPoint> locs;
  for (const auto& s : sightings) locs.push_back(s.location);
  Projector proj = projector(mesh, locs);
  std::vector<double> pd(sightings.size()), ps(sightings.size());
  for (std::size_t i = 0; i < sightings.size(); ++i) {
    const auto& s = sightings[i];
    ObsPoint p;
    p.species = s.species;
    p.location = s.location;
    p.stratum = -1;
    for (std::size_t k = 0; k < d.strata.size(); ++k)
      if (d.strata[k].month == s.month && d.strata[k].year == s.year) p.stratum = static_cast<int>(k);
    if (p.stratum < 0) throw data_error("model", "record " + std::to_string(i) + ": stratum has no effort");
    p.vertex = proj.index[i];
    p.weight = proj.weight[i];
    pd[i] = distance_to_coast(s.location, domain);
    ps[i] = spec.use_sst ? sst_at(sst, s.month, s.year, s.location) : 0.0;
    p.dcoast = pd[i];
    p.sst = ps[i];
    p.behavior = s.behavior;
    p.group_size = s.group_size;
    d.points.push_back(p);
  }

  std::vector<double> node_d, node_s;
  for (const auto& st : d.strata) {
    node_d.insert(node_d.end(), st.dcoast.begin(), st.dcoast.end());
    node_s.insert(node_s.end(), st.sst.begin(), st.sst.end());
  }
  if (spec.use_dcoast)
    d.dcoast_scaler = options.dcoast_scaler ? *options.dcoast_scaler : fit_scaler(pd, node_d, "dcoast");
  if (spec.use_sst) d.sst_scaler = options.sst_scaler ? *options.sst_scaler : fit_scaler(ps, node_s, "sst");
  for (auto& st : d.strata) {
    for (auto& v : st.dcoast) v = d.dcoast_scaler.apply(v);
    for (auto& v : st.sst) v = d.sst_scaler.apply(v);
    for (auto& v : st.vertex_sst) v = d.sst_scaler.apply(v);
  }
  d.vertex_dcoast.resize(nv);
  for (int v = 0; v < nv; ++v) d.vertex_dcoast[v] = d.dcoast_scaler.apply(vdcoast[v]);
  for (auto& p : d.points) {
    p.dcoast = d.dcoast_scaler.apply(p.dcoast);
    p.sst = d.sst_scaler.apply(p.sst);
  }
  return d;
}

Model::Model(ModelSpec spec, ModelData data)
    : spec_(std::move(spec)), data_(std::move(data)) {
  layout_ = LatentLayout::build(spec_, static_cast<int>(data_.mesh.n_vertices()));
  hyper_layout_ = HyperLayout(spec_);
  double rc = spec_.prior_range_km;
  if (!(rc > 0)) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& st : data_.strata)
      for (int v : st.node) {
        xmin = std::min(xmin, data_.mesh.vertices[v].x);
        xmax = std::max(xmax, data_.mesh.vertices[v].x);
        ymin = std::min(ymin, data_.mesh.vertices[v].y);
        ymax = std::max(ymax, data_.mesh.vertices[v].y);
      }
    if (xmin > xmax)
      for (const auto& v : data_.mesh.vertices) {
        xmin = std::min(xmin, v.x);
        xmax = std::max(xmax, v.x);
        ymin = std::min(ymin, v.y);
        ymax = std::max(ymax, v.y);
      }
    rc = std::hypot(xmax - xmin, ymax - ymin) / 10.0;
  }
  range_center_ = rc;
}

HyperState Model::default_hyper() const {
  HyperState h;
  double hh = range_center_ / std::sqrt(8.0 * kMaternNu);
  h.theta = {std::log(hh), std::log(hh), 0.0, 0.0};
  h.log_tau_month = {std::log(10.0), std::log(10.0)};
  h.log_tau_year = {std::log(10.0), std::log(10.0)};
  h.log_size = {0.0, 0.0};
  h.rho = {0.0, 0.0};
  return h;
}

int Model::stratum_index(int month, int year) const {
  for (std::size_t k = 0; k < data_.strata.size(); ++k)
    if (data_.strata[k].month == month && data_.strata[k].year == year) return static_cast<int>(k);
  return -1;
}

DesignRow Model::intensity_design(Species s, int month_idx, int year_idx, double dcoast, double sst,
                                  const std::array<int, 3>& vertex, const std::array<double, 3>& weight) const {
  const auto& b = layout_.block(s);
  DesignRow row;
  row.emplace_back(b.alpha, 1.0);
  if (b.beta >= 0) row.emplace_back(b.beta, dcoast);
  if (b.gamma >= 0) row.emplace_back(b.gamma, sst);
  if (b.month >= 0) row.emplace_back(b.month + month_idx, 1.0);
  if (b.year >= 0) row.emplace_back(b.year + year_idx, 1.0);
  if (b.field >= 0) {
    int off = layout_.field_offset[b.field];
    for (int j = 0; j < 3; ++j) row.emplace_back(off + vertex[j], weight[j]);
  }
  return row;
}

DesignRow Model::intensity_design(const ObsPoint& p) const {
  const auto& st = data_.strata[p.stratum];
  return intensity_design(p.species, st.month_idx, st.year_idx, p.dcoast, p.sst, p.vertex, p.weight);
}

DesignRow Model::mark_design(Species s, Behavior beh, double dcoast, double rho, const std::array<int, 3>& vertex,
                             const std::array<double, 3>& weight) const {
  const auto& b = layout_.block(s);
  if (b.xi < 0) throw config_error("model", "marks are not part of this model");
  DesignRow row;
  row.emplace_back(b.xi + static_cast<int>(beh), 1.0);
  if (b.eta >= 0) row.emplace_back(b.eta, dcoast);
  if (b.field >= 0) {
    int off = layout_.field_offset[b.field];
    for (int j = 0; j < 3; ++j) row.emplace_back(off + vertex[j], rho * weight[j]);
  }
  return row;
}

DesignRow Model::mark_design(const ObsPoint& p, const HyperState& h) const {
  return mark_design(p.species, p.behavior, p.dcoast, h.rho[static_cast<int>(p.species)], p.vertex, p.weight);
}

namespace {
double dot_row(const DesignRow& r, const Vec& x) {
  double s = 0;
  for (const auto& [i, v] : r) s += v * x[i];
  return s;
}
}  // namespace

std::vector<double> Model::log_intensity(const Vec& x, Species s, std::span<const PlanarPoint> locations, int month,
                                         int year, std::span<const double> dcoast,
                                         std::span<const double> sst) const {
  auto mi = std::find(spec_.months.begin(), spec_.months.end(), month);
  auto yi = std::find(spec_.years.begin(), spec_.years.end(), year);
  if (mi == spec_.months.end() || yi == spec_.years.end())
    throw data_error("model", "month/year outside the model strata");
  if (dcoast.size() != locations.size() || sst.size() != locations.size())
    throw data_error("model", "covariate length does not match the locations");
  for (std::size_t i = 0; i < locations.size(); ++i)
    if (!std::isfinite(dcoast[i]) || !std::isfinite(sst[i]))
      throw data_error("model", "missing covariate at location " + std::to_string(i));
  Projector proj;
  const bool fields = layout_.block(s).field >= 0;
  if (fields) proj = projector(data_.mesh, locations);
  std::vector<double> out(locations.size());
  for (std::size_t i = 0; i < locations.size(); ++i) {
    std::array<int, 3> vi{0, 0, 0};
    std::array<double, 3> wi{0, 0, 0};
    if (fields) {
      vi = proj.index[i];
      wi = proj.weight[i];
    }
    out[i] = dot_row(intensity_design(s, static_cast<int>(mi - spec_.months.begin()),
                                      static_cast<int>(yi - spec_.years.begin()), dcoast[i], sst[i], vi, wi),
                     x);
  }
  return out;
}

Vec Model::vertex_log_intensity(const Vec& x, Species s, int stratum) const {
  const auto& b = layout_.block(s);
  const auto& st = data_.strata.at(stratum);
  const int nv = layout_.n_vertices;
  const double base = x[b.alpha] + (b.month >= 0 ? x[b.month + st.month_idx] + x[b.year + st.year_idx] : 0.0);
  Vec out = Vec::Constant(nv, base);
  for (int v = 0; v < nv; ++v) {
    if (b.beta >= 0) out[v] += x[b.beta] * data_.vertex_dcoast[v];
    if (b.gamma >= 0) out[v] += x[b.gamma] * st.vertex_sst[v];
    if (b.field >= 0) out[v] += x[layout_.field_offset[b.field] + v];
  }
  return out;
}

double Model::lgcp_nll(const Vec& x) const {
  double nll = 0.0;
  for (const auto& p : data_.points) nll -= dot_row(intensity_design(p), x);
  for (const auto& b : layout_.blocks)
    for (const auto& st : data_.strata) {
      const double base = x[b.alpha] + (b.month >= 0 ? x[b.month + st.month_idx] : 0.0) +
                          (b.year >= 0 ? x[b.year + st.year_idx] : 0.0);
      const int off = b.field >= 0 ? layout_.field_offset[b.field] : -1;
      for (std::size_t j = 0; j < st.node.size(); ++j) {
        double eta = base + (b.beta >= 0 ? x[b.beta] * st.dcoast[j] : 0.0) +
                     (b.gamma >= 0 ? x[b.gamma] * st.sst[j] : 0.0) + (off >= 0 ? x[off + st.node[j]] : 0.0);
        double lam = std::exp(eta);
        if (!std::isfinite(lam))
          throw numerical_error("model", "non-finite intensity at node " + std::to_string(st.node[j]));
        nll += st.weight[j] * lam;
      }
    }
  return nll;
}

double Model::nb_mark_nll(const Vec& x, const HyperState& h) const {
  if (!spec_.include_marks) return 0.0;
  double nll = 0.0;
  for (const auto& p : data_.points) {
    double k = std::exp(h.log_size[static_cast<int>(p.species)]);
    double mu = std::exp(dot_row(mark_design(p, h), x));
    nll -= nb_log_pmf(p.group_size, mu, k);
  }
  return nll;
}

double Model::log_hyperprior(const HyperState& h) const {
  double lp = 0.0;
  auto gauss = [&](double v, double c) {
    double z = (v - c) / spec_.hyper_prior_sd;
    return -0.5 * z * z;
  };
  auto log_gamma_prior = [&](double log_tau) {
    // Gamma(a, b) on tau, expressed on log tau (Jacobian included)
    return spec_.tau_prior_shape * log_tau - spec_.tau_prior_rate * std::exp(log_tau);
  };
  if (spec_.has_fields()) {
    double c = std::log(range_center_ / std::sqrt(8.0 * kMaternNu));
    lp += gauss(h.theta[0], c) + gauss(h.theta[1], c) + gauss(h.theta[2], 0.0) + gauss(h.theta[3], 0.0);
  }
  for (Species s : spec_.species) {
    int g = static_cast<int>(s);
    if (spec_.has_random_effects()) lp += log_gamma_prior(h.log_tau_month[g]) + log_gamma_prior(h.log_tau_year[g]);
    if (spec_.include_marks) lp += gauss(h.log_size[g], 0.0);
    if (spec_.has_rho()) lp += gauss(h.rho[g], 0.0);
  }
  return lp;
}

namespace {

class ModelObjective : public LatentObjective {
 public:
  ModelObjective(const Model& model, const HyperState& hyper) : m_(model), h_(hyper) {
    const auto& L = m_.layout();
    const auto& spec = m_.spec();
    prior_logdet_ = 0.0;
    if (spec.has_fields()) {
      q_ = assemble_precision(m_.data().fem, hyper.spde());
      double ld = factorize(q_).logdet();
      prior_logdet_ += ld * spec.n_fields();
    }
    fixed_prec_ = std::isfinite(spec.fixed_prior_sd) ? 1.0 / (spec.fixed_prior_sd * spec.fixed_prior_sd) : 0.0;
    int n_fixed = 0;
    for (bool f : L.is_fixed) n_fixed += f;
    if (fixed_prec_ > 0) prior_logdet_ += n_fixed * std::log(fixed_prec_);
    diag_prec_ = Vec::Zero(L.dim);
    for (int i = 0; i < L.dim; ++i)
      if (L.is_fixed[i]) diag_prec_[i] = fixed_prec_;
    for (const auto& b : L.blocks) {
      int g = static_cast<int>(b.species);
      if (b.month >= 0) {
        double tm = std::exp(hyper.log_tau_month[g]), ty = std::exp(hyper.log_tau_year[g]);
        for (int i = 0; i < L.n_months; ++i) diag_prec_[b.month + i] = tm;
        for (int i = 0; i < L.n_years; ++i) diag_prec_[b.year + i] = ty;
        prior_logdet_ += L.n_months * hyper.log_tau_month[g] + L.n_years * hyper.log_tau_year[g];
      }
    }
    for (const auto& p : m_.data().points) {
      point_rows_.push_back(m_.intensity_design(p));
      if (spec.include_marks) {
        mark_rows_.push_back(m_.mark_design(p, hyper));
        size_.push_back(std::exp(hyper.log_size[static_cast<int>(p.species)]));
        if (!(size_.back() > 0) || !std::isfinite(size_.back()))
          throw numerical_error("model", "negative binomial size must be positive and finite");
      }
    }
    // the linear point term is constant
    point_grad_ = Vec::Zero(L.dim);
    for (const auto& r : point_rows_)
      for (const auto& [i, v] : r) point_grad_[i] -= v;
  }

  int dim() const override { return m_.layout().dim; }
  double prior_log_det() const override { return prior_logdet_; }
  double value(const Vec& x) const override { return evaluate(x, nullptr, nullptr); }

  double evaluate(const Vec& x, Vec* grad, SymSparse* hess) const override {
    const auto& L = m_.layout();
    const auto& data = m_.data();
    const int nv = L.n_vertices;
    double f = point_grad_.dot(x);
    Vec g;
    if (grad) g = point_grad_;
    std::vector<SymSparse::Triplet> trip;

    // Gaussian priors
    double quad = 0.0;
    for (int fidx = 0; fidx < static_cast<int>(L.field_offset.size()); ++fidx) {
      const int off = L.field_offset[fidx];
      Vec w = x.segment(off, nv);
      Vec qw = q_.multiply(w);
      quad += w.dot(qw);
      if (grad) g.segment(off, nv) += qw;
      if (hess) {
        const auto& lo = q_.lower();
        for (int j = 0; j < lo.outerSize(); ++j)
          for (Eigen::SparseMatrix<double>::InnerIterator it(lo, j); it; ++it)
            trip.emplace_back(off + it.row(), off + j, it.value());
      }
    }
    quad += x.cwiseAbs2().dot(diag_prec_);
    f += 0.5 * quad;
    if (grad) g += diag_prec_.cwiseProduct(x);
    if (hess)
      for (int i = 0; i < L.dim; ++i)
        if (diag_prec_[i] > 0) trip.emplace_back(i, i, diag_prec_[i]);

    // Poisson quadrature terms
    for (const auto& b : L.blocks) {
      std::vector<int> cols{b.alpha};
      if (b.beta >= 0) cols.push_back(b.beta);
      if (b.gamma >= 0) cols.push_back(b.gamma);
      const int n_small_base = static_cast<int>(cols.size());
      if (b.month >= 0) {
        for (int i = 0; i < L.n_months; ++i) cols.push_back(b.month + i);
        for (int i = 0; i < L.n_years; ++i) cols.push_back(b.year + i);
      }
      const int ns = static_cast<int>(cols.size());
      const int off = b.field >= 0 ? L.field_offset[b.field] : -1;
      Eigen::MatrixXd S;
      Eigen::MatrixXd B;
      Vec D;
      if (hess) {
        S = Eigen::MatrixXd::Zero(ns, ns);
        if (off >= 0) {
          B = Eigen::MatrixXd::Zero(nv, ns);
          D = Vec::Zero(nv);
        }
      }
      std::vector<int> local(ns);
      std::vector<double> a(ns);
      for (const auto& st : data.strata) {
        int nl = 0;
        local[nl++] = 0;
        int li = 1;
        if (b.beta >= 0) local[nl++] = li++;
        if (b.gamma >= 0) local[nl++] = li++;
        if (b.month >= 0) {
          local[nl++] = n_small_base + st.month_idx;
          local[nl++] = n_small_base + L.n_months + st.year_idx;
        }
        const double base = x[b.alpha] + (b.month >= 0 ? x[b.month + st.month_idx] + x[b.year + st.year_idx] : 0.0);
        for (std::size_t j = 0; j < st.node.size(); ++j) {
          double eta = base;
          li = 1;
          a[0] = 1.0;
          if (b.beta >= 0) {
            eta += x[b.beta] * st.dcoast[j];
            a[li++] = st.dcoast[j];
          }
          if (b.gamma >= 0) {
            eta += x[b.gamma] * st.sst[j];
            a[li++] = st.sst[j];
          }
          if (b.month >= 0) {
            a[li++] = 1.0;
            a[li++] = 1.0;
          }
          const int v = st.node[j];
          if (off >= 0) eta += x[off + v];
          const double e = st.weight[j] * std::exp(eta);
          if (!std::isfinite(e)) throw numerical_error("model", "non-finite intensity at node " + std::to_string(v));
          f += e;
          if (grad) {
            for (int c = 0; c < nl; ++c) g[cols[local[c]]] += e * a[c];
            if (off >= 0) g[off + v] += e;
          }
          if (hess) {
            for (int c = 0; c < nl; ++c)
              for (int c2 = 0; c2 < nl; ++c2) S(local[c], local[c2]) += e * a[c] * a[c2];
            if (off >= 0) {
              D[v] += e;
              for (int c = 0; c < nl; ++c) B(v, local[c]) += e * a[c];
            }
          }
        }
      }
      if (hess) {
        for (int c = 0; c < ns; ++c)
          for (int c2 = 0; c2 < ns; ++c2)
            if (cols[c] >= cols[c2]) trip.emplace_back(cols[c], cols[c2], S(c, c2));
        if (off >= 0)
          for (int v = 0; v < nv; ++v) {
            trip.emplace_back(off + v, off + v, D[v]);
            for (int c = 0; c < ns; ++c) trip.emplace_back(cols[c], off + v, B(v, c));
          }
      }
    }

    // negative binomial marks
    for (std::size_t i = 0; i < mark_rows_.size(); ++i) {
      const auto& r = mark_rows_[i];
      const double k = size_[i];
      const int y = data.points[i].group_size;
      const double zeta = dot_row(r, x);
      const double mu = std::exp(zeta);
      if (!std::isfinite(mu)) throw numerical_error("model", "non-finite mark mean at point " + std::to_string(i));
      f -= nb_log_pmf(y, mu, k);
      const double d1 = k * (mu - y) / (k + mu);
      if (grad)
        for (const auto& [j, v] : r) g[j] += d1 * v;
      if (hess) {
        const double d2 = (y + k) * k * mu / ((k + mu) * (k + mu));
        for (const auto& [j, v] : r)
          for (const auto& [j2, v2] : r)
            if (j >= j2) trip.emplace_back(j, j2, d2 * v * v2);
      }
    }
    if (!std::isfinite(f)) throw numerical_error("model", "non-finite objective");
    if (grad) *grad = std::move(g);
    if (hess) *hess = SymSparse::from_triplets(L.dim, trip);
    return f;
  }

 private:
  const Model& m_;
  HyperState h_;
  SymSparse q_;
  double prior_logdet_ = 0.0;
  double fixed_prec_ = 0.0;
  Vec diag_prec_;
  Vec point_grad_;
  std::vector<DesignRow> point_rows_, mark_rows_;
  std::vector<double> size_;
};

}  // namespace

std::unique_ptr<LatentObjective> Model::objective(const HyperState& h) const {
  return std::make_unique<ModelObjective>(*this, h);
}

}  // namespace coxmesh
