#include "coxmesh/infer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "coxmesh/error.hpp"
#include "coxmesh/rng.hpp"

namespace coxmesh {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double safe_value(const LatentObjective& obj, const Vec& x) {
  try {
    double v = obj.value(x);
    return std::isfinite(v) ? v : kInf;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Numerical) return kInf;
    throw;
  }
}
}  // namespace

InnerResult inner_mode(const LatentObjective& objective, const Vec& init, const NewtonOptions& options,
                       std::shared_ptr<const SymbolicCholesky> symbolic) {
  if (init.size() != objective.dim()) throw numerical_error("infer", "initial latent vector has the wrong size");
  InnerResult r;
  Vec x = init;
  Vec g;
  SymSparse H;
  for (int it = 0;; ++it) {
    double f = objective.evaluate(x, &g, &H);
    double gn = g.lpNorm<Eigen::Infinity>();
    r.grad_trace.push_back(gn);
    CholFactor F = factorize(H, symbolic);
    symbolic = F.symbolic_ptr();
    if (gn < options.tol) {
      r.mode = std::move(x);
      r.factor = std::move(F);
      r.hessian = std::move(H);
      r.value = f;
      r.iterations = it;
      return r;
    }
    if (it >= options.max_iter) {
      std::string trace;
      for (std::size_t k = r.grad_trace.size() > 5 ? r.grad_trace.size() - 5 : 0; k < r.grad_trace.size(); ++k) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.3g", r.grad_trace[k]);
        trace += buf;
      }
      throw numerical_error("infer", "inner Newton did not converge; last gradient norms:" + trace);
    }
    Vec d = -F.solve(g);
    const double slope = g.dot(d);
    double t = 1.0;
    bool accepted = false;
    Vec xn;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      xn = x + t * d;
      double fn = safe_value(objective, xn);
      if (fn <= f + 1e-4 * t * slope + 1e-12 * std::abs(f)) {
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw numerical_error("infer", "line search failed after " + std::to_string(options.max_halvings) +
                                         " halvings (gradient norm " + std::to_string(gn) + ")");
    x = std::move(xn);
  }
}

double laplace_log_marginal(const LatentObjective& objective, const InnerResult& inner) {
  return -inner.value + 0.5 * objective.prior_log_det() - 0.5 * inner.factor.logdet();
}

OptimResult nelder_mead(const Objective& fn, const Vec& x0, const OptimOptions& o) {
  const int d = static_cast<int>(x0.size());
  OptimResult r;
  auto f = [&](const Vec& x) {
    ++r.evaluations;
    double v = fn(x);
    return std::isfinite(v) ? v : kInf;
  };
  if (d == 0) {
    r.x = x0;
    r.value = f(x0);
    r.converged = true;
    return r;
  }
  std::vector<Vec> s(d + 1, x0);
  std::vector<double> fv(d + 1);
  for (int i = 0; i < d; ++i) s[i + 1][i] += o.initial_step;
  for (int i = 0; i <= d; ++i) fv[i] = f(s[i]);
  std::vector<int> idx(d + 1);
  for (r.iterations = 0; r.iterations < o.max_iter; ++r.iterations) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    std::vector<Vec> ss(d + 1);
    std::vector<double> ff(d + 1);
    for (int i = 0; i <= d; ++i) {
      ss[i] = s[idx[i]];
      ff[i] = fv[idx[i]];
    }
    s = std::move(ss);
    fv = std::move(ff);
    r.trace.push_back(fv[0]);
    double diam = 0.0;
    for (int i = 1; i <= d; ++i) diam = std::max(diam, (s[i] - s[0]).lpNorm<Eigen::Infinity>());
    if (diam < o.simplex_tol) {
      r.converged = true;
      break;
    }
    Vec c = Vec::Zero(d);
    for (int i = 0; i < d; ++i) c += s[i];
    c /= d;
    Vec xr = c + (c - s[d]);
    double fr = f(xr);
    if (fr < fv[0]) {
      Vec xe = c + 2.0 * (c - s[d]);
      double fe = f(xe);
      if (fe < fr) {
        s[d] = xe;
        fv[d] = fe;
      } else {
        s[d] = xr;
        fv[d] = fr;
      }
    } else if (fr < fv[d - 1]) {
      s[d] = xr;
      fv[d] = fr;
    } else {
      bool outside = fr < fv[d];
      Vec xc = outside ? Vec(c + 0.5 * (xr - c)) : Vec(c + 0.5 * (s[d] - c));
      double fc = f(xc);
      if (fc < (outside ? fr : fv[d])) {
        s[d] = xc;
        fv[d] = fc;
      } else {
        for (int i = 1; i <= d; ++i) {
          s[i] = s[0] + 0.5 * (s[i] - s[0]);
          fv[i] = f(s[i]);
        }
      }
    }
  }
  int best = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  r.x = s[best];
  r.value = fv[best];
  return r;
}

namespace {
Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double step) {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    double h = step * std::max(1.0, std::abs(x[i]));
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}
}  // namespace

OptimResult bfgs(const Objective& fn, const Vec& x0, const OptimOptions& o) {
  OptimResult r;
  auto f = [&](const Vec& x) {
    ++r.evaluations;
    double v = fn(x);
    return std::isfinite(v) ? v : kInf;
  };
  const int d = static_cast<int>(x0.size());
  Vec x = x0;
  double fx = f(x);
  if (!std::isfinite(fx)) throw numerical_error("infer", "objective is not finite at the initial point");
  r.x = x;
  r.value = fx;
  if (d == 0) {
    r.converged = true;
    return r;
  }
  Vec g = fd_gradient(f, x, o.fd_step);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(d, d);
  for (r.iterations = 0; r.iterations < o.max_iter; ++r.iterations) {
    r.trace.push_back(fx);
    if (g.lpNorm<Eigen::Infinity>() < o.grad_tol) {
      r.converged = true;
      break;
    }
    Vec p = -Hinv * g;
    if (g.dot(p) >= 0) {
      Hinv.setIdentity();
      p = -g;
    }
    double t = 1.0, fn_new = kInf;
    Vec xn;
    for (int h = 0; h < 40; ++h, t *= 0.5) {
      xn = x + t * p;
      fn_new = f(xn);
      if (fn_new <= fx + 1e-4 * t * g.dot(p)) break;
    }
    if (!(fn_new < fx)) break;
    Vec gn = fd_gradient(f, xn, o.fd_step);
    Vec s = xn - x, y = gn - g;
    double sy = s.dot(y);
    if (sy > 1e-12) {
      double rho = 1.0 / sy;
      Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    x = xn;
    fx = fn_new;
    g = gn;
  }
  r.x = x;
  r.value = fx;
  return r;
}

OptimResult minimize(const Objective& f, const Vec& x0, const OptimOptions& options) {
  return options.method == OptimOptions::Method::Bfgs ? bfgs(f, x0, options) : nelder_mead(f, x0, options);
}

Eigen::MatrixXd numerical_hessian(const Objective& f, const Vec& x, double h) {
  const int d = static_cast<int>(x.size());
  Eigen::MatrixXd H(d, d);
  const double f0 = f(x);
  auto at = [&](int i, double di, int j, double dj) {
    Vec y = x;
    y[i] += di;
    y[j] += dj;
    return f(y);
  };
  for (int i = 0; i < d; ++i) {
    H(i, i) = (at(i, h, i, 0) - 2 * f0 + at(i, -h, i, 0)) / (h * h);
    for (int j = 0; j < i; ++j) {
      H(i, j) = (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h)) / (4 * h * h);
      H(j, i) = H(i, j);
    }
  }
  return H;
}

void ModelFit::refresh() {
  factor = std::make_shared<CholFactor>(factorize(hessian));
  logdet = factor->logdet();
  latent_sd = selected_inverse_diag(*factor).cwiseSqrt();
}

ModelFit fit_at(const Model& model, const HyperState& hyper, const FitOptions& options, const Vec* init) {
  auto obj = model.objective(hyper);
  Vec x0 = init ? *init : Vec::Zero(obj->dim());
  InnerResult inner = inner_mode(*obj, x0, options.newton);
  ModelFit fit;
  fit.hyper = hyper;
  fit.hyper_names = model.hyper_layout().names();
  fit.hyper_packed = model.hyper_layout().pack(hyper);
  fit.log_marginal = laplace_log_marginal(*obj, inner);
  fit.objective = inner.value;
  fit.mode = std::move(inner.mode);
  fit.hessian = std::move(inner.hessian);
  fit.factor = std::make_shared<CholFactor>(std::move(inner.factor));
  fit.logdet = fit.factor->logdet();
  fit.latent_sd = selected_inverse_diag(*fit.factor).cwiseSqrt();
  fit.converged = true;
  return fit;
}

ModelFit optimize_hyper(const Model& model, const HyperState& init, const FitOptions& options) {
  const HyperLayout& hl = model.hyper_layout();
  if (!options.optimize || hl.size() == 0) return fit_at(model, init, options);
  Vec warm = Vec::Zero(model.layout().dim);
  std::shared_ptr<const SymbolicCholesky> symbolic;
  auto negpost = [&](const Vec& v) -> double {
    HyperState h = hl.unpack(v, init);
    try {
      auto obj = model.objective(h);
      InnerResult inner = inner_mode(*obj, warm, options.newton, symbolic);
      symbolic = inner.factor.symbolic_ptr();
      warm = inner.mode;
      double val = -(laplace_log_marginal(*obj, inner) + model.log_hyperprior(h));
      return std::isfinite(val) ? val : kInf;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Numerical) return kInf;
      throw;
    }
  };
  Vec x0 = hl.pack(init);
  if (!std::isfinite(negpost(x0)))
    throw numerical_error("infer", "Laplace approximation failed at the initial hyperparameters");
  OptimResult opt = minimize(negpost, x0, options.optim);
  HyperState best = hl.unpack(opt.x, init);
  Vec start = warm;
  ModelFit fit = fit_at(model, best, options, &start);
  fit.outer_iterations = opt.iterations;
  fit.evaluations = opt.evaluations;
  fit.converged = opt.converged;
  fit.trace = opt.trace;
  if (options.hyper_covariance) {
    warm = fit.mode;
    Eigen::MatrixXd H = numerical_hessian(negpost, opt.x, options.hessian_step);
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() == Eigen::Success && H.allFinite())
      fit.hyper_cov = llt.solve(Eigen::MatrixXd::Identity(H.rows(), H.cols()));
  }
  return fit;
}

std::vector<SummaryRow> fixed_effect_summaries(const ModelFit& fit, const Model& model) {
  std::vector<SummaryRow> rows;
  const auto& L = model.layout();
  for (int i = 0; i < L.dim; ++i) {
    if (!L.is_fixed[i]) continue;
    double m = fit.mode[i], s = fit.latent_sd[i];
    rows.push_back({L.names[i], m, m - 1.96 * s, m + 1.96 * s});
  }
  return rows;
}

std::vector<SummaryRow> summaries(const ModelFit& fit, const Model& model) {
  std::vector<SummaryRow> rows = fixed_effect_summaries(fit, model);
  for (std::size_t j = 0; j < fit.hyper_names.size(); ++j) {
    const std::string& name = fit.hyper_names[j];
    double m = fit.hyper_packed[j];
    double s = fit.hyper_cov.rows() == static_cast<int>(fit.hyper_names.size()) ? std::sqrt(fit.hyper_cov(j, j)) : kNaN;
    rows.push_back({name, m, m - 1.96 * s, m + 1.96 * s});
  }
  // natural-scale versions via monotone transforms of the interval ends
  for (std::size_t j = 0; j < fit.hyper_names.size(); ++j) {
    const std::string& name = fit.hyper_names[j];
    const SummaryRow& r = rows[rows.size() - fit.hyper_names.size() + j];
    std::string out;
    double (*tf)(double) = nullptr;
    if (name == "theta1") out = "h_x", tf = [](double v) { return std::exp(v); };
    else if (name == "theta2") out = "h_y", tf = [](double v) { return std::exp(v); };
    else if (name == "theta3") out = "h_xy", tf = [](double v) { return std::tanh(v); };
    else if (name == "theta4") out = "sigma", tf = [](double v) { return std::exp(v); };
    else if (name.rfind("log_", 0) == 0) out = name.substr(4), tf = [](double v) { return std::exp(v); };
    if (!tf) continue;
    rows.push_back({out, tf(r.mean), tf(r.q025), tf(r.q975)});
  }
  return rows;
}

std::string format_report(std::span<const SummaryRow> rows) {
  std::string out = "name,mean,q025,q975\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.3f,%.3f,%.3f\n", r.name.c_str(), r.mean, r.q025, r.q975);
    out += buf;
  }
  return out;
}

Vec posterior_draw(const ModelFit& fit, std::uint64_t seed) {
  if (!fit.factor) throw numerical_error("infer", "fit has no factor");
  return fit.mode + sample_gmrf(*fit.factor, seed);
}

namespace {

struct Welford {
  long n = 0;
  double mean = 0, m2 = 0;
  void add(double v) {
    ++n;
    double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  double sd() const { return n > 1 ? std::sqrt(m2 / (n - 1)) : 0.0; }
};

double row_dot(const DesignRow& r, const Vec& x) {
  double s = 0;
  for (const auto& [i, v] : r) s += v * x[i];
  return s;
}

int level(const std::vector<int>& levels, int v, const char* what) {
  auto it = std::find(levels.begin(), levels.end(), v);
  if (it == levels.end()) throw data_error("infer", std::string(what) + " " + std::to_string(v) + " is not in the model");
  return static_cast<int>(it - levels.begin());
}

// Mean exp(m + v/2) * scale and MC sd over latent draws for a list of rows.
void lognormal_summary(const ModelFit& fit, const std::vector<DesignRow>& rows, const std::vector<char>& active,
                       double scale, const PredictOptions& o, std::vector<double>& mean, std::vector<double>& sd) {
  SelectedInverse si(*fit.factor);
  mean.assign(rows.size(), kNaN);
  sd.assign(rows.size(), kNaN);
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (active[i]) mean[i] = std::exp(row_dot(rows[i], fit.mode) + 0.5 * si.quad_form(rows[i])) * scale;
  std::vector<Welford> acc(rows.size());
  for (int s = 0; s < o.n_draws; ++s) {
    Vec x = posterior_draw(fit, stream_seed(o.seed, {stream::prediction, static_cast<std::uint64_t>(s)}));
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (active[i]) acc[i].add(std::exp(row_dot(rows[i], x)) * scale);
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (active[i]) sd[i] = acc[i].sd();
}

}  // namespace

PredictionRaster predict_intensity(const ModelFit& fit, const Model& model, const DomainPolygon& domain,
                                   const CovariateGrid& geometry, std::span<const CovariateGrid> sst,
                                   Species species, int month, int year, const PredictOptions& options) {
  const auto& spec = model.spec();
  const int mi = level(spec.months, month, "month");
  const int yi = level(spec.years, year, "year");
  PredictionRaster out;
  out.geometry = geometry;
  out.geometry.values.clear();
  out.species = species;
  out.month = month;
  out.year = year;
  const auto& data = model.data();
  TriangleLocator loc(data.mesh);
  std::vector<DesignRow> rows;
  std::vector<char> active;
  for (int j = 0; j < geometry.ny; ++j)
    for (int i = 0; i < geometry.nx; ++i) {
      PlanarPoint p = geometry.node(i, j);
      auto hit = contains(domain, p) ? loc.locate(p) : std::nullopt;
      if (!hit) {
        rows.emplace_back();
        active.push_back(0);
        continue;
      }
      const auto& tri = data.mesh.triangles[hit->triangle];
      double dz = data.dcoast_scaler.apply(distance_to_coast(p, domain));
      double sz = spec.use_sst ? data.sst_scaler.apply(sst_at(sst, month, year, p)) : 0.0;
      if (options.group_size)
        rows.push_back(model.mark_design(species, options.behavior, dz, fit.hyper.rho[static_cast<int>(species)],
                                         tri, hit->bary));
      else
        rows.push_back(model.intensity_design(species, mi, yi, dz, sz, tri, hit->bary));
      active.push_back(1);
    }
  double area = options.group_size ? 1.0 : geometry.dx * geometry.dy;
  lognormal_summary(fit, rows, active, area, options, out.mean, out.sd);
  return out;
}

GroupSizePrediction predict_group_size(const ModelFit& fit, const Model& model, const DomainPolygon& domain,
                                       std::span<const PlanarPoint> locations, Species species,
                                       Behavior behavior, const PredictOptions& options) {
  const auto& data = model.data();
  Projector proj = projector(data.mesh, locations);
  std::vector<DesignRow> rows;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    double dz = data.dcoast_scaler.apply(distance_to_coast(locations[i], domain));
    rows.push_back(model.mark_design(species, behavior, dz, fit.hyper.rho[static_cast<int>(species)],
                                     proj.index[i], proj.weight[i]));
  }
  std::vector<char> active(rows.size(), 1);
  GroupSizePrediction out;
  lognormal_summary(fit, rows, active, 1.0, options, out.mean, out.sd);
  return out;
}

}  // namespace coxmesh
