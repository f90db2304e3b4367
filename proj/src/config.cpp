#include "coxmesh/config.hpp"

#include <cmath>
#include <set>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "coxmesh/error.hpp"

namespace coxmesh {

namespace {

json node_to_json(const toml::node& n) {
  if (auto t = n.as_table()) {
    json o = json::object();
    for (const auto& [k, v] : *t) o[std::string(k.str())] = node_to_json(v);
    return o;
  }
  if (auto a = n.as_array()) {
    json arr = json::array();
    for (const auto& v : *a) arr.push_back(node_to_json(v));
    return arr;
  }
  if (auto v = n.as_integer()) return json(v->get());
  if (auto v = n.as_floating_point()) return json(v->get());
  if (auto v = n.as_boolean()) return json(v->get());
  if (auto v = n.as_string()) return json(v->get());
  std::ostringstream ss;
  n.visit([&](const auto& x) { ss << x; });
  return json(ss.str());
}

// Reads keys of one table and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string prefix) : prefix_(std::move(prefix)) {
    if (doc.is_null()) return;
    if (!doc.is_object()) throw config_error("config", "'" + prefix_ + "' must be a table");
    j_ = &doc;
  }

  bool has(const std::string& key) const { return j_ && j_->contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!has(key)) return;
    try {
      out = j_->at(key).get<T>();
    } catch (const json::exception&) {
      throw config_error("config", "bad value for '" + name(key) + "'");
    }
  }

  const json& sub(const std::string& key) {
    used_.insert(key);
    static const json null;
    return has(key) ? j_->at(key) : null;
  }

  void done() const {
    if (!j_) return;
    for (const auto& [k, v] : j_->items())
      if (!used_.count(k)) throw config_error("config", "unknown key '" + name(k) + "'");
  }

  std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

 private:
  const json* j_ = nullptr;
  std::string prefix_;
  std::set<std::string> used_;
};

std::vector<Species> parse_species_list(const std::vector<std::string>& v, const std::string& key) {
  std::vector<Species> out;
  for (const auto& s : v) {
    auto sp = parse_species(s);
    if (!sp) throw config_error("config", "unknown species '" + s + "' in '" + key + "'");
    out.push_back(*sp);
  }
  return out;
}

double prior_sd_value(const json& v, const std::string& key) {
  if (v.is_string() && (v == "inf" || v == "flat")) return INFINITY;
  if (!v.is_number()) throw config_error("config", "bad value for '" + key + "'");
  return v.get<double>();
}

}  // namespace

json toml_to_json(std::string_view text, const std::string& source) {
  try {
    toml::table t = toml::parse(text, source);
    return node_to_json(t);
  } catch (const toml::parse_error& e) {
    std::ostringstream ss;
    ss << source << ":" << e.source().begin.line << ": " << e.description();
    throw config_error("config", ss.str());
  }
}

json load_config_document(const fs::path& path) {
  if (!fs::exists(path)) throw config_error("config", "config file not found: " + path.string());
  std::string text = read_file(path);
  if (path.extension() == ".json") {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw config_error("config", path.string() + ": " + e.what());
    }
  }
  return toml_to_json(text, path.string());
}

json spec_to_json(const ModelSpec& s) {
  json species = json::array();
  for (Species sp : s.species) species.push_back(std::string(to_string(sp)));
  json cov = json::array();
  if (s.use_dcoast) cov.push_back("dcoast");
  if (s.use_sst) cov.push_back("sst");
  json fixed_sd = std::isfinite(s.fixed_prior_sd) ? json(s.fixed_prior_sd) : json("inf");
  return json{{"species", species},
              {"months", s.months},
              {"years", s.years},
              {"covariates", cov},
              {"marks", s.include_marks},
              {"baseline", s.baseline},
              {"share_single_field", s.share_single_field},
              {"random_effects", s.random_effects},
              {"tie_rho", s.tie_rho},
              {"observed_strata_only", s.observed_strata_only},
              {"fixed_prior_sd", fixed_sd},
              {"tau_prior_shape", s.tau_prior_shape},
              {"tau_prior_rate", s.tau_prior_rate},
              {"hyper_prior_sd", s.hyper_prior_sd},
              {"prior_range_km", s.prior_range_km}};
}

namespace {

ModelSpec parse_spec(const json& j, const std::string& prefix) {
  ModelSpec s;
  Section sec(j, prefix);
  std::vector<std::string> species;
  for (Species sp : s.species) species.emplace_back(to_string(sp));
  sec.get("species", species);
  s.species = parse_species_list(species, sec.name("species"));
  sec.get("months", s.months);
  sec.get("years", s.years);
  if (sec.has("covariates")) {
    std::vector<std::string> cov;
    sec.get("covariates", cov);
    s.use_dcoast = s.use_sst = false;
    for (const auto& c : cov) {
      if (c == "dcoast") s.use_dcoast = true;
      else if (c == "sst") s.use_sst = true;
      else throw config_error("config", "unknown covariate '" + c + "' in '" + sec.name("covariates") + "'");
    }
  } else {
    sec.get("covariates", s.use_dcoast);  // marks the key as known
  }
  sec.get("marks", s.include_marks);
  sec.get("baseline", s.baseline);
  sec.get("share_single_field", s.share_single_field);
  sec.get("random_effects", s.random_effects);
  sec.get("tie_rho", s.tie_rho);
  sec.get("observed_strata_only", s.observed_strata_only);
  if (sec.has("fixed_prior_sd")) s.fixed_prior_sd = prior_sd_value(sec.sub("fixed_prior_sd"), sec.name("fixed_prior_sd"));
  sec.get("tau_prior_shape", s.tau_prior_shape);
  sec.get("tau_prior_rate", s.tau_prior_rate);
  sec.get("hyper_prior_sd", s.hyper_prior_sd);
  sec.get("prior_range_km", s.prior_range_km);
  sec.done();
  return s;
}

void validate_spec(const ModelSpec& s) {
  try {
    s.validate();
  } catch (const Error& e) {
    throw config_error("config", e.what());
  }
}

}  // namespace

ModelSpec spec_from_json(const json& j, const std::string& prefix) {
  ModelSpec s = parse_spec(j, prefix);
  validate_spec(s);
  return s;
}

fs::path RunConfig::resolve(const fs::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return (base_dir / p).lexically_normal();
}

RunConfig parse_run_config(const json& doc, const fs::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir.empty() ? fs::current_path() : fs::absolute(base_dir);
  Section top(doc, "");
  std::int64_t seed = 1;
  top.get("seed", seed);
  if (seed < 0) throw config_error("config", "'seed' must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  top.get("threads", c.threads);

  {
    Section s(top.sub("paths"), "paths");
    std::string data, domain, mesh;
    std::vector<std::string> cov, effort;
    s.get("data", data);
    s.get("domain", domain);
    s.get("mesh", mesh);
    s.get("covariates", cov);
    s.get("effort", effort);
    s.done();
    c.paths.data = c.resolve(data);
    c.paths.domain = c.resolve(domain);
    c.paths.mesh = c.resolve(mesh);
    for (const auto& p : cov) c.paths.covariates.push_back(c.resolve(p));
    for (const auto& p : effort) c.paths.effort.push_back(c.resolve(p));
  }
  {
    Section s(top.sub("mesh"), "mesh");
    s.get("inner_res", c.mesh.inner_res);
    s.get("outer_extension", c.mesh.outer_extension);
    s.get("outer_res", c.mesh.outer_res);
    s.get("grading", c.mesh.grading);
    s.get("min_angle_deg", c.mesh.min_angle_deg);
    s.get("max_vertices", c.mesh.max_vertices);
    s.done();
    if (!(c.mesh.inner_res > 0)) throw config_error("config", "'mesh.inner_res' must be positive");
  }
  c.model = parse_spec(top.sub("model"), "model");
  {
    Section s(top.sub("inference"), "inference");
    std::string opt = "nelder-mead";
    s.get("optimizer", opt);
    if (opt == "nelder-mead") c.inference.fit.optim.method = OptimOptions::Method::NelderMead;
    else if (opt == "bfgs") c.inference.fit.optim.method = OptimOptions::Method::Bfgs;
    else throw config_error("config", "unknown optimizer '" + opt + "' in 'inference.optimizer'");
    s.get("max_iter", c.inference.fit.optim.max_iter);
    s.get("simplex_tol", c.inference.fit.optim.simplex_tol);
    s.get("grad_tol", c.inference.fit.optim.grad_tol);
    s.get("initial_step", c.inference.fit.optim.initial_step);
    s.get("newton_tol", c.inference.fit.newton.tol);
    s.get("newton_max_iter", c.inference.fit.newton.max_iter);
    s.get("optimize", c.inference.fit.optimize);
    s.get("hyper_covariance", c.inference.fit.hyper_covariance);
    s.get("hessian_step", c.inference.fit.hessian_step);
    s.get("init_range_km", c.inference.init_range_km);
    s.get("init_sigma", c.inference.init_sigma);
    s.get("fixed", c.inference.fixed);
    s.done();
  }
  {
    Section s(top.sub("prediction"), "prediction");
    s.get("cell_km", c.prediction.cell_km);
    s.get("draws", c.prediction.draws);
    s.done();
  }
  {
    Section s(top.sub("evaluation"), "evaluation");
    s.get("draws", c.evaluation.draws);
    s.done();
  }
  {
    Section s(top.sub("kfunc"), "kfunc");
    std::string corr = "border", intensity = "refit";
    s.get("r_max", c.kfunc.r_max);
    s.get("n_radii", c.kfunc.n_radii);
    s.get("n_sim", c.kfunc.n_sim);
    s.get("correction", corr);
    s.get("intensity", intensity);
    s.done();
    c.kfunc.correction = parse_edge_correction(corr);
    c.kfunc.intensity = parse_envelope_intensity(intensity);
  }
  {
    Section s(top.sub("simulation"), "simulation");
    s.get("h_x", c.simulation.field.h_x);
    s.get("h_y", c.simulation.field.h_y);
    s.get("h_xy", c.simulation.field.h_xy);
    s.get("sigma", c.simulation.field.sigma);
    for (Species sp : {Species::Beluga, Species::Bowhead}) {
      const std::string key(to_string(sp));
      Section e(s.sub(key), s.name(key));
      auto& eff = c.simulation.effects[static_cast<int>(sp)];
      e.get("alpha", eff.alpha);
      e.get("beta", eff.beta);
      e.get("gamma", eff.gamma);
      e.get("eta", eff.eta);
      e.get("xi", eff.xi);
      e.get("tau_month", eff.tau_month);
      e.get("tau_year", eff.tau_year);
      e.get("size", eff.size);
      e.get("rho", eff.rho);
      e.get("behavior_probs", eff.behavior_probs);
      e.done();
      if (!(eff.size > 0) || !(eff.tau_month > 0) || !(eff.tau_year > 0))
        throw config_error("config", "'" + s.name(key) + "': size and precisions must be positive");
    }
    s.done();
    const auto& f = c.simulation.field;
    if (!(f.h_x > 0) || !(f.h_y > 0) || !(std::abs(f.h_xy) < 1) || !(f.sigma > 0))
      throw config_error("config", "'simulation': need h_x, h_y, sigma > 0 and |h_xy| < 1");
  }
  {
    Section s(top.sub("outputs"), "outputs");
    std::string dir = "out";
    s.get("dir", dir);
    s.get("svg", c.outputs.svg);
    s.done();
    c.outputs.dir = c.resolve(dir);
  }
  top.done();
  if (doc.contains("model")) validate_spec(c.model);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(load_config_document(path), fs::absolute(path).parent_path());
}

json run_config_to_json(const RunConfig& c) {
  auto paths = [](const std::vector<fs::path>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back(p.string());
    return a;
  };
  json sim{{"h_x", c.simulation.field.h_x},
           {"h_y", c.simulation.field.h_y},
           {"h_xy", c.simulation.field.h_xy},
           {"sigma", c.simulation.field.sigma}};
  for (Species sp : {Species::Beluga, Species::Bowhead}) {
    const auto& e = c.simulation.effects[static_cast<int>(sp)];
    sim[std::string(to_string(sp))] = json{{"alpha", e.alpha}, {"beta", e.beta}, {"gamma", e.gamma},
                                           {"eta", e.eta}, {"xi", e.xi}, {"tau_month", e.tau_month},
                                           {"tau_year", e.tau_year}, {"size", e.size}, {"rho", e.rho},
                                           {"behavior_probs", e.behavior_probs}};
  }
  const auto& inf = c.inference;
  return json{
      {"seed", c.seed},
      {"threads", c.threads},
      {"paths",
       {{"data", c.paths.data.string()},
        {"domain", c.paths.domain.string()},
        {"mesh", c.paths.mesh.string()},
        {"covariates", paths(c.paths.covariates)},
        {"effort", paths(c.paths.effort)}}},
      {"mesh",
       {{"inner_res", c.mesh.inner_res},
        {"outer_extension", c.mesh.outer_extension},
        {"outer_res", c.mesh.outer_res},
        {"grading", c.mesh.grading},
        {"min_angle_deg", c.mesh.min_angle_deg},
        {"max_vertices", c.mesh.max_vertices}}},
      {"model", spec_to_json(c.model)},
      {"inference",
       {{"optimizer", inf.fit.optim.method == OptimOptions::Method::Bfgs ? "bfgs" : "nelder-mead"},
        {"max_iter", inf.fit.optim.max_iter},
        {"simplex_tol", inf.fit.optim.simplex_tol},
        {"grad_tol", inf.fit.optim.grad_tol},
        {"initial_step", inf.fit.optim.initial_step},
        {"newton_tol", inf.fit.newton.tol},
        {"newton_max_iter", inf.fit.newton.max_iter},
        {"optimize", inf.fit.optimize},
        {"hyper_covariance", inf.fit.hyper_covariance},
        {"hessian_step", inf.fit.hessian_step},
        {"init_range_km", inf.init_range_km},
        {"init_sigma", inf.init_sigma},
        {"fixed", inf.fixed}}},
      {"prediction", {{"cell_km", c.prediction.cell_km}, {"draws", c.prediction.draws}}},
      {"evaluation", {{"draws", c.evaluation.draws}}},
      {"kfunc",
       {{"r_max", c.kfunc.r_max},
        {"n_radii", c.kfunc.n_radii},
        {"n_sim", c.kfunc.n_sim},
        {"correction", to_string(c.kfunc.correction)},
        {"intensity", to_string(c.kfunc.intensity)}}},
      {"simulation", sim},
      {"outputs", {{"dir", c.outputs.dir.string()}, {"svg", c.outputs.svg}}}};
}

void check_paths(const RunConfig& c, bool need_data) {
  auto need = [](const fs::path& p, const std::string& key) {
    if (p.empty()) throw config_error("config", "'" + key + "' is required");
    if (!fs::exists(p)) throw config_error("config", "'" + key + "': file not found: " + p.string());
  };
  if (need_data) need(c.paths.data, "paths.data");
  need(c.paths.domain, "paths.domain");
  if (!c.paths.mesh.empty()) need(c.paths.mesh, "paths.mesh");
  for (const auto& p : c.paths.covariates) need(p, "paths.covariates");
  for (const auto& p : c.paths.effort) need(p, "paths.effort");
}

}  // namespace coxmesh
