#include "coxmesh/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "coxmesh/error.hpp"
#include "coxmesh/parallel.hpp"

namespace coxmesh {

namespace {

constexpr const char* kVersion = "0.1.0";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

fs::path with_suffix(fs::path p, const std::string& suffix) {
  const std::string s = p.string();
  if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) return p;
  return fs::path(s + suffix);
}

}  // namespace

Inputs load_inputs(const RunConfig& c, bool need_data, std::ostream* log) {
  check_paths(c, need_data);
  Inputs in;
  in.domain = read_domain(c.paths.domain);
  if (!c.paths.mesh.empty()) {
    in.mesh = read_mesh(c.paths.mesh);
  } else {
    in.mesh = build_mesh(in.domain.domain, c.mesh);
  }
  if (log) *log << "mesh: " << in.mesh.n_vertices() << " vertices, " << in.mesh.n_triangles() << " triangles\n";
  for (const auto& p : c.paths.covariates) in.sst.push_back(read_grid(p));
  for (const auto& p : c.paths.effort) in.effort.push_back(read_grid(p));
  if (need_data) {
    auto records = read_sightings_csv(c.paths.data);
    auto planar = to_planar(records, in.domain.center);
    auto snap = snap_to_domain(planar, in.domain.domain);
    in.sightings = std::move(snap.kept);
    in.snapped = snap.snapped.size();
    in.dropped = snap.rejected.size();
    if (log)
      *log << "data: " << in.sightings.size() << " sightings (" << in.snapped << " snapped, " << in.dropped
           << " dropped)\n";
  }
  return in;
}

Model build_model(const RunConfig& c, const Inputs& in, const DataOptions& options) {
  DataOptions opt = options;
  if (opt.effort.empty()) opt.effort = in.effort;
  return Model(c.model, prepare_data(c.model, in.mesh, in.domain.domain, in.sightings, in.sst, opt));
}

HyperState initial_hyper(const RunConfig& c, const Model& model) {
  HyperState h = model.default_hyper();
  if (c.inference.init_range_km > 0) {
    const double hh = std::log(c.inference.init_range_km / std::sqrt(8.0 * kMaternNu));
    h.theta[0] = h.theta[1] = hh;
  }
  h.theta[3] = std::log(c.inference.init_sigma);
  return h;
}

ModelFit run_fit(const RunConfig& c, Model& model, std::ostream* log) {
  for (const auto& name : c.inference.fixed) model.hyper_layout().fix(name);
  HyperState h0 = initial_hyper(c, model);
  auto t0 = std::chrono::steady_clock::now();
  ModelFit fit = c.inference.fit.optimize && model.hyper_layout().size() > 0
                     ? optimize_hyper(model, h0, c.inference.fit)
                     : fit_at(model, h0, c.inference.fit);
  if (log) {
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    *log << "fit: log marginal " << fit.log_marginal << ", " << fit.evaluations << " evaluations, "
         << (fit.converged ? "converged" : "not converged") << " in " << secs << " s\n";
  }
  return fit;
}

CovariateGrid prediction_geometry(const DomainPolygon& domain, double cell_km) {
  if (!(cell_km > 0)) throw config_error("cli", "cell size must be positive");
  auto bb = bounding_box(domain.outer);
  CovariateGrid g;
  g.dx = g.dy = cell_km;
  g.nx = std::max(1, static_cast<int>(std::ceil((bb[2] - bb[0]) / cell_km)));
  g.ny = std::max(1, static_cast<int>(std::ceil((bb[3] - bb[1]) / cell_km)));
  g.x0 = bb[0] + 0.5 * cell_km;
  g.y0 = bb[1] + 0.5 * cell_km;
  return g;
}

namespace {

struct Common {
  std::string config, out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool verbose = false;
};

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("--config", c.config, "Run configuration (TOML or JSON)");
  if (config_required) opt->required();
  app->add_option("--out-dir", c.out_dir, "Output directory");
  app->add_option("--seed", c.seed, "Master seed (overrides the config)");
  app->add_option("--threads", c.threads, "Worker threads (default: COXMESH_THREADS or all cores)");
  app->add_flag("--verbose", c.verbose, "Progress on stderr");
}

RunConfig resolve_config(const Common& cm) {
  RunConfig c = cm.config.empty() ? parse_run_config(json::object(), fs::current_path()) : load_run_config(cm.config);
  if (cm.seed) c.seed = *cm.seed;
  if (!cm.out_dir.empty()) c.outputs.dir = fs::absolute(cm.out_dir);
  return c;
}

void apply_threads(const Common& cm, const RunConfig* c) {
  std::size_t n = 0;
  if (cm.threads > 0) {
    n = cm.threads;
  } else if (c && c->threads > 0) {
    n = c->threads;
  } else if (const char* env = std::getenv("COXMESH_THREADS")) {
    n = std::strtoul(env, nullptr, 10);
  }
  set_thread_count(n);
}

class Run {
 public:
  Run(std::string command, const Common& cm, std::ostream& err) : command_(std::move(command)), err_(err) {
    verbose_ = cm.verbose;
    t0_ = std::chrono::steady_clock::now();
  }
  std::ostream* log() { return verbose_ ? &err_ : nullptr; }

  void output(const fs::path& p, std::string_view bytes) {
    write_file_atomic(p, bytes);
    outputs_.push_back(p.string());
  }

  void finish(const fs::path& dir, const json& config, std::uint64_t seed) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    json rec{{"command", command_},
             {"config_hash", hex(fnv1a(config.dump()))},
             {"seed", seed},
             {"versions", {{"coxmesh", kVersion}, {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                                             std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                                             std::to_string(EIGEN_MINOR_VERSION)},
                           {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_MINOR)}}},
             {"threads", thread_count()},
             {"wall_time_s", secs},
             {"finished_at", stamp},
             {"outputs", outputs_}};
    write_file_atomic(dir / "run.json", rec.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::ostream& err_;
  bool verbose_ = false;
  std::chrono::steady_clock::time_point t0_;
  std::vector<std::string> outputs_;
};

// A fit on disk: its config, inputs, model and restored posterior.
struct LoadedFit {
  fs::path path;
  json report;
  RunConfig config;
  Inputs inputs;
  std::unique_ptr<Model> model;
  ModelFit fit;
};

LoadedFit load_fit(const fs::path& fit_json, std::ostream* log, const fs::path& data_override = {}) {
  if (!fs::exists(fit_json)) throw config_error("cli", "fit file not found: " + fit_json.string());
  LoadedFit lf;
  lf.path = fit_json;
  try {
    lf.report = json::parse(read_file(fit_json));
  } catch (const json::parse_error& e) {
    throw data_error("cli", fit_json.string() + ": " + e.what());
  }
  if (!lf.report.contains("config") || !lf.report.contains("payload"))
    throw data_error("cli", fit_json.string() + ": not a fit file");
  lf.config = parse_run_config(lf.report["config"], fit_json.parent_path());
  if (!data_override.empty()) lf.config.paths.data = fs::absolute(data_override);
  lf.inputs = load_inputs(lf.config, true, log);
  DataOptions opt;
  const auto& sc = lf.report.at("scalers");
  opt.dcoast_scaler = Scaler{sc.at("dcoast")[0].get<double>(), sc.at("dcoast")[1].get<double>()};
  opt.sst_scaler = Scaler{sc.at("sst")[0].get<double>(), sc.at("sst")[1].get<double>()};
  lf.model = std::make_unique<Model>(build_model(lf.config, lf.inputs, opt));
  for (const auto& name : lf.config.inference.fixed) lf.model->hyper_layout().fix(name);
  const fs::path payload = fit_json.parent_path() / lf.report["payload"].get<std::string>();
  lf.fit = restore_fit(lf.report, read_file(payload), *lf.model);
  return lf;
}

Species species_arg(const std::string& s) {
  auto sp = parse_species(s);
  if (!sp) throw config_error("cli", "unknown species '" + s + "'");
  return *sp;
}

void check_stratum(const ModelSpec& spec, Species sp, int month, int year) {
  auto has = [](const auto& v, auto x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  if (!has(spec.species, sp)) throw config_error("cli", "'--species': " + std::string(to_string(sp)) + " is not in the fitted model");
  if (!has(spec.months, month)) throw config_error("cli", "'--month': " + std::to_string(month) + " is not in the fitted model");
  if (!has(spec.years, year)) throw config_error("cli", "'--year': " + std::to_string(year) + " is not in the fitted model");
}

int cmd_mesh(const Common& cm, const std::string& domain_arg, std::optional<double> res, std::optional<double> ext,
             std::optional<double> outer_res, const std::string& out_arg, std::ostream& out, std::ostream& err) {
  RunConfig c = resolve_config(cm);
  apply_threads(cm, &c);
  Run run("mesh", cm, err);
  if (!domain_arg.empty()) c.paths.domain = fs::absolute(domain_arg);
  if (res) c.mesh.inner_res = *res;
  if (ext) c.mesh.outer_extension = *ext;
  if (outer_res) c.mesh.outer_res = *outer_res;
  if (c.paths.domain.empty()) throw config_error("cli", "'paths.domain' is required (or --domain)");
  if (!fs::exists(c.paths.domain)) throw config_error("cli", "domain file not found: " + c.paths.domain.string());
  auto dom = read_domain(c.paths.domain);
  Mesh m = build_mesh(dom.domain, c.mesh);
  fs::path header = out_arg.empty() ? c.outputs.dir / "mesh.mesh.json" : with_suffix(fs::absolute(out_arg), ".mesh.json");
  write_mesh(header, m);
  auto q = mesh_quality(m);
  out << "mesh: " << m.n_vertices() << " vertices, " << m.n_triangles() << " triangles, min angle "
      << q.min_angle_deg << " deg -> " << header.string() << "\n";
  run.finish(header.parent_path(), run_config_to_json(c), c.seed);
  return 0;
}

int cmd_fit(const Common& cm, std::ostream& out, std::ostream& err) {
  RunConfig c = resolve_config(cm);
  apply_threads(cm, &c);
  Run run("fit", cm, err);
  Inputs in = load_inputs(c, true, run.log());
  const fs::path dir = c.outputs.dir;
  if (c.paths.mesh.empty()) {
    c.paths.mesh = dir / "mesh.mesh.json";
    write_mesh(c.paths.mesh, in.mesh);
  }
  Model model = build_model(c, in);
  ModelFit fit = run_fit(c, model, run.log());
  json report = fit_report(fit, model);
  report["payload"] = "fit.bin";
  report["data"] = {{"n_sightings", in.sightings.size()}, {"snapped", in.snapped}, {"dropped", in.dropped},
                    {"n_vertices", in.mesh.n_vertices()}};
  report["config"] = run_config_to_json(c);
  run.output(dir / "fit.bin", fit_payload(fit));
  run.output(dir / "fit.json", report.dump(2) + "\n");
  run.output(dir / "report.csv", format_report(summaries(fit, model)));
  out << format_report(fixed_effect_summaries(fit, model));
  out << "fit: " << (fit.converged ? "converged" : "NOT converged") << ", log marginal " << fit.log_marginal << " -> "
      << (dir / "fit.json").string() << "\n";
  run.finish(dir, report["config"], c.seed);
  return 0;
}

int cmd_predict(const Common& cm, const std::string& fit_path, const std::string& sp, int month, int year,
                std::optional<double> cell, std::optional<int> draws, bool group_size, const std::string& behavior,
                const std::string& out_arg, std::ostream& out, std::ostream& err) {
  apply_threads(cm, nullptr);
  Run run("predict", cm, err);
  LoadedFit lf = load_fit(fs::absolute(fit_path), run.log());
  const RunConfig& c = lf.config;
  PredictOptions po;
  po.n_draws = draws.value_or(c.prediction.draws);
  po.seed = cm.seed.value_or(c.seed);
  po.group_size = group_size;
  if (group_size) {
    auto b = parse_behavior(behavior);
    if (!b) throw config_error("cli", "unknown behavior '" + behavior + "'");
    po.behavior = *b;
  }
  check_stratum(lf.model->spec(), species_arg(sp), month, year);
  auto geom = prediction_geometry(lf.inputs.domain.domain, cell.value_or(c.prediction.cell_km));
  auto raster = predict_intensity(lf.fit, *lf.model, lf.inputs.domain.domain, geom, lf.inputs.sst, species_arg(sp),
                                  month, year, po);
  fs::path csv = out_arg.empty() ? (cm.out_dir.empty() ? fs::absolute(fit_path).parent_path() : fs::absolute(cm.out_dir)) /
                                       ("raster_" + sp + "_" + std::to_string(year) + "_" + std::to_string(month) + ".csv")
                                 : fs::absolute(out_arg);
  fs::path sidecar = csv;
  sidecar.replace_extension(".grid.json");
  run.output(csv, format_raster_csv(raster));
  run.output(sidecar, raster_geometry_json(raster).dump(2) + "\n");
  if (c.outputs.svg) {
    fs::path svg = csv;
    svg.replace_extension(".svg");
    run.output(svg, raster_svg(raster, lf.inputs.domain.domain));
  }
  double total = 0;
  for (double v : raster.mean)
    if (std::isfinite(v)) total += v;
  out << "predict: " << geom.nx << "x" << geom.ny << " cells, total expected " << total << " -> " << csv.string() << "\n";
  run.finish(csv.parent_path(), lf.report["config"], po.seed);
  return 0;
}

int cmd_simulate(const Common& cm, const std::string& out_arg, const std::string& truth_arg, std::ostream& out,
                 std::ostream& err) {
  RunConfig c = resolve_config(cm);
  apply_threads(cm, &c);
  Run run("simulate", cm, err);
  Inputs in = load_inputs(c, false, run.log());
  SimConfig sc;
  sc.spec = c.model;
  sc.domain = in.domain.domain;
  sc.mesh = in.mesh;
  sc.field = c.simulation.field;
  sc.effects = c.simulation.effects;
  sc.sst = in.sst;
  sc.seed = c.seed;
  SimResult res = simulate_dataset(sc);
  fs::path data = out_arg.empty() ? c.outputs.dir / "data.csv" : fs::absolute(out_arg);
  fs::path truth = truth_arg.empty() ? data.parent_path() / "truth.json" : fs::absolute(truth_arg);
  run.output(data, format_sightings_csv(to_lonlat(res.sightings, in.domain.center)));
  json t = run_config_to_json(c)["simulation"];
  json eff = json::object();
  for (Species sp : c.model.species) {
    const int g = static_cast<int>(sp);
    std::size_t n = 0;
    for (const auto& s : res.sightings) n += s.species == sp;
    eff[std::string(to_string(sp))] = {{"month_effect", res.truth.month_effect[g]},
                                       {"year_effect", res.truth.year_effect[g]},
                                       {"expected_count", res.truth.expected_count[g]},
                                       {"n_points", n}};
  }
  json truth_doc{{"seed", c.seed},
                 {"parameters", t},
                 {"species", eff},
                 {"months", c.model.months},
                 {"years", c.model.years},
                 {"n_points", res.sightings.size()},
                 {"scalers",
                  {{"dcoast", {res.truth.dcoast_scaler.mean, res.truth.dcoast_scaler.sd}},
                   {"sst", {res.truth.sst_scaler.mean, res.truth.sst_scaler.sd}}}}};
  run.output(truth, truth_doc.dump(2) + "\n");
  out << "simulate: " << res.sightings.size() << " sightings -> " << data.string() << "\n";
  run.finish(data.parent_path(), run_config_to_json(c), c.seed);
  return 0;
}

int cmd_evaluate(const Common& cm, const std::string& fit_path, const std::string& data_arg,
                 std::optional<int> draws, const std::string& out_arg, std::ostream& out, std::ostream& err) {
  apply_threads(cm, nullptr);
  Run run("evaluate", cm, err);
  if (!data_arg.empty() && !fs::exists(data_arg)) throw config_error("cli", "data file not found: " + data_arg);
  LoadedFit lf = load_fit(fs::absolute(fit_path), run.log(), data_arg.empty() ? fs::path{} : fs::path(data_arg));
  const std::uint64_t seed = cm.seed.value_or(lf.config.seed);
  const int n = draws.value_or(lf.config.evaluation.draws);
  if (n < 500) throw config_error("cli", "evaluation needs at least 500 draws");
  Scores s = score(*lf.model, lf.fit, {n, seed});
  json doc = score_json(s);
  doc["n_draws"] = n;
  doc["seed"] = seed;
  fs::path dest = out_arg.empty() ? fs::absolute(fit_path).parent_path() / "scores.json" : fs::absolute(out_arg);
  run.output(dest, doc.dump(2) + "\n");
  out << "evaluate: waic " << s.combined.waic << " (per obs " << s.combined.waic_per_obs << "), mean log score "
      << s.combined.mean_log_score << " -> " << dest.string() << "\n";
  run.finish(dest.parent_path(), lf.report["config"], seed);
  return 0;
}

int cmd_kfunc(const Common& cm, const std::string& fit_path, const std::string& sp, int month, int year,
              std::optional<int> n_sim, std::optional<double> r_max, const std::string& corr, const std::string& out_arg,
              std::ostream& out, std::ostream& err) {
  apply_threads(cm, nullptr);
  Run run("kfunc", cm, err);
  LoadedFit lf = load_fit(fs::absolute(fit_path), run.log());
  check_stratum(lf.model->spec(), species_arg(sp), month, year);
  const auto& kc = lf.config.kfunc;
  double rm = r_max.value_or(kc.r_max);
  if (!(rm > 0)) {
    auto bb = bounding_box(lf.inputs.domain.domain.outer);
    rm = 0.25 * std::min(bb[2] - bb[0], bb[3] - bb[1]);
  }
  auto radii = default_radii(rm, kc.n_radii);
  EnvelopeOptions eo;
  eo.n_sim = n_sim.value_or(kc.n_sim);
  eo.seed = cm.seed.value_or(lf.config.seed);
  eo.correction = corr.empty() ? kc.correction : parse_edge_correction(corr);
  eo.intensity = kc.intensity;
  auto k = k_envelope(*lf.model, lf.fit, lf.inputs.domain.domain, species_arg(sp), month, year, radii, eo);
  fs::path dest = out_arg.empty() ? fs::absolute(fit_path).parent_path() /
                                        ("kfunc_" + sp + "_" + std::to_string(year) + "_" + std::to_string(month) + ".csv")
                                  : fs::absolute(out_arg);
  run.output(dest, format_kfunction_csv(k));
  if (lf.config.outputs.svg) {
    fs::path svg = dest;
    svg.replace_extension(".svg");
    run.output(svg, kfunction_svg(k));
  }
  int inside = 0, valid = 0;
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (std::isfinite(k.normalized[i]) && std::isfinite(k.lo[i])) {
      ++valid;
      inside += k.normalized[i] >= k.lo[i] && k.normalized[i] <= k.hi[i];
    }
  out << "kfunc: observed inside the envelope at " << inside << "/" << valid << " radii -> " << dest.string() << "\n";
  run.finish(dest.parent_path(), lf.report["config"], eo.seed);
  return 0;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return 1;
    case ErrorKind::Data: return 2;
    case ErrorKind::Numerical: return 3;
  }
  return 3;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Marked log-Gaussian Cox process fitting on SPDE meshes", "coxmesh"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Common cm;

  auto* mesh = app.add_subcommand("mesh", "Triangulate a domain");
  add_common(mesh, cm, false);
  std::string domain, out_path, truth_path, fit_path, data_path, species = "beluga", behavior = "swim", corr;
  std::optional<double> res, ext, outer_res, cell, r_max;
  std::optional<int> draws, n_sim;
  int month = 0, year = 0;
  bool group_size = false;
  mesh->add_option("--domain", domain, "Domain polygon (GeoJSON)");
  mesh->add_option("--inner-res", res, "Target edge length inside the domain (km)");
  mesh->add_option("--outer-extension", ext, "Buffer width (km)");
  mesh->add_option("--outer-res", outer_res, "Buffer edge length (km)");
  mesh->add_option("--out", out_path, "Output mesh header (.mesh.json)");

  auto* fit = app.add_subcommand("fit", "Fit the model");
  add_common(fit, cm, true);

  auto* predict = app.add_subcommand("predict", "Intensity raster from a fit");
  add_common(predict, cm, false);
  predict->add_option("--fit", fit_path, "fit.json")->required();
  predict->add_option("--species", species);
  predict->add_option("--month", month)->required();
  predict->add_option("--year", year)->required();
  predict->add_option("--cell-km", cell);
  predict->add_option("--draws", draws);
  predict->add_flag("--group-size", group_size, "Predict mean group size instead of intensity");
  predict->add_option("--behavior", behavior);
  predict->add_option("--out", out_path, "Raster CSV");

  auto* simulate = app.add_subcommand("simulate", "Simulate a marked dataset");
  add_common(simulate, cm, true);
  simulate->add_option("--out", out_path, "Sightings CSV");
  simulate->add_option("--truth", truth_path, "Ground truth JSON");

  auto* evaluate = app.add_subcommand("evaluate", "WAIC and mean log score");
  add_common(evaluate, cm, false);
  evaluate->add_option("--fit", fit_path, "fit.json")->required();
  evaluate->add_option("--data", data_path, "Sightings CSV to score (default: the fitted data)");
  evaluate->add_option("--draws", draws);
  evaluate->add_option("--out", out_path, "scores.json");

  auto* kfunc = app.add_subcommand("kfunc", "Inhomogeneous K-function with envelopes");
  add_common(kfunc, cm, false);
  kfunc->add_option("--fit", fit_path, "fit.json")->required();
  kfunc->add_option("--species", species);
  kfunc->add_option("--month", month)->required();
  kfunc->add_option("--year", year)->required();
  kfunc->add_option("--n-sim", n_sim);
  kfunc->add_option("--r-max", r_max);
  kfunc->add_option("--correction", corr);
  kfunc->add_option("--out", out_path, "K-function CSV");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::Success&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "config: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*mesh) return cmd_mesh(cm, domain, res, ext, outer_res, out_path, out, err);
    if (*fit) return cmd_fit(cm, out, err);
    if (*predict)
      return cmd_predict(cm, fit_path, species, month, year, cell, draws, group_size, behavior, out_path, out, err);
    if (*simulate) return cmd_simulate(cm, out_path, truth_path, out, err);
    if (*evaluate) return cmd_evaluate(cm, fit_path, data_path, draws, out_path, out, err);
    if (*kfunc) return cmd_kfunc(cm, fit_path, species, month, year, n_sim, r_max, corr, out_path, out, err);
  } catch (const Error& e) {
    err << "error [" << e.component() << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error [io]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error [internal]: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

}  // namespace coxmesh
