#include "coxmesh/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "coxmesh/error.hpp"

namespace coxmesh {

bool is_little_endian() { return std::endian::native == std::endian::little; }

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("io", "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw data_error("io", "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("io", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == ',') {
      std::string_view f = trim(line.substr(start, i - start));
      if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = f.substr(1, f.size() - 2);
      out.push_back(f);
      start = i + 1;
    }
  return out;
}

template <class T>
T parse_num(std::string_view s, std::size_t line, std::string_view col) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw data_error("io", "line " + std::to_string(line) + ": bad " + std::string(col) + " '" + std::string(s) + "'");
  return v;
}

void put_bytes(std::string& out, const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); }

template <class T>
void put_array(std::string& out, const T* p, std::size_t n) {
  put_bytes(out, p, n * sizeof(T));
}

struct Reader {
  std::string_view data;
  std::size_t pos = 0;
  std::string what;
  template <class T>
  void get(T* dst, std::size_t n) {
    const std::size_t bytes = n * sizeof(T);
    if (pos + bytes > data.size()) throw data_error("io", what + ": payload truncated");
    std::memcpy(dst, data.data() + pos, bytes);
    pos += bytes;
  }
};

fs::path swap_suffix(const fs::path& header, std::string_view from, std::string_view to) {
  std::string s = header.string();
  if (s.size() >= from.size() && s.compare(s.size() - from.size(), from.size(), from) == 0)
    return s.substr(0, s.size() - from.size()) + std::string(to);
  return s + std::string(to);
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw data_error("io", p.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<SightingRecord> parse_sightings_csv(std::string_view text) {
  std::vector<SightingRecord> out;
  std::map<std::string, int> col;
  static const char* kCols[] = {"lon", "lat", "year", "month", "species", "behavior", "group_size"};
  std::size_t line_no = 0, pos = 0;
  bool header = true;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    if (trim(line).empty()) continue;
    auto f = split_csv(line);
    if (header) {
      for (std::size_t i = 0; i < f.size(); ++i) {
        std::string name(f[i]);
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        col[name] = static_cast<int>(i);
      }
      for (const char* c : kCols)
        if (!col.count(c)) throw data_error("io", "line 1: missing column '" + std::string(c) + "'");
      header = false;
      continue;
    }
    if (f.size() != col.size())
      throw data_error("io", "line " + std::to_string(line_no) + ": expected " + std::to_string(col.size()) +
                                 " fields, got " + std::to_string(f.size()));
    SightingRecord r;
    r.location.lon = parse_num<double>(f[col["lon"]], line_no, "lon");
    r.location.lat = parse_num<double>(f[col["lat"]], line_no, "lat");
    r.year = parse_num<int>(f[col["year"]], line_no, "year");
    r.month = parse_num<int>(f[col["month"]], line_no, "month");
    r.group_size = parse_num<int>(f[col["group_size"]], line_no, "group_size");
    auto sp = parse_species(f[col["species"]]);
    if (!sp) throw data_error("io", "line " + std::to_string(line_no) + ": unknown species '" + std::string(f[col["species"]]) + "'");
    auto b = parse_behavior(f[col["behavior"]]);
    if (!b) throw data_error("io", "line " + std::to_string(line_no) + ": unknown behavior '" + std::string(f[col["behavior"]]) + "'");
    r.species = *sp;
    r.behavior = *b;
    if (!std::isfinite(r.location.lon) || !std::isfinite(r.location.lat) || std::abs(r.location.lat) > 90)
      throw data_error("io", "line " + std::to_string(line_no) + ": invalid coordinates");
    if (r.month < kFirstMonth || r.month > kLastMonth)
      throw data_error("io", "line " + std::to_string(line_no) + ": month " + std::to_string(r.month) + " outside 7-10");
    if (r.group_size < 0) throw data_error("io", "line " + std::to_string(line_no) + ": negative group_size");
    out.push_back(r);
  }
  if (header) throw data_error("io", "line 1: missing header");
  return out;
}

std::string format_sightings_csv(std::span<const SightingRecord> records) {
  std::string out = "lon,lat,year,month,species,behavior,group_size\n";
  for (const auto& r : records) {
    out += fmt_double(r.location.lon) + "," + fmt_double(r.location.lat) + "," + std::to_string(r.year) + "," +
           std::to_string(r.month) + "," + std::string(to_string(r.species)) + "," + std::string(to_string(r.behavior)) +
           "," + std::to_string(r.group_size) + "\n";
  }
  return out;
}

std::vector<SightingRecord> read_sightings_csv(const fs::path& path) {
  try {
    return parse_sightings_csv(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Data) throw data_error("io", path.string() + ": " + e.what());
    throw;
  }
}

void write_sightings_csv(const fs::path& path, std::span<const SightingRecord> records) {
  write_file_atomic(path, format_sightings_csv(records));
}

std::vector<Sighting> to_planar(std::span<const SightingRecord> records, LonLatPoint center) {
  std::vector<Sighting> out;
  out.reserve(records.size());
  for (const auto& r : records)
    out.push_back({project(r.location, center), r.species, r.year, r.month, r.behavior, r.group_size});
  return out;
}

std::vector<SightingRecord> to_lonlat(std::span<const Sighting> sightings, LonLatPoint center) {
  std::vector<SightingRecord> out;
  out.reserve(sightings.size());
  for (const auto& s : sightings)
    out.push_back({unproject(s.location, center), s.species, s.year, s.month, s.behavior, s.group_size});
  return out;
}

DomainFile parse_domain(const json& j0) {
  try {
    const json* j = &j0;
    if (j0.value("type", "") == "Feature") j = &j0.at("geometry");
    if (j->value("type", "") != "Polygon") throw data_error("io", "domain: expected a GeoJSON Polygon");
    std::string crs = j0.value("crs", j->value("crs", std::string("km")));
    if (crs != "km" && crs != "lonlat") throw data_error("io", "domain: crs must be 'km' or 'lonlat'");
    const json* center = j0.contains("center") ? &j0.at("center") : (j->contains("center") ? &j->at("center") : nullptr);
    std::vector<Ring> rings;
    for (const auto& r : j->at("coordinates")) {
      Ring ring;
      for (const auto& p : r) ring.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      rings.push_back(std::move(ring));
    }
    if (rings.empty()) throw data_error("io", "domain: no rings");
    DomainFile d;
    if (crs == "lonlat") {
      if (center) {
        d.center = {center->at(0).get<double>(), center->at(1).get<double>()};
      } else {
        auto bb = bounding_box(rings[0]);
        d.center = {0.5 * (bb[0] + bb[2]), 0.5 * (bb[1] + bb[3])};
      }
      for (auto& ring : rings)
        for (auto& p : ring) p = project(LonLatPoint{p.x, p.y}, d.center);
    } else {
      if (!center) throw data_error("io", "domain: a km polygon needs a 'center' [lon, lat] for projecting sightings");
      d.center = {center->at(0).get<double>(), center->at(1).get<double>()};
    }
    Ring outer = std::move(rings[0]);
    rings.erase(rings.begin());
    d.domain = make_domain(std::move(outer), std::move(rings));
    return d;
  } catch (const json::exception& e) {
    throw data_error("io", std::string("domain: ") + e.what());
  }
}

json domain_to_json(const DomainFile& d) {
  json coords = json::array();
  auto ring_json = [](const Ring& r) {
    json a = json::array();
    for (auto p : r) a.push_back({p.x, p.y});
    return a;
  };
  coords.push_back(ring_json(d.domain.outer));
  for (const auto& h : d.domain.holes) coords.push_back(ring_json(h));
  return json{{"type", "Polygon"}, {"crs", "km"}, {"center", {d.center.lon, d.center.lat}}, {"coordinates", coords}};
}

DomainFile read_domain(const fs::path& path) {
  try {
    return parse_domain(read_json(path));
  } catch (const Error& e) {
    throw Error(e.kind(), "io", path.string() + ": " + e.what());
  }
}

void write_domain(const fs::path& path, const DomainFile& d) { write_file_atomic(path, domain_to_json(d).dump(2) + "\n"); }

fs::path grid_payload_path(const fs::path& header) { return swap_suffix(header, ".json", ".bin"); }

CovariateGrid read_grid(const fs::path& header) {
  json j = read_json(header);
  CovariateGrid g;
  try {
    g.x0 = j.at("x0");
    g.y0 = j.at("y0");
    g.dx = j.at("dx");
    g.dy = j.at("dy");
    g.nx = j.at("nx");
    g.ny = j.at("ny");
    g.month = j.value("month", 0);
    g.year = j.value("year", 0);
    g.missing = j.value("missing", -9999.0);
  } catch (const json::exception& e) {
    throw data_error("io", header.string() + ": " + e.what());
  }
  if (g.nx <= 0 || g.ny <= 0) throw data_error("io", header.string() + ": grid dimensions must be positive");
  const std::string bin = read_file(grid_payload_path(header));
  const std::size_t n = static_cast<std::size_t>(g.nx) * g.ny;
  if (bin.size() != n * sizeof(double))
    throw data_error("io", grid_payload_path(header).string() + ": expected " + std::to_string(n) + " float64 values");
  if (!is_little_endian()) throw data_error("io", "big-endian hosts are not supported");
  g.values.resize(n);
  std::memcpy(g.values.data(), bin.data(), bin.size());
  g.validate();
  return g;
}

void write_grid(const fs::path& header, const CovariateGrid& g) {
  json j{{"x0", g.x0}, {"y0", g.y0}, {"dx", g.dx}, {"dy", g.dy}, {"nx", g.nx}, {"ny", g.ny},
         {"month", g.month}, {"year", g.year}, {"missing", g.missing}};
  std::string bin;
  put_array(bin, g.values.data(), g.values.size());
  write_file_atomic(grid_payload_path(header), bin);
  write_file_atomic(header, j.dump(2) + "\n");
}

fs::path mesh_payload_path(const fs::path& header) { return swap_suffix(header, ".json", ".bin"); }

Mesh read_mesh(const fs::path& header) {
  json j = read_json(header);
  std::size_t nv = 0, nt = 0;
  try {
    nv = j.at("n_vertices");
    nt = j.at("n_triangles");
  } catch (const json::exception& e) {
    throw data_error("io", header.string() + ": " + e.what());
  }
  std::string bin = read_file(mesh_payload_path(header));
  Reader rd{bin, 0, mesh_payload_path(header).string()};
  Mesh m;
  m.vertices.resize(nv);
  m.triangles.resize(nt);
  m.boundary.resize(nv);
  std::vector<double> xy(2 * nv);
  rd.get(xy.data(), xy.size());
  for (std::size_t v = 0; v < nv; ++v) m.vertices[v] = {xy[2 * v], xy[2 * v + 1]};
  std::vector<std::int32_t> tri(3 * nt);
  rd.get(tri.data(), tri.size());
  for (std::size_t t = 0; t < nt; ++t)
    for (int k = 0; k < 3; ++k) {
      const int v = tri[3 * t + k];
      if (v < 0 || static_cast<std::size_t>(v) >= nv)
        throw data_error("io", header.string() + ": triangle " + std::to_string(t) + " has a bad vertex index");
      m.triangles[t][k] = v;
    }
  rd.get(m.boundary.data(), nv);
  if (rd.pos != bin.size()) throw data_error("io", rd.what + ": trailing bytes");
  return m;
}

void write_mesh(const fs::path& header, const Mesh& m) {
  auto q = mesh_quality(m);
  json j{{"n_vertices", m.n_vertices()}, {"n_triangles", m.n_triangles()}, {"area", m.total_area()},
         {"min_angle_deg", q.min_angle_deg}, {"min_edge", q.min_edge}, {"max_edge", q.max_edge},
         {"payload", mesh_payload_path(header).filename().string()}};
  std::string bin;
  for (auto p : m.vertices) {
    put_bytes(bin, &p.x, sizeof(double));
    put_bytes(bin, &p.y, sizeof(double));
  }
  for (const auto& t : m.triangles)
    for (int v : t) {
      std::int32_t i = v;
      put_bytes(bin, &i, sizeof i);
    }
  put_array(bin, m.boundary.data(), m.boundary.size());
  write_file_atomic(mesh_payload_path(header), bin);
  write_file_atomic(header, j.dump(2) + "\n");
}

namespace {

json hyper_state_json(const HyperState& h) {
  auto arr = [](const auto& a) { return json(std::vector<double>(a.begin(), a.end())); };
  return json{{"theta", arr(h.theta)}, {"log_tau_month", arr(h.log_tau_month)}, {"log_tau_year", arr(h.log_tau_year)},
              {"log_size", arr(h.log_size)}, {"rho", arr(h.rho)}};
}

HyperState hyper_state_from_json(const json& j) {
  HyperState h;
  auto fill = [&](const char* key, auto& a) {
    auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != a.size()) throw data_error("io", std::string("fit: bad length for ") + key);
    std::copy(v.begin(), v.end(), a.begin());
  };
  fill("theta", h.theta);
  fill("log_tau_month", h.log_tau_month);
  fill("log_tau_year", h.log_tau_year);
  fill("log_size", h.log_size);
  fill("rho", h.rho);
  return h;
}

json rows_json(std::span<const SummaryRow> rows) {
  json a = json::array();
  for (const auto& r : rows) a.push_back({{"name", r.name}, {"mean", r.mean}, {"q025", r.q025}, {"q975", r.q975}});
  return a;
}

constexpr char kFitMagic[8] = {'C', 'X', 'F', 'I', 'T', '0', '0', '1'};

}  // namespace

json fit_report(const ModelFit& fit, const Model& model) {
  auto fixed = fixed_effect_summaries(fit, model);
  auto all = summaries(fit, model);
  std::vector<SummaryRow> hyper_rows(all.begin() + static_cast<long>(fixed.size()), all.end());
  json hyper = json::object();
  for (int i = 0; i < fit.hyper_packed.size(); ++i) hyper[fit.hyper_names[i]] = fit.hyper_packed[i];
  json cov = json::array();
  for (int i = 0; i < fit.hyper_cov.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < fit.hyper_cov.cols(); ++k) row.push_back(fit.hyper_cov(i, k));
    cov.push_back(row);
  }
  return json{{"converged", fit.converged},
              {"hyper", hyper},
              {"hyper_state", hyper_state_json(fit.hyper)},
              {"hyper_summaries", rows_json(hyper_rows)},
              {"hyper_cov", cov},
              {"fixed_effects", rows_json(fixed)},
              {"diagnostics",
               {{"nll", fit.objective},
                {"log_marginal", fit.log_marginal},
                {"logdet", fit.logdet},
                {"iters", fit.outer_iterations},
                {"evaluations", fit.evaluations},
                {"latent_dim", fit.mode.size()}}},
              {"scalers",
               {{"dcoast", {model.data().dcoast_scaler.mean, model.data().dcoast_scaler.sd}},
                {"sst", {model.data().sst_scaler.mean, model.data().sst_scaler.sd}}}}};
}

std::string fit_payload(const ModelFit& fit) {
  std::string out(kFitMagic, sizeof kFitMagic);
  const auto& L = fit.hessian.lower();
  std::uint64_t n = fit.mode.size(), nnz = L.nonZeros();
  put_bytes(out, &n, sizeof n);
  put_bytes(out, &nnz, sizeof nnz);
  put_array(out, fit.mode.data(), n);
  for (int c = 0; c < L.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, c); it; ++it) {
      std::int32_t r = static_cast<std::int32_t>(it.row()), cc = c;
      double v = it.value();
      put_bytes(out, &r, sizeof r);
      put_bytes(out, &cc, sizeof cc);
      put_bytes(out, &v, sizeof v);
    }
  return out;
}

ModelFit restore_fit(const json& report, std::string_view payload, const Model& model) {
  ModelFit fit;
  try {
    fit.hyper = hyper_state_from_json(report.at("hyper_state"));
    fit.converged = report.at("converged");
    const auto& d = report.at("diagnostics");
    fit.objective = d.at("nll");
    fit.log_marginal = d.at("log_marginal");
    fit.outer_iterations = d.at("iters");
    fit.evaluations = d.at("evaluations");
    const auto& cov = report.at("hyper_cov");
    if (!cov.empty()) {
      fit.hyper_cov.resize(cov.size(), cov.size());
      for (std::size_t i = 0; i < cov.size(); ++i)
        for (std::size_t k = 0; k < cov.size(); ++k) fit.hyper_cov(i, k) = cov[i][k];
    }
  } catch (const json::exception& e) {
    throw data_error("io", std::string("fit report: ") + e.what());
  }
  fit.hyper_names = model.hyper_layout().names();
  fit.hyper_packed = model.hyper_layout().pack(fit.hyper);
  if (payload.size() < sizeof kFitMagic || std::memcmp(payload.data(), kFitMagic, sizeof kFitMagic) != 0)
    throw data_error("io", "fit payload: bad magic");
  Reader rd{payload, sizeof kFitMagic, "fit payload"};
  std::uint64_t n = 0, nnz = 0;
  rd.get(&n, 1);
  rd.get(&nnz, 1);
  if (static_cast<int>(n) != model.layout().dim)
    throw data_error("io", "fit payload: latent dimension " + std::to_string(n) + " does not match the model (" +
                               std::to_string(model.layout().dim) + ")");
  fit.mode.resize(static_cast<long>(n));
  rd.get(fit.mode.data(), n);
  std::vector<SymSparse::Triplet> trip;
  trip.reserve(nnz);
  for (std::uint64_t k = 0; k < nnz; ++k) {
    std::int32_t r, c;
    double v;
    rd.get(&r, 1);
    rd.get(&c, 1);
    rd.get(&v, 1);
    trip.emplace_back(r, c, v);
  }
  fit.hessian = SymSparse::from_triplets(static_cast<int>(n), trip);
  fit.refresh();
  return fit;
}

std::string format_raster_csv(const PredictionRaster& r) {
  std::string out = "x,y,mean,sd\n";
  const auto& g = r.geometry;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * g.nx + i;
      PlanarPoint p = g.node(i, j);
      out += fmt_double(p.x) + "," + fmt_double(p.y) + "," + fmt_double(r.mean[k]) + "," + fmt_double(r.sd[k]) + "\n";
    }
  return out;
}

json raster_geometry_json(const PredictionRaster& r) {
  const auto& g = r.geometry;
  return json{{"x0", g.x0}, {"y0", g.y0}, {"dx", g.dx}, {"dy", g.dy}, {"nx", g.nx}, {"ny", g.ny},
              {"month", r.month}, {"year", r.year}, {"missing", "NaN"}, {"species", std::string(to_string(r.species))}};
}

std::string format_kfunction_csv(const KFunctionResult& k) {
  std::string out = "r,khat,norm,lo,hi\n";
  for (std::size_t i = 0; i < k.radii.size(); ++i)
    out += fmt_double(k.radii[i]) + "," + fmt_double(k.khat[i]) + "," + fmt_double(k.normalized[i]) + "," +
           fmt_double(i < k.lo.size() ? k.lo[i] : NAN) + "," + fmt_double(i < k.hi.size() ? k.hi[i] : NAN) + "\n";
  return out;
}

json score_json(const Scores& s) {
  auto one = [](const ScoreReport& r) {
    return json{{"n", r.n}, {"mean_log_score", r.mean_log_score}, {"waic", r.waic}, {"lppd", r.lppd},
                {"p_waic", r.p_waic}, {"waic_per_obs", r.waic_per_obs}, {"n_zero_density", r.n_zero_density}};
  };
  return json{{"combined", one(s.combined)}, {"marks", one(s.marks)}, {"locations", one(s.locations)}};
}

namespace {

std::string colour(double t) {
  static const double stops[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4;
  const int k = std::min(3, static_cast<int>(t));
  const double f = t - k;
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(stops[k][0] + f * (stops[k + 1][0] - stops[k][0])),
                static_cast<int>(stops[k][1] + f * (stops[k + 1][1] - stops[k][1])),
                static_cast<int>(stops[k][2] + f * (stops[k + 1][2] - stops[k][2])));
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string raster_svg(const PredictionRaster& r, const DomainPolygon& domain) {
  const auto& g = r.geometry;
  const double w = g.nx * g.dx, h = g.ny * g.dy;
  const double scale = 600.0 / std::max(w, h);
  const double x0 = g.x0 - 0.5 * g.dx, y0 = g.y0 - 0.5 * g.dy;
  double lo = INFINITY, hi = -INFINITY;
  for (double v : r.mean)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > lo)) hi = lo + 1;
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w * scale) + "\" height=\"" +
                  num(h * scale) + "\">\n";
  auto sx = [&](double x) { return num((x - x0) * scale); };
  auto sy = [&](double y) { return num((y0 + h - y) * scale); };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double v = r.mean[static_cast<std::size_t>(j) * g.nx + i];
      if (!std::isfinite(v)) continue;
      PlanarPoint c = g.node(i, j);
      s += "<rect x=\"" + sx(c.x - 0.5 * g.dx) + "\" y=\"" + sy(c.y + 0.5 * g.dy) + "\" width=\"" + num(g.dx * scale) +
           "\" height=\"" + num(g.dy * scale) + "\" fill=\"" + colour((v - lo) / (hi - lo)) + "\"/>\n";
    }
  auto ring = [&](const Ring& rg) {
    std::string pts;
    for (auto p : rg) pts += sx(p.x) + "," + sy(p.y) + " ";
    return "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
  };
  s += ring(domain.outer);
  for (const auto& hr : domain.holes) s += ring(hr);
  s += "</svg>\n";
  return s;
}

std::string kfunction_svg(const KFunctionResult& k) {
  const double W = 600, H = 400, pad = 40;
  double lo = 0, hi = 0;
  auto upd = [&](double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  for (std::size_t i = 0; i < k.radii.size(); ++i) {
    upd(k.normalized[i]);
    if (i < k.lo.size()) upd(k.lo[i]);
    if (i < k.hi.size()) upd(k.hi[i]);
  }
  if (!(hi > lo)) hi = lo + 1;
  const double rmax = k.radii.empty() ? 1.0 : k.radii.back();
  auto px = [&](double r) { return num(pad + (W - 2 * pad) * r / rmax); };
  auto py = [&](double v) { return num(H - pad - (H - 2 * pad) * (v - lo) / (hi - lo)); };
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"400\">\n";
  if (!k.lo.empty()) {
    std::string band;
    for (std::size_t i = 0; i < k.radii.size(); ++i)
      if (std::isfinite(k.hi[i])) band += px(k.radii[i]) + "," + py(k.hi[i]) + " ";
    for (std::size_t i = k.radii.size(); i-- > 0;)
      if (std::isfinite(k.lo[i])) band += px(k.radii[i]) + "," + py(k.lo[i]) + " ";
    s += "<polygon points=\"" + band + "\" fill=\"#cccccc\" stroke=\"none\"/>\n";
  }
  s += "<line x1=\"" + px(0) + "\" y1=\"" + py(0) + "\" x2=\"" + px(rmax) + "\" y2=\"" + py(0) +
       "\" stroke=\"black\" stroke-dasharray=\"4,3\"/>\n";
  std::string line;
  for (std::size_t i = 0; i < k.radii.size(); ++i)
    if (std::isfinite(k.normalized[i])) line += px(k.radii[i]) + "," + py(k.normalized[i]) + " ";
  s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"#b2182b\" stroke-width=\"2\"/>\n";
  s += "<text x=\"" + num(W / 2) + "\" y=\"" + num(H - 8) + "\" text-anchor=\"middle\" font-size=\"12\">r (km)</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace coxmesh
