#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coxmesh/eval.hpp"
#include "coxmesh/infer.hpp"
#include "coxmesh/mesh.hpp"

namespace coxmesh {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);

// Sightings: CSV with header lon,lat,year,month,species,behavior,group_size.
// Column order is free; errors carry the 1-based line number.
std::vector<SightingRecord> parse_sightings_csv(std::string_view text);
std::string format_sightings_csv(std::span<const SightingRecord> records);
std::vector<SightingRecord> read_sightings_csv(const fs::path& path);
void write_sightings_csv(const fs::path& path, std::span<const SightingRecord> records);

std::vector<Sighting> to_planar(std::span<const SightingRecord> records, LonLatPoint center);
std::vector<SightingRecord> to_lonlat(std::span<const Sighting> sightings, LonLatPoint center);

/// GeoJSON Polygon (or a Feature wrapping one) with a "crs" member of "km" or
/// "lonlat" and a projection "center" [lon, lat]. A lon/lat polygon is
/// projected; its center defaults to the bounding-box midpoint.
struct DomainFile {
  DomainPolygon domain;
  LonLatPoint center;
};
DomainFile parse_domain(const json& j);
json domain_to_json(const DomainFile& d);
DomainFile read_domain(const fs::path& path);
void write_domain(const fs::path& path, const DomainFile& d);

/// name.grid.json header plus name.grid.bin little-endian float64 payload.
fs::path grid_payload_path(const fs::path& header);
CovariateGrid read_grid(const fs::path& header);
void write_grid(const fs::path& header, const CovariateGrid& grid);

/// name.mesh.json header plus name.mesh.bin (vertices as float64 pairs,
/// triangles as int32 triples, boundary flags as bytes).
fs::path mesh_payload_path(const fs::path& header);
Mesh read_mesh(const fs::path& header);
void write_mesh(const fs::path& header, const Mesh& mesh);

/// Fit report: hyper, fixed_effects, diagnostics. The mode and posterior
/// precision go to a binary payload next to it.
json fit_report(const ModelFit& fit, const Model& model);
std::string fit_payload(const ModelFit& fit);
/// Restores mode and Hessian from a payload and hyperparameters from a report.
ModelFit restore_fit(const json& report, std::string_view payload, const Model& model);

std::string format_raster_csv(const PredictionRaster& r);
json raster_geometry_json(const PredictionRaster& r);
std::string format_kfunction_csv(const KFunctionResult& k);
json score_json(const Scores& s);

/// Minimal SVG renderings.
std::string raster_svg(const PredictionRaster& r, const DomainPolygon& domain);
std::string kfunction_svg(const KFunctionResult& k);

bool is_little_endian();

}  // namespace coxmesh
