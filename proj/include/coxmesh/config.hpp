#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coxmesh/eval.hpp"
#include "coxmesh/io.hpp"
#include "coxmesh/mesh.hpp"
#include "coxmesh/model.hpp"
#include "coxmesh/sim.hpp"

namespace coxmesh {

/// TOML document as JSON (tables become objects, arrays stay arrays).
json toml_to_json(std::string_view text, const std::string& source = "config");
/// .json files are parsed as JSON, anything else as TOML.
json load_config_document(const fs::path& path);

json spec_to_json(const ModelSpec& spec);
/// Unknown keys are rejected; the message names the key.
ModelSpec spec_from_json(const json& j, const std::string& prefix = "model");

struct RunConfig {
  fs::path base_dir;  // relative paths resolve against it
  std::uint64_t seed = 1;
  int threads = 0;

  struct Paths {
    fs::path data, domain, mesh;
    std::vector<fs::path> covariates, effort;
  } paths;

  MeshOptions mesh;
  ModelSpec model;

  struct Inference {
    FitOptions fit;
    double init_range_km = 0.0;  // 0: from the data
    double init_sigma = 1.0;
    std::vector<std::string> fixed;  // hyper names held at their initial values
  } inference;

  struct Prediction {
    double cell_km = 5.0;
    int draws = 200;
  } prediction;

  struct Evaluation {
    int draws = 500;
  } evaluation;

  struct KFunc {
    double r_max = 0.0;  // 0: a quarter of the shorter bounding-box side
    int n_radii = 40;
    int n_sim = 99;
    EdgeCorrection correction = EdgeCorrection::Border;
    EnvelopeIntensity intensity = EnvelopeIntensity::Refit;
  } kfunc;

  struct Simulation {
    SpdeParams field{10.0, 10.0, 0.0, 1.0};
    std::array<SpeciesEffects, kSpeciesCount> effects{};
  } simulation;

  struct Outputs {
    fs::path dir = "out";
    bool svg = true;
  } outputs;

  fs::path resolve(const fs::path& p) const;
};

RunConfig parse_run_config(const json& doc, const fs::path& base_dir);
RunConfig load_run_config(const fs::path& path);
/// Resolved (absolute-path) form; parse_run_config of it gives the same config.
json run_config_to_json(const RunConfig& c);

/// Config error naming the key when a referenced file does not exist.
void check_paths(const RunConfig& c, bool need_data);

}  // namespace coxmesh
