#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "coxmesh/config.hpp"

namespace coxmesh {

struct Inputs {
  DomainFile domain;
  Mesh mesh;
  std::vector<CovariateGrid> sst, effort;
  std::vector<Sighting> sightings;
  std::size_t snapped = 0, dropped = 0;
};

/// Reads the domain, mesh (or builds it from the [mesh] section), covariate
/// grids and, when asked, the sightings (projected and snapped to the domain).
Inputs load_inputs(const RunConfig& config, bool need_data, std::ostream* log = nullptr);

Model build_model(const RunConfig& config, const Inputs& inputs, const DataOptions& options = {});
HyperState initial_hyper(const RunConfig& config, const Model& model);
/// Fixes the hyperparameters listed in inference.fixed, then fits.
ModelFit run_fit(const RunConfig& config, Model& model, std::ostream* log = nullptr);

/// Cell-centred grid over the domain bounding box.
CovariateGrid prediction_geometry(const DomainPolygon& domain, double cell_km);

/// Entry point of the coxmesh executable. Exit codes: 0 success, 1 config
/// error, 2 data error, 3 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coxmesh
