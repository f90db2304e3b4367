#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "coxmesh/infer.hpp"
#include "coxmesh/model.hpp"
#include "coxmesh/rng.hpp"

namespace coxmesh {

/// Field draw at the mesh vertices from N(0, Q^{-1}).
Vec simulate_field(const Mesh& mesh, const SpdeParams& params, std::uint64_t seed);
Vec simulate_field(const CholFactor& q_factor, std::uint64_t seed);

/// Inhomogeneous Poisson process whose log-intensity is linear on each mesh
/// triangle (vertex values log_lambda, -inf allowed), restricted to the
/// domain. Lewis-Shedler thinning per triangle with bound exp(max vertex value).
std::vector<PlanarPoint> simulate_pattern(const Mesh& mesh, std::span<const double> log_lambda,
                                          const DomainPolygon& domain, Rng& rng);
std::vector<PlanarPoint> simulate_pattern(const Mesh& mesh, std::span<const double> log_lambda,
                                          const DomainPolygon& domain, std::uint64_t seed);

/// Integral of exp(piecewise-linear log_lambda) over the triangles inside the domain.
double integrate_intensity(const Mesh& mesh, std::span<const double> log_lambda, const DomainPolygon& domain);

/// Negative binomial draws (mean-size parametrization) via the gamma-Poisson mixture.
std::vector<int> simulate_marks(std::span<const double> log_mu, std::span<const double> size, Rng& rng);
std::vector<int> simulate_marks(std::span<const double> log_mu, std::span<const double> size, std::uint64_t seed);

struct SpeciesEffects {
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  double eta = 0.0;
  std::array<double, kBehaviorCount> xi{};
  double tau_month = 10.0, tau_year = 10.0;
  double size = 1.0;
  double rho = 0.0;
  std::array<double, kBehaviorCount> behavior_probs{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
};

struct SimConfig {
  ModelSpec spec;
  DomainPolygon domain;
  Mesh mesh;
  SpdeParams field;
  std::array<SpeciesEffects, kSpeciesCount> effects{};
  std::vector<CovariateGrid> sst;
  std::optional<Scaler> dcoast_scaler, sst_scaler;
  std::uint64_t seed = 1;
};

struct SimTruth {
  std::vector<Vec> fields;  // one per field block, mesh vertex values
  std::array<std::vector<double>, kSpeciesCount> month_effect, year_effect;
  std::array<std::vector<double>, kSpeciesCount> expected_count;  // per (month, year) stratum, years outer
  Scaler dcoast_scaler, sst_scaler;
};

struct SimResult {
  std::vector<Sighting> sightings;
  SimTruth truth;
};

/// Seed streams: field {field, g}, random effects {random_effects, g},
/// pattern {pattern, g, stratum}, behaviors {behaviors, g, stratum},
/// marks {marks, g, stratum}; g is the species id (0 for a shared field).
SimResult simulate_dataset(const SimConfig& config);

/// One realization from the fitted model: latent draw from the Gaussian
/// approximation, then thinning for the given species and stratum.
std::vector<PlanarPoint> simulate_from_fit(const Model& model, const ModelFit& fit, const DomainPolygon& domain,
                                           Species species, int stratum, std::uint64_t seed);

}  // namespace coxmesh
