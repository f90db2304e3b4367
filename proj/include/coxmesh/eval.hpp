#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coxmesh/infer.hpp"
#include "coxmesh/model.hpp"

namespace coxmesh {

struct ScoreReport {
  std::size_t n = 0;
  double mean_log_score = 0.0;
  double waic = 0.0;
  double lppd = 0.0;
  double p_waic = 0.0;
  double waic_per_obs = 0.0;
  std::size_t n_zero_density = 0;  // units whose predictive density underflowed to zero
};

/// Streaming pointwise predictive summaries: per unit, log-mean-exp of the
/// log densities (lppd term) and their variance (p_waic term) across draws.
class ScoreAccumulator {
 public:
  explicit ScoreAccumulator(std::size_t n_units);

  void add_draw(std::span<const double> log_density);
  std::size_t n_units() const { return max_.size(); }
  std::size_t n_draws() const { return draws_; }
  /// Summary over units [begin, end).
  ScoreReport report(std::size_t begin, std::size_t end) const;
  ScoreReport report() const { return report(0, n_units()); }

 private:
  std::size_t draws_ = 0;
  std::vector<double> max_, sum_;    // running log-sum-exp as max + log(sum)
  std::vector<double> mean_, m2_;    // Welford
};

struct ScoreOptions {
  int n_draws = 500;
  std::uint64_t seed = 1;
};

/// Units: one per mark record (when marks are modelled), then one Poisson
/// count per (species, stratum, quadrature node); points count towards their
/// nearest mesh vertex.
struct Scores {
  ScoreReport marks, locations, combined;
};

Scores score(const Model& model, const ModelFit& fit, const ScoreOptions& options = {});
/// n_draws >= 500.
ScoreReport waic(const Model& model, const ModelFit& fit, int n_draws, std::uint64_t seed);
/// n_draws >= 100.
double mean_log_score(const Model& model, const ModelFit& fit, int n_draws, std::uint64_t seed);

enum class EdgeCorrection { None, Border, Translation };
EdgeCorrection parse_edge_correction(const std::string& name);
std::string to_string(EdgeCorrection c);

/// Inhomogeneous K-function at increasing radii. Translation needs a convex
/// domain without holes.
std::vector<double> k_inhom(std::span<const PlanarPoint> points, std::span<const double> lambda,
                            const DomainPolygon& domain, std::span<const double> radii,
                            EdgeCorrection correction = EdgeCorrection::Border);

/// khat / (pi r^2) - 1
std::vector<double> normalize_k(std::span<const double> khat, std::span<const double> radii);

struct KFunctionResult {
  std::vector<double> radii, khat, normalized, lo, hi;
  int n_sim = 0;
  std::vector<std::vector<double>> simulated;  // normalized curve per simulation
};

/// Intensity used inside each K estimate. Refit: conditional mode of the
/// location model at the fitted hyperparameters, recomputed for every pattern
/// (observed and simulated alike). PlugIn: the fitted mode for all patterns.
enum class EnvelopeIntensity { Refit, PlugIn };

EnvelopeIntensity parse_envelope_intensity(const std::string& name);
std::string to_string(EnvelopeIntensity i);

struct EnvelopeOptions {
  int n_sim = 99;
  std::uint64_t seed = 1;
  EdgeCorrection correction = EdgeCorrection::Border;
  EnvelopeIntensity intensity = EnvelopeIntensity::Refit;
  int max_retries = 5;
};

/// Observed normalized K for one species and stratum with pointwise 2.5/97.5%
/// envelopes from patterns simulated under the fitted model.
KFunctionResult k_envelope(const Model& model, const ModelFit& fit, const DomainPolygon& domain, Species species,
                           int month, int year, std::span<const double> radii, const EnvelopeOptions& options = {});

/// Equally spaced radii (step, 2 step, ..., n step).
std::vector<double> default_radii(double r_max, int n = 40);

/// Type-7 sample quantile.
double quantile(std::vector<double> v, double p);

}  // namespace coxmesh
