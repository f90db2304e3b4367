#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coxmesh/geo.hpp"
#include "coxmesh/mesh.hpp"
#include "coxmesh/sparse.hpp"
#include "coxmesh/spde.hpp"

namespace coxmesh {

struct ModelSpec {
  std::vector<Species> species{Species::Beluga, Species::Bowhead};
  std::vector<int> months{7, 8, 9, 10};
  std::vector<int> years;
  bool use_dcoast = true;
  bool use_sst = true;
  bool include_marks = true;
  bool baseline = false;            // no latent fields and no random effects
  bool share_single_field = false;  // one field entering both intensities
  bool random_effects = true;       // month and year effects
  bool tie_rho = false;
  bool observed_strata_only = false;
  double fixed_prior_sd = 10.0;     // infinity gives a flat prior
  double tau_prior_shape = 1.0;
  double tau_prior_rate = 5e-5;
  double hyper_prior_sd = 3.0;      // Gaussian prior sd on theta, log size and rho
  double prior_range_km = 0.0;      // centre of the range prior; 0 = bbox diagonal / 10

  bool has_fields() const { return !baseline; }
  bool has_random_effects() const { return random_effects && !baseline; }
  bool has_rho() const { return include_marks && !baseline; }
  int n_fields() const { return baseline ? 0 : (share_single_field ? 1 : static_cast<int>(species.size())); }
  void validate() const;
};

/// Index of every latent coordinate. Field blocks come first, then one block
/// of fixed, random and mark effects per species.
struct LatentLayout {
  struct Block {
    Species species = Species::Beluga;
    int field = -1;  // index into field blocks
    int alpha = -1, beta = -1, gamma = -1;
    int month = -1, year = -1;  // first index of the random-effect levels
    int eta = -1, xi = -1;      // mark dcoast slope and first behavior level
  };
  int n_vertices = 0;
  int n_months = 0, n_years = 0;
  std::vector<int> field_offset;
  std::vector<Block> blocks;
  std::vector<std::string> names;
  std::vector<bool> is_fixed;  // fixed effects get the Gaussian fixed-effect prior
  int dim = 0;

  static LatentLayout build(const ModelSpec& spec, int n_vertices);
  const Block& block(Species s) const;
  int block_index(Species s) const;
};

struct HyperState {
  ThetaVec theta{std::log(1.0), std::log(1.0), 0.0, 0.0};
  std::array<double, kSpeciesCount> log_tau_month{0.0, 0.0};
  std::array<double, kSpeciesCount> log_tau_year{0.0, 0.0};
  std::array<double, kSpeciesCount> log_size{0.0, 0.0};
  std::array<double, kSpeciesCount> rho{0.0, 0.0};

  SpdeParams spde() const { return theta_to_params(theta); }
};

/// The free hyperparameters of a spec, packed into an optimizer vector.
class HyperLayout {
 public:
  HyperLayout() = default;
  explicit HyperLayout(const ModelSpec& spec);

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  Vec pack(const HyperState& h) const;
  HyperState unpack(const Vec& v, HyperState base) const;
  /// Drop a name from the free set; its value is taken from the base state.
  void fix(const std::string& name);

 private:
  enum class Kind { Theta, TauMonth, TauYear, Size, Rho, RhoTied };
  struct Entry {
    Kind kind;
    int index;
  };
  std::vector<std::string> names_;
  std::vector<Entry> entries_;
};

struct ObsPoint {
  Species species = Species::Beluga;
  int stratum = 0;
  PlanarPoint location;
  std::array<int, 3> vertex{};
  std::array<double, 3> weight{};
  double dcoast = 0.0;  // standardized
  double sst = 0.0;     // standardized
  Behavior behavior = Behavior::Swim;
  int group_size = 1;
};

struct Stratum {
  int month = 0, year = 0;          // calendar values
  int month_idx = 0, year_idx = 0;  // levels in ModelSpec::months / years
  std::vector<int> node;            // mesh vertices with positive weight
  std::vector<double> weight, dcoast, sst;
  std::vector<double> vertex_sst;   // standardized, every mesh vertex (empty without sst)
};

struct ModelData {
  Mesh mesh;
  FemMatrices fem;
  std::vector<Stratum> strata;
  std::vector<ObsPoint> points;
  std::vector<double> vertex_dcoast;  // standardized, every mesh vertex
  Scaler dcoast_scaler, sst_scaler;
};

struct DataOptions {
  std::optional<Scaler> dcoast_scaler;  // reuse stored constants instead of estimating
  std::optional<Scaler> sst_scaler;
  std::vector<CovariateGrid> effort;    // per (month, year) multiplier of the dual weights
};

/// Covariates, strata, quadrature and projector rows for a set of sightings.
ModelData prepare_data(const ModelSpec& spec, const Mesh& mesh, const DomainPolygon& domain,
                       std::span<const Sighting> sightings, std::span<const CovariateGrid> sst,
                       const DataOptions& options = {});

/// Standardized covariates at an arbitrary location; sst uses the grid for
/// (month, year) and is clamped into the grid hull.
double sst_at(std::span<const CovariateGrid> sst, int month, int year, PlanarPoint p);

/// Negative binomial log pmf, mean-size parametrization (Var = mu + mu^2 / k).
double nb_log_pmf(int y, double mu, double k);

/// Sparse linear form over the latent vector.
using DesignRow = std::vector<std::pair<int, double>>;

class LatentObjective;

class Model {
 public:
  Model(ModelSpec spec, ModelData data);

  const ModelSpec& spec() const { return spec_; }
  const ModelData& data() const { return data_; }
  const LatentLayout& layout() const { return layout_; }
  const HyperLayout& hyper_layout() const { return hyper_layout_; }
  HyperLayout& hyper_layout() { return hyper_layout_; }

  /// Reasonable starting hyperparameters for this data set.
  HyperState default_hyper() const;

  DesignRow intensity_design(Species s, int month_idx, int year_idx, double dcoast, double sst,
                             const std::array<int, 3>& vertex, const std::array<double, 3>& weight) const;
  DesignRow mark_design(Species s, Behavior b, double dcoast, double rho, const std::array<int, 3>& vertex,
                        const std::array<double, 3>& weight) const;
  DesignRow intensity_design(const ObsPoint& p) const;
  DesignRow mark_design(const ObsPoint& p, const HyperState& h) const;

  /// Log-intensity at arbitrary locations for one stratum; covariates are
  /// standardized values.
  std::vector<double> log_intensity(const Vec& x, Species s, std::span<const PlanarPoint> locations, int month,
                                    int year, std::span<const double> dcoast, std::span<const double> sst) const;

  /// Log-intensity at every mesh vertex for one species and stratum.
  Vec vertex_log_intensity(const Vec& x, Species s, int stratum) const;

  double lgcp_nll(const Vec& x) const;
  double nb_mark_nll(const Vec& x, const HyperState& h) const;

  /// f(x) = lgcp_nll + nb_mark_nll + 1/2 x' P x with P the Gaussian prior precision.
  std::unique_ptr<LatentObjective> objective(const HyperState& h) const;

  /// log density of the hyperprior on the packed scale.
  double log_hyperprior(const HyperState& h) const;

  int stratum_index(int month, int year) const;  // -1 when inactive
  int species_count() const { return static_cast<int>(spec_.species.size()); }

 private:
  ModelSpec spec_;
  ModelData data_;
  LatentLayout layout_;
  HyperLayout hyper_layout_;
  double range_center_ = 1.0;
};

/// Interface consumed by the Laplace engine. f must be the full negative log
/// joint density up to the Gaussian normalizing constant of the prior.
class LatentObjective {
 public:
  virtual ~LatentObjective() = default;
  virtual int dim() const = 0;
  virtual double value(const Vec& x) const = 0;
  /// Returns f(x); fills the gradient and the (lower) Hessian when requested.
  virtual double evaluate(const Vec& x, Vec* grad, SymSparse* hess) const = 0;
  /// log det of the proper part of the Gaussian prior precision.
  virtual double prior_log_det() const = 0;
};

}  // namespace coxmesh
