#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coxmesh/model.hpp"
#include "coxmesh/sparse.hpp"

namespace coxmesh {

struct NewtonOptions {
  double tol = 1e-6;  // on the sup norm of the gradient
  int max_iter = 100;
  int max_halvings = 30;
};

struct InnerResult {
  Vec mode;
  CholFactor factor;  // of the Hessian at the mode
  SymSparse hessian;
  double value = 0.0;
  int iterations = 0;
  std::vector<double> grad_trace;  // sup norm of the gradient per iterate
};

/// Newton iterations with step halving. The symbolic analysis is reused
/// across iterations and may be passed in from an earlier call.
InnerResult inner_mode(const LatentObjective& objective, const Vec& init, const NewtonOptions& options = {},
                       std::shared_ptr<const SymbolicCholesky> symbolic = nullptr);

/// -f(x_hat) + 1/2 log det P - 1/2 log det H(x_hat)
double laplace_log_marginal(const LatentObjective& objective, const InnerResult& inner);

struct OptimOptions {
  enum class Method { NelderMead, Bfgs };
  Method method = Method::NelderMead;
  int max_iter = 2000;
  double simplex_tol = 1e-4;  // simplex diameter
  double grad_tol = 1e-3;
  double initial_step = 0.5;  // Nelder-Mead simplex edge
  double fd_step = 1e-4;      // BFGS finite-difference step
};

struct OptimResult {
  Vec x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> trace;  // best value per iteration
};

using Objective = std::function<double(const Vec&)>;

OptimResult nelder_mead(const Objective& f, const Vec& x0, const OptimOptions& options);
OptimResult bfgs(const Objective& f, const Vec& x0, const OptimOptions& options);
OptimResult minimize(const Objective& f, const Vec& x0, const OptimOptions& options);

/// Central-difference Hessian.
Eigen::MatrixXd numerical_hessian(const Objective& f, const Vec& x, double step = 1e-2);

struct FitOptions {
  OptimOptions optim;
  NewtonOptions newton;
  bool optimize = true;          // false: evaluate at the initial hyperparameters only
  bool hyper_covariance = true;  // delta-method intervals from a numerical Hessian
  double hessian_step = 0.05;
};

struct ModelFit {
  HyperState hyper;
  std::vector<std::string> hyper_names;
  Vec hyper_packed;
  Eigen::MatrixXd hyper_cov;  // empty when not computed or not positive definite
  Vec mode;
  SymSparse hessian;
  std::shared_ptr<CholFactor> factor;
  Vec latent_sd;
  double log_marginal = 0.0;
  double objective = 0.0;  // f at the mode
  double logdet = 0.0;     // of the posterior precision
  int outer_iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> trace;

  /// Rebuild the factor and latent sds from the stored Hessian.
  void refresh();
};

/// Evaluate the Laplace approximation at fixed hyperparameters.
ModelFit fit_at(const Model& model, const HyperState& hyper, const FitOptions& options = {},
                const Vec* init = nullptr);

/// Empirical Bayes: maximize log marginal + log hyperprior over the free
/// hyperparameters, then store the Gaussian approximation at the optimum.
ModelFit optimize_hyper(const Model& model, const HyperState& init, const FitOptions& options = {});

struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

/// Fixed effects from the Gaussian marginals, then hyperparameters on their
/// internal scale and transformed to natural units.
std::vector<SummaryRow> summaries(const ModelFit& fit, const Model& model);
std::vector<SummaryRow> fixed_effect_summaries(const ModelFit& fit, const Model& model);
std::string format_report(std::span<const SummaryRow> rows);

struct PredictionRaster {
  CovariateGrid geometry;  // values unused; nodes are cell centres
  Species species = Species::Beluga;
  int month = 0, year = 0;
  std::vector<double> mean, sd;  // NaN outside the domain
};

struct PredictOptions {
  int n_draws = 200;
  std::uint64_t seed = 1;
  bool group_size = false;  // predict the mark mean instead of the intensity
  Behavior behavior = Behavior::Swim;
};

/// Per-cell posterior mean exp(m + v/2) * cell area and Monte Carlo sd over
/// latent draws. Cells outside the domain are NaN.
PredictionRaster predict_intensity(const ModelFit& fit, const Model& model, const DomainPolygon& domain,
                                   const CovariateGrid& geometry, std::span<const CovariateGrid> sst,
                                   Species species, int month, int year, const PredictOptions& options = {});

struct GroupSizePrediction {
  std::vector<double> mean, sd;
};

GroupSizePrediction predict_group_size(const ModelFit& fit, const Model& model, const DomainPolygon& domain,
                                       std::span<const PlanarPoint> locations, Species species,
                                       Behavior behavior, const PredictOptions& options = {});

/// Latent draws x_hat + L^{-T} z, one per stream id.
Vec posterior_draw(const ModelFit& fit, std::uint64_t seed);

}  // namespace coxmesh
