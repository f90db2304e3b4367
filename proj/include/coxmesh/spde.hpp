#pragma once

#include <array>

#include <Eigen/Dense>

#include "coxmesh/geo.hpp"
#include "coxmesh/mesh.hpp"
#include "coxmesh/sparse.hpp"

namespace coxmesh {

inline constexpr double kMaternNu = 2.0;
inline constexpr double kSpdeAlpha = 3.0;

/// Anisotropic Matern parameters with fixed smoothness nu = 2 and kappa = 1;
/// all range information lives in H.
struct SpdeParams {
  double h_x = 1.0;   // km
  double h_y = 1.0;   // km
  double h_xy = 0.0;  // in (-1, 1)
  double sigma = 1.0;

  Eigen::Matrix2d H() const;
  double det_H() const { return h_x * h_x * h_y * h_y * (1.0 - h_xy * h_xy); }
  /// Distance at which the correlation drops to about 0.139 along an axis.
  double range_x() const;
  double range_y() const;
};

/// (log h_x, log h_y, atanh h_xy, log sigma)
using ThetaVec = std::array<double, 4>;

SpdeParams theta_to_params(const ThetaVec& theta);
ThetaVec params_to_theta(const SpdeParams& params);

/// Lumped mass and stiffness. The stiffness is kept as the three pieces
/// G_xx, G_yy and G_xy + G_yx so G_H for any H is a linear combination with
/// a fixed sparsity pattern.
struct FemMatrices {
  Vec c;  // lumped mass diagonal
  SymSparse g_xx, g_yy, g_xy;

  SymSparse stiffness(const Eigen::Matrix2d& H) const;
};

/// Throws a data error for degenerate triangles (area < 1e-12 km^2).
FemMatrices fem_matrices(const Mesh& mesh);

/// tau^2 K C^{-1} K C^{-1} K with K = C + G_H and
/// tau^2 = 1 / (8 pi sigma^2 sqrt(det H)).
SymSparse assemble_precision(const FemMatrices& fem, const SpdeParams& params);
SymSparse assemble_precision(const Mesh& mesh, const SpdeParams& params);

double spde_tau2(const SpdeParams& params);

/// Matern covariance with nu = 2: sigma^2 (u^2 / 2) K_2(u), u = sqrt(lag' H^{-1} lag).
double matern_cov(PlanarPoint lag, const SpdeParams& params);
/// Isotropic form with u = d / h.
double matern_cov(double d, double h, double sigma);
double matern_corr_u(double u);

}  // namespace coxmesh
