#include "coxmesh/spde.hpp"

#include <cmath>
#include <string>

#include "coxmesh/error.hpp"

namespace coxmesh {

Eigen::Matrix2d SpdeParams::H() const {
  Eigen::Matrix2d h;
  const double off = h_x * h_y * h_xy;
  h << h_x * h_x, off, off, h_y * h_y;
  return h;
}

double SpdeParams::range_x() const { return std::sqrt(8.0 * kMaternNu) * h_x; }
double SpdeParams::range_y() const { return std::sqrt(8.0 * kMaternNu) * h_y; }

SpdeParams theta_to_params(const ThetaVec& t) {
  for (double v : t)
    if (!std::isfinite(v)) throw numerical_error("spde", "non-finite theta");
  return {std::exp(t[0]), std::exp(t[1]), std::tanh(t[2]), std::exp(t[3])};
}

ThetaVec params_to_theta(const SpdeParams& p) {
  if (!(p.h_x > 0) || !(p.h_y > 0) || !(p.sigma > 0) || !(std::abs(p.h_xy) < 1))
    throw config_error("spde", "invalid Matern parameters");
  return {std::log(p.h_x), std::log(p.h_y), std::atanh(p.h_xy), std::log(p.sigma)};
}

SymSparse FemMatrices::stiffness(const Eigen::Matrix2d& H) const {
  Eigen::SparseMatrix<double> g = H(0, 0) * g_xx.lower() + H(1, 1) * g_yy.lower() +
                                  H(0, 1) * g_xy.lower();
  return SymSparse(std::move(g));
}

FemMatrices fem_matrices(const Mesh& mesh) {
  const int n = static_cast<int>(mesh.n_vertices());
  FemMatrices fem;
  fem.c = Vec::Zero(n);
  std::vector<SymSparse::Triplet> txx, tyy, txy;
  txx.reserve(mesh.n_triangles() * 6);
  tyy.reserve(mesh.n_triangles() * 6);
  txy.reserve(mesh.n_triangles() * 9);
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const PlanarPoint p0 = mesh.vertices[tri[0]], p1 = mesh.vertices[tri[1]], p2 = mesh.vertices[tri[2]];
    const double a2 = cross(p1 - p0, p2 - p0);
    const double area = 0.5 * std::abs(a2);
    if (area < 1e-12)
      throw data_error("spde", "degenerate triangle " + std::to_string(t));
    // gradient of the hat function of vertex i: rotated opposite edge / (2 * signed area)
    const PlanarPoint e[3] = {p2 - p1, p0 - p2, p1 - p0};
    double gx[3], gy[3];
    for (int i = 0; i < 3; ++i) {
      gx[i] = -e[i].y / a2;
      gy[i] = e[i].x / a2;
    }
    for (int i = 0; i < 3; ++i) {
      fem.c[tri[i]] += area / 3.0;
      for (int j = 0; j < 3; ++j) {
        const int r = tri[i], c = tri[j];
        if (r >= c) {
          txx.emplace_back(r, c, area * gx[i] * gx[j]);
          tyy.emplace_back(r, c, area * gy[i] * gy[j]);
        }
        // symmetric cross term gx_i gy_j + gy_i gx_j, stored once per (r >= c)
        if (r > c) txy.emplace_back(r, c, area * (gx[i] * gy[j] + gy[i] * gx[j]));
        if (r == c) txy.emplace_back(r, c, area * 2.0 * gx[i] * gy[i]);
      }
    }
  }
  // One pattern for all three pieces so any combination shares it.
  std::vector<SymSparse::Triplet> pattern;
  pattern.reserve(txy.size());
  for (const auto& t : txy) pattern.emplace_back(t.row(), t.col(), 0.0);
  auto with_pattern = [&](std::vector<SymSparse::Triplet> trip) {
    trip.insert(trip.end(), pattern.begin(), pattern.end());
    return SymSparse::from_triplets(n, trip);
  };
  fem.g_xx = with_pattern(std::move(txx));
  fem.g_yy = with_pattern(std::move(tyy));
  fem.g_xy = with_pattern(std::move(txy));
  return fem;
}

double spde_tau2(const SpdeParams& p) {
  // sigma^2 = Gamma(nu) / (Gamma(alpha) (4 pi) tau^2 sqrt(det H)) with nu = 2, alpha = 3
  return std::tgamma(kMaternNu) / (std::tgamma(kSpdeAlpha) * 4.0 * M_PI * p.sigma * p.sigma *
                                   std::sqrt(p.det_H()));
}

SymSparse assemble_precision(const FemMatrices& fem, const SpdeParams& params) {
  if (!(params.det_H() > 0) || !(params.sigma > 0))
    throw numerical_error("spde", "H is not positive definite");
  const int n = static_cast<int>(fem.c.size());
  Eigen::SparseMatrix<double> K = fem.stiffness(params.H()).full();
  for (int i = 0; i < n; ++i) K.coeffRef(i, i) += fem.c[i];
  Vec cinv = fem.c.cwiseInverse();
  Eigen::SparseMatrix<double> CiK = cinv.asDiagonal() * K;
  Eigen::SparseMatrix<double> KCiK = K * CiK;
  Eigen::SparseMatrix<double> Q = KCiK * CiK;
  Q = Q.triangularView<Eigen::Lower>();
  Q *= spde_tau2(params);
  return SymSparse(std::move(Q));
}

SymSparse assemble_precision(const Mesh& mesh, const SpdeParams& params) {
  return assemble_precision(fem_matrices(mesh), params);
}

double matern_corr_u(double u) {
  if (u < 1e-8) return 1.0;
  if (u > 700.0) return 0.0;
  return 0.5 * u * u * std::cyl_bessel_k(2.0, u);
}

double matern_cov(double d, double h, double sigma) {
  return sigma * sigma * matern_corr_u(d / h);
}

double matern_cov(PlanarPoint lag, const SpdeParams& params) {
  Eigen::Vector2d v(lag.x, lag.y);
  double u2 = v.dot(params.H().ldlt().solve(v));
  return params.sigma * params.sigma * matern_corr_u(std::sqrt(std::max(0.0, u2)));
}

}  // namespace coxmesh
