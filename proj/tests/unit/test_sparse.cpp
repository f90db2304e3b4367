#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "coxmesh/error.hpp"
#include "coxmesh/mesh.hpp"
#include "coxmesh/sparse.hpp"

using namespace coxmesh;

namespace {
Eigen::MatrixXd random_spd(int n, int seed, double density = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (u(rng) < density) a(i, j) = z(rng);
  return a.transpose() * a + Eigen::MatrixXd::Identity(n, n);
}

// Sparse SPD with graph-Laplacian structure on a mesh: I + L.
SymSparse mesh_laplacian(const Mesh& m) {
  std::vector<SymSparse::Triplet> t;
  const int n = static_cast<int>(m.n_vertices());
  std::vector<double> deg(n, 0.0);
  for (const auto& tri : m.triangles)
    for (int i = 0; i < 3; ++i) {
      int a = tri[i], b = tri[(i + 1) % 3];
      t.emplace_back(std::max(a, b), std::min(a, b), -0.5);
      deg[a] += 0.5;
      deg[b] += 0.5;
    }
  for (int i = 0; i < n; ++i) t.emplace_back(i, i, 1.0 + deg[i]);
  return SymSparse::from_triplets(n, t);
}
}  // namespace

TEST_CASE("factorize: trivial cases") {
  auto f = factorize(SymSparse::identity(5));
  CHECK(f.logdet() == doctest::Approx(0.0));
  CHECK((f.dense_L() - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-15);
  Eigen::MatrixXd d2 = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  CHECK(factorize(SymSparse::from_dense(d2)).logdet() == doctest::Approx(2 * std::log(2.0)));
}

TEST_CASE("factorize: random dense SPD against eigenvalues") {
  for (int seed : {1, 2, 3}) {
    Eigen::MatrixXd a = random_spd(50, seed);
    auto q = SymSparse::from_dense(a);
    auto f = factorize(q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    double oracle = es.eigenvalues().array().log().sum();
    CHECK(std::abs(f.logdet() - oracle) < 1e-8);
    // P Q P^T = L L^T
    const auto& perm = f.symbolic().perm;
    Eigen::MatrixXd paq(50, 50);
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 50; ++j) paq(i, j) = a(perm[i], perm[j]);
    Eigen::MatrixXd L = f.dense_L();
    CHECK((L * L.transpose() - paq).norm() / paq.norm() < 1e-8);
  }
}

TEST_CASE("factorize: sparse random SPD with natural and AMD ordering") {
  Eigen::MatrixXd a = random_spd(80, 9, 0.03);
  auto q = SymSparse::from_dense(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  double oracle = es.eigenvalues().array().log().sum();
  auto fa = factorize(q, analyze(q, Ordering::Amd));
  auto fn = factorize(q, analyze(q, Ordering::Natural));
  CHECK(std::abs(fa.logdet() - oracle) < 1e-8);
  CHECK(std::abs(fn.logdet() - oracle) < 1e-8);
}

TEST_CASE("factorize: non-positive pivot is reported") {
  Eigen::MatrixXd a(3, 3);
  a << 1, 0, 0, 0, 1, 2, 0, 2, 1;
  try {
    factorize(SymSparse::from_dense(a), analyze(SymSparse::from_dense(a), Ordering::Natural));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numerical);
    CHECK(std::string(e.what()).find("not positive definite (pivot 2") != std::string::npos);
  }
}

TEST_CASE("AMD reduces fill on a planar mesh Laplacian") {
  auto mesh = build_mesh(make_rectangle(0, 0, 1, 1), MeshOptions{.inner_res = 0.04});
  auto q = mesh_laplacian(mesh);
  auto fa = factorize(q, analyze(q, Ordering::Amd));
  auto fn = factorize(q, analyze(q, Ordering::Natural));
  INFO("amd ", fa.nnz(), " natural ", fn.nnz());
  CHECK(fa.nnz() < fn.nnz());
  CHECK(std::abs(fa.logdet() - fn.logdet()) < 1e-8 * std::abs(fn.logdet()));
}

TEST_CASE("solve") {
  Vec b = Vec::LinSpaced(5, 1, 5);
  CHECK((factorize(SymSparse::identity(5)).solve(b) - b).norm() < 1e-15);
  Vec d(4);
  d << 1, 2, 4, 8;
  auto fd = factorize(SymSparse::from_dense(d.asDiagonal().toDenseMatrix()));
  Vec bd = Vec::Ones(4);
  CHECK((fd.solve(bd) - bd.cwiseQuotient(d)).norm() < 1e-15);

  Eigen::MatrixXd a = random_spd(60, 4, 0.1);
  auto q = SymSparse::from_dense(a);
  auto f = factorize(q);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  Vec rhs(60);
  for (int i = 0; i < 60; ++i) rhs[i] = z(rng);
  Vec x = f.solve(rhs);
  Vec oracle = a.ldlt().solve(rhs);
  CHECK((q.multiply(x) - rhs).norm() / rhs.norm() < 1e-10);
  CHECK((x - oracle).norm() / oracle.norm() < 1e-9);
  CHECK_THROWS_AS(f.solve(Vec::Ones(3)), Error);
}

TEST_CASE("symbolic analysis is reused for an identical pattern") {
  Eigen::MatrixXd a = random_spd(30, 6, 0.2);
  auto q1 = SymSparse::from_dense(a);
  auto q2 = q1.scaled(3.0);
  auto f1 = factorize(q1);
  auto f2 = factorize(q2, f1.symbolic_ptr());
  CHECK(f2.symbolic_ptr() == f1.symbolic_ptr());
  CHECK(f2.logdet() == doctest::Approx(f1.logdet() + 30 * std::log(3.0)).epsilon(1e-12));
  auto q3 = SymSparse::identity(30);
  auto f3 = factorize(q3, f1.symbolic_ptr());
  CHECK(f3.symbolic_ptr() != f1.symbolic_ptr());
  CHECK(f3.logdet() == doctest::Approx(0.0));
}

TEST_CASE("sample_gmrf: moments and determinism") {
  const int draws = 10000;
  {
    auto f = factorize(SymSparse::identity(3));
    Rng rng(17);
    Eigen::Vector3d ss = Eigen::Vector3d::Zero();
    for (int k = 0; k < draws; ++k) ss += sample_gmrf(f, rng).cwiseAbs2();
    for (int i = 0; i < 3; ++i) CHECK(std::abs(ss[i] / draws - 1.0) < 0.05);
  }
  {
    auto f = factorize(SymSparse::identity(3).scaled(4.0));
    Rng rng(18);
    Eigen::Vector3d ss = Eigen::Vector3d::Zero();
    for (int k = 0; k < draws; ++k) ss += sample_gmrf(f, rng).cwiseAbs2();
    for (int i = 0; i < 3; ++i) CHECK(std::abs(ss[i] / draws - 0.25) < 0.02);
  }
  auto f = factorize(SymSparse::from_dense(random_spd(10, 2)));
  CHECK(sample_gmrf(f, 99) == sample_gmrf(f, 99));
  CHECK(sample_gmrf(f, 99) != sample_gmrf(f, 100));
}

TEST_CASE("sample_gmrf: empirical covariance converges to the inverse") {
  const int n = 8, draws = 100000;
  Eigen::MatrixXd a = random_spd(n, 12, 0.4);
  auto f = factorize(SymSparse::from_dense(a));
  Eigen::MatrixXd sigma = a.inverse();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  Rng rng(3);
  for (int k = 0; k < draws; ++k) {
    Vec x = sample_gmrf(f, rng);
    acc.noalias() += x * x.transpose();
  }
  acc /= draws;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      // sd of a Gaussian product moment: sqrt((S_ii S_jj + S_ij^2) / draws)
      double se = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / draws);
      CHECK(std::abs(acc(i, j) - sigma(i, j)) < 3 * se);
    }
}

TEST_CASE("selected inverse") {
  auto fi = factorize(SymSparse::identity(6));
  CHECK((selected_inverse_diag(fi) - Vec::Ones(6)).norm() < 1e-15);
  Vec d(3);
  d << 2, 5, 10;
  auto fd = factorize(SymSparse::from_dense(d.asDiagonal().toDenseMatrix()));
  CHECK((selected_inverse_diag(fd) - d.cwiseInverse()).norm() < 1e-15);

  for (double density : {1.0, 0.05}) {
    Eigen::MatrixXd a = random_spd(100, 21, density);
    auto q = SymSparse::from_dense(a);
    auto f = factorize(q);
    Eigen::MatrixXd inv = a.inverse();
    SelectedInverse si(f);
    CHECK((si.diag() - inv.diagonal()).cwiseAbs().maxCoeff() < 1e-8);
    // entries on the pattern of Q and off it
    const auto& lo = q.lower();
    for (int j = 0; j < lo.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(lo, j); it; ++it)
        CHECK(std::abs(si.at(it.row(), j) - inv(it.row(), j)) < 1e-8);
    CHECK(std::abs(si.at(0, 99) - inv(0, 99)) < 1e-8);
    std::vector<std::pair<int, double>> comb{{3, 0.5}, {40, -1.0}, {77, 2.0}};
    Vec dense = Vec::Zero(100);
    for (auto [i, v] : comb) dense[i] = v;
    CHECK(std::abs(si.quad_form(comb) - dense.dot(inv * dense)) < 1e-8);
  }
}

TEST_CASE("selected inverse on a mesh Laplacian against column solves") {
  auto mesh = build_mesh(make_rectangle(0, 0, 1, 1), MeshOptions{.inner_res = 0.08});
  auto q = mesh_laplacian(mesh);
  auto f = factorize(q);
  Vec diag = selected_inverse_diag(f);
  for (int i = 0; i < q.n(); i += 7) {
    Vec e = Vec::Zero(q.n());
    e[i] = 1.0;
    CHECK(std::abs(diag[i] - f.solve(e)[i]) < 1e-10);
  }
}

TEST_CASE("logdet scales additively") {
  Eigen::MatrixXd a = random_spd(25, 8, 0.2);
  auto q = SymSparse::from_dense(a);
  double l1 = factorize(q).logdet();
  double l2 = factorize(q.scaled(2.5)).logdet();
  CHECK(l2 == doctest::Approx(l1 + 25 * std::log(2.5)).epsilon(1e-12));
  CHECK(factorize(q).logdet() == l1);
}
