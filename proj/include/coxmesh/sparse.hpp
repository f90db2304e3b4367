#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "coxmesh/rng.hpp"

namespace coxmesh {

using Vec = Eigen::VectorXd;

/// Symmetric sparse matrix held as its lower triangle in compressed columns.
class SymSparse {
 public:
  using Triplet = Eigen::Triplet<double>;

  SymSparse() = default;
  explicit SymSparse(Eigen::SparseMatrix<double> lower);

  /// Duplicates are summed; entries above the diagonal are mirrored below.
  static SymSparse from_triplets(int n, std::span<const Triplet> triplets);
  /// Takes the lower triangle of a symmetric matrix.
  static SymSparse from_full(const Eigen::SparseMatrix<double>& full);
  static SymSparse from_dense(const Eigen::MatrixXd& dense);
  static SymSparse identity(int n);

  int n() const { return static_cast<int>(lower_.rows()); }
  long nnz() const { return lower_.nonZeros(); }
  const Eigen::SparseMatrix<double>& lower() const { return lower_; }
  Eigen::SparseMatrix<double> full() const;
  Eigen::MatrixXd dense() const;

  Vec multiply(const Vec& x) const;
  double quad_form(const Vec& x) const;
  SymSparse scaled(double c) const;

 private:
  Eigen::SparseMatrix<double> lower_;
};

/// Ordering and nonzero structure of the Cholesky factor. Reusable across
/// matrices with an identical lower-triangle pattern.
struct SymbolicCholesky {
  int n = 0;
  std::vector<int> perm;      // perm[new] = old
  std::vector<int> inv_perm;  // inv_perm[old] = new
  std::vector<int> parent;    // elimination tree of the permuted matrix
  std::vector<long> Lp;       // column pointers of L
  std::vector<int> Li;        // row indices of L, diagonal first in each column
  // Pattern of the input and where each of its values lands in the permuted
  // upper triangle used by the up-looking factorization.
  std::vector<int> in_outer, in_inner;
  std::vector<long> Cp;
  std::vector<int> Ci;
  std::vector<long> value_map;

  bool matches(const SymSparse& q) const;
};

enum class Ordering { Amd, Natural };

std::shared_ptr<const SymbolicCholesky> analyze(const SymSparse& q, Ordering ordering = Ordering::Amd);

/// P Q P^T = L L^T with a simplicial up-looking factorization.
class CholFactor {
 public:
  int n() const { return symbolic_->n; }
  long nnz() const { return static_cast<long>(Lx_.size()); }
  double logdet() const { return logdet_; }
  const SymbolicCholesky& symbolic() const { return *symbolic_; }
  std::shared_ptr<const SymbolicCholesky> symbolic_ptr() const { return symbolic_; }
  std::span<const double> values() const { return Lx_; }

  Vec solve(const Vec& b) const;
  /// Solves L^T y = z in the permuted ordering and maps back: x = P^T L^{-T} z.
  Vec back_substitute(const Vec& z) const;
  /// L as a dense matrix (tests only).
  Eigen::MatrixXd dense_L() const;

 private:
  friend CholFactor factorize(const SymSparse&, std::shared_ptr<const SymbolicCholesky>);
  std::shared_ptr<const SymbolicCholesky> symbolic_;
  std::vector<double> Lx_;
  double logdet_ = 0.0;
};

/// Throws a numerical error "not positive definite (pivot k)" on failure.
/// Pass the result of an earlier analyze() to skip the symbolic phase; it is
/// recomputed if the pattern differs.
CholFactor factorize(const SymSparse& q, std::shared_ptr<const SymbolicCholesky> symbolic = nullptr);

/// Draw from N(0, Q^{-1}).
Vec sample_gmrf(const CholFactor& f, Rng& rng);
Vec sample_gmrf(const CholFactor& f, std::uint64_t seed);

/// Entries of Q^{-1} on the nonzero pattern of L (Takahashi recursions).
class SelectedInverse {
 public:
  explicit SelectedInverse(const CholFactor& f);

  /// Diagonal of Q^{-1} in the original ordering.
  Vec diag() const;
  /// (Q^{-1})_{ij} in the original ordering. Entries outside the factor
  /// pattern are obtained by a column solve.
  double at(int i, int j) const;
  /// a^T Q^{-1} a for a sparse vector given as (index, value) pairs.
  double quad_form(std::span<const std::pair<int, double>> a) const;

 private:
  CholFactor f_;
  std::vector<double> S_;
  bool lookup(int pi, int pj, double* out) const;
};

Vec selected_inverse_diag(const CholFactor& f);

}  // namespace coxmesh
