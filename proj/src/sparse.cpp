#include "coxmesh/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/OrderingMethods>

#include "coxmesh/error.hpp"

namespace coxmesh {

SymSparse::SymSparse(Eigen::SparseMatrix<double> lower) : lower_(std::move(lower)) {
  lower_.makeCompressed();
}

SymSparse SymSparse::from_triplets(int n, std::span<const Triplet> triplets) {
  std::vector<Triplet> lo;
  lo.reserve(triplets.size());
  for (const auto& t : triplets) {
    if (t.row() < 0 || t.col() < 0 || t.row() >= n || t.col() >= n)
      throw numerical_error("sparse", "triplet index out of range");
    if (!std::isfinite(t.value())) throw numerical_error("sparse", "non-finite matrix entry");
    if (t.row() >= t.col())
      lo.push_back(t);
    else
      lo.emplace_back(t.col(), t.row(), t.value());
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(lo.begin(), lo.end());
  return SymSparse(std::move(m));
}

SymSparse SymSparse::from_full(const Eigen::SparseMatrix<double>& full) {
  Eigen::SparseMatrix<double> lo = full.triangularView<Eigen::Lower>();
  return SymSparse(std::move(lo));
}

SymSparse SymSparse::from_dense(const Eigen::MatrixXd& dense) {
  return from_full(dense.sparseView());
}

SymSparse SymSparse::identity(int n) {
  Eigen::SparseMatrix<double> m(n, n);
  m.setIdentity();
  return SymSparse(std::move(m));
}

Eigen::SparseMatrix<double> SymSparse::full() const {
  Eigen::SparseMatrix<double> f = lower_.selfadjointView<Eigen::Lower>();
  return f;
}

Eigen::MatrixXd SymSparse::dense() const { return Eigen::MatrixXd(full()); }

Vec SymSparse::multiply(const Vec& x) const { return lower_.selfadjointView<Eigen::Lower>() * x; }

double SymSparse::quad_form(const Vec& x) const { return x.dot(multiply(x)); }

SymSparse SymSparse::scaled(double c) const { return SymSparse(lower_ * c); }

bool SymbolicCholesky::matches(const SymSparse& q) const {
  const auto& m = q.lower();
  if (m.rows() != n || static_cast<std::size_t>(m.nonZeros()) != in_inner.size()) return false;
  return std::equal(in_outer.begin(), in_outer.end(), m.outerIndexPtr()) &&
         std::equal(in_inner.begin(), in_inner.end(), m.innerIndexPtr());
}

namespace {

// Nonzero pattern of row k of L, written to s[top..n) in topological order.
int ereach(const SymbolicCholesky& S, int k, std::vector<int>& s, std::vector<int>& stamp, int tag) {
  const int n = S.n;
  int top = n;
  stamp[k] = tag;
  for (long p = S.Cp[k]; p < S.Cp[k + 1]; ++p) {
    int i = S.Ci[p];
    if (i > k) continue;
    int len = 0;
    for (; stamp[i] != tag; i = S.parent[i]) {
      s[len++] = i;
      stamp[i] = tag;
    }
    while (len > 0) s[--top] = s[--len];
  }
  return top;
}

std::vector<int> amd_order(const SymSparse& q) {
  Eigen::SparseMatrix<double, Eigen::ColMajor, int> full = q.full();
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
  Eigen::AMDOrdering<int> amd;
  amd(full, perm);
  // Eigen returns the inverse permutation: indices[new] = old.
  return {perm.indices().data(), perm.indices().data() + perm.indices().size()};
}

}  // namespace

std::shared_ptr<const SymbolicCholesky> analyze(const SymSparse& q, Ordering ordering) {
  auto S = std::make_shared<SymbolicCholesky>();
  const int n = q.n();
  const auto& m = q.lower();
  S->n = n;
  S->in_outer.assign(m.outerIndexPtr(), m.outerIndexPtr() + n + 1);
  S->in_inner.assign(m.innerIndexPtr(), m.innerIndexPtr() + m.nonZeros());

  if (ordering == Ordering::Amd && n > 0) {
    S->perm = amd_order(q);
  } else {
    S->perm.resize(n);
    std::iota(S->perm.begin(), S->perm.end(), 0);
  }
  S->inv_perm.assign(n, 0);
  for (int k = 0; k < n; ++k) S->inv_perm[S->perm[k]] = k;

  // Permuted upper triangle, column-compressed.
  const long nz = m.nonZeros();
  std::vector<long> count(n + 1, 0);
  for (int j = 0; j < n; ++j)
    for (long p = S->in_outer[j]; p < S->in_outer[j + 1]; ++p) {
      int a = S->inv_perm[S->in_inner[p]], b = S->inv_perm[j];
      ++count[std::max(a, b)];
    }
  S->Cp.assign(n + 1, 0);
  for (int j = 0; j < n; ++j) S->Cp[j + 1] = S->Cp[j] + count[j];
  std::vector<long> next(S->Cp.begin(), S->Cp.end() - 1);
  S->Ci.assign(nz, 0);
  S->value_map.assign(nz, 0);
  for (int j = 0; j < n; ++j)
    for (long p = S->in_outer[j]; p < S->in_outer[j + 1]; ++p) {
      int a = S->inv_perm[S->in_inner[p]], b = S->inv_perm[j];
      long pos = next[std::max(a, b)]++;
      S->Ci[pos] = std::min(a, b);
      S->value_map[p] = pos;
    }

  // Elimination tree.
  S->parent.assign(n, -1);
  std::vector<int> ancestor(n, -1);
  for (int k = 0; k < n; ++k)
    for (long p = S->Cp[k]; p < S->Cp[k + 1]; ++p) {
      int i = S->Ci[p];
      while (i != -1 && i < k) {
        int inext = ancestor[i];
        ancestor[i] = k;
        if (inext == -1) S->parent[i] = k;
        i = inext;
      }
    }

  // Column counts, then row indices (diagonal first, rows ascending).
  std::vector<int> s(n), stamp(n, -1);
  std::vector<long> cc(n, 1);
  for (int k = 0; k < n; ++k) {
    int top = ereach(*S, k, s, stamp, k);
    for (int t = top; t < n; ++t) ++cc[s[t]];
  }
  S->Lp.assign(n + 1, 0);
  for (int j = 0; j < n; ++j) S->Lp[j + 1] = S->Lp[j] + cc[j];
  S->Li.assign(S->Lp[n], 0);
  std::vector<long> c(S->Lp.begin(), S->Lp.end() - 1);
  std::fill(stamp.begin(), stamp.end(), -1);
  for (int k = 0; k < n; ++k) {
    int top = ereach(*S, k, s, stamp, k);
    for (int t = top; t < n; ++t) S->Li[c[s[t]]++] = k;
    S->Li[c[k]++] = k;
  }
  return S;
}

CholFactor factorize(const SymSparse& q, std::shared_ptr<const SymbolicCholesky> symbolic) {
  if (!symbolic || !symbolic->matches(q)) symbolic = analyze(q);
  const SymbolicCholesky& S = *symbolic;
  const int n = S.n;
  const double* qv = q.lower().valuePtr();

  std::vector<double> Cx(S.Ci.size());
  for (std::size_t p = 0; p < S.value_map.size(); ++p) Cx[S.value_map[p]] = qv[p];

  CholFactor f;
  f.symbolic_ = symbolic;
  f.Lx_.assign(S.Li.size(), 0.0);
  auto& Lx = f.Lx_;
  std::vector<double> x(n, 0.0);
  std::vector<long> c(S.Lp.begin(), S.Lp.end() - 1);
  std::vector<int> s(n), stamp(n, -1);
  double logdet = 0.0;
  for (int k = 0; k < n; ++k) {
    int top = ereach(S, k, s, stamp, k);
    x[k] = 0.0;
    for (long p = S.Cp[k]; p < S.Cp[k + 1]; ++p) x[S.Ci[p]] = Cx[p];
    double d = x[k];
    x[k] = 0.0;
    for (; top < n; ++top) {
      int i = s[top];
      double lki = x[i] / Lx[S.Lp[i]];
      x[i] = 0.0;
      for (long p = S.Lp[i] + 1; p < c[i]; ++p) x[S.Li[p]] -= Lx[p] * lki;
      d -= lki * lki;
      Lx[c[i]++] = lki;
    }
    if (!(d > 0.0) || !std::isfinite(d))
      throw numerical_error("sparse", "not positive definite (pivot " + std::to_string(k) +
                                          ", row " + std::to_string(S.perm[k]) + ")");
    double lkk = std::sqrt(d);
    Lx[c[k]++] = lkk;
    logdet += 2.0 * std::log(lkk);
  }
  f.logdet_ = logdet;
  return f;
}

Vec CholFactor::solve(const Vec& b) const {
  const auto& S = *symbolic_;
  const int n = S.n;
  if (b.size() != n)
    throw numerical_error("sparse", "dimension mismatch: factor " + std::to_string(n) + ", rhs " +
                                        std::to_string(b.size()));
  Vec y(n);
  for (int k = 0; k < n; ++k) y[k] = b[S.perm[k]];
  for (int j = 0; j < n; ++j) {
    y[j] /= Lx_[S.Lp[j]];
    for (long p = S.Lp[j] + 1; p < S.Lp[j + 1]; ++p) y[S.Li[p]] -= Lx_[p] * y[j];
  }
  for (int j = n - 1; j >= 0; --j) {
    for (long p = S.Lp[j] + 1; p < S.Lp[j + 1]; ++p) y[j] -= Lx_[p] * y[S.Li[p]];
    y[j] /= Lx_[S.Lp[j]];
  }
  Vec x(n);
  for (int k = 0; k < n; ++k) x[S.perm[k]] = y[k];
  return x;
}

Vec CholFactor::back_substitute(const Vec& z) const {
  const auto& S = *symbolic_;
  const int n = S.n;
  if (z.size() != n) throw numerical_error("sparse", "dimension mismatch");
  Vec y = z;
  for (int j = n - 1; j >= 0; --j) {
    for (long p = S.Lp[j] + 1; p < S.Lp[j + 1]; ++p) y[j] -= Lx_[p] * y[S.Li[p]];
    y[j] /= Lx_[S.Lp[j]];
  }
  Vec x(n);
  for (int k = 0; k < n; ++k) x[S.perm[k]] = y[k];
  return x;
}

Eigen::MatrixXd CholFactor::dense_L() const {
  const auto& S = *symbolic_;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(S.n, S.n);
  for (int j = 0; j < S.n; ++j)
    for (long p = S.Lp[j]; p < S.Lp[j + 1]; ++p) L(S.Li[p], j) = Lx_[p];
  return L;
}

Vec sample_gmrf(const CholFactor& f, Rng& rng) {
  std::normal_distribution<double> z01;
  Vec z(f.n());
  for (int i = 0; i < f.n(); ++i) z[i] = z01(rng);
  return f.back_substitute(z);
}

Vec sample_gmrf(const CholFactor& f, std::uint64_t seed) {
  Rng rng(seed);
  return sample_gmrf(f, rng);
}

SelectedInverse::SelectedInverse(const CholFactor& f) : f_(f) {
  const auto& S = f_.symbolic();
  const auto Lx = f_.values();
  const int n = S.n;
  S_.assign(Lx.size(), 0.0);
  std::vector<double> col;
  for (int j = n - 1; j >= 0; --j) {
    const long b = S.Lp[j], e = S.Lp[j + 1];
    const double ljj = Lx[b];
    col.assign(e - b - 1, 0.0);
    for (long p = b + 1; p < e; ++p) {
      const int i = S.Li[p];
      double acc = 0.0;
      for (long r = b + 1; r < e; ++r) {
        const int k = S.Li[r];
        double sik;
        if (k == i) {
          sik = S_[S.Lp[i]];
        } else if (!lookup(std::max(i, k), std::min(i, k), &sik)) {
          throw numerical_error("sparse", "factor pattern is not closed");
        }
        acc += Lx[r] * sik;
      }
      col[p - b - 1] = -acc / ljj;
    }
    double acc = 0.0;
    for (long p = b + 1; p < e; ++p) {
      S_[p] = col[p - b - 1];
      acc += Lx[p] * S_[p];
    }
    S_[b] = 1.0 / (ljj * ljj) - acc / ljj;
  }
}

bool SelectedInverse::lookup(int pi, int pj, double* out) const {
  const auto& S = f_.symbolic();
  if (pi == pj) {
    *out = S_[S.Lp[pj]];
    return true;
  }
  auto first = S.Li.begin() + S.Lp[pj] + 1, last = S.Li.begin() + S.Lp[pj + 1];
  auto it = std::lower_bound(first, last, pi);
  if (it == last || *it != pi) return false;
  *out = S_[it - S.Li.begin()];
  return true;
}

Vec SelectedInverse::diag() const {
  const auto& S = f_.symbolic();
  Vec d(S.n);
  for (int k = 0; k < S.n; ++k) d[S.perm[k]] = S_[S.Lp[k]];
  return d;
}

double SelectedInverse::at(int i, int j) const {
  const auto& S = f_.symbolic();
  int a = S.inv_perm[i], b = S.inv_perm[j];
  double v;
  if (lookup(std::max(a, b), std::min(a, b), &v)) return v;
  Vec e = Vec::Zero(S.n);
  e[j] = 1.0;
  return f_.solve(e)[i];
}

double SelectedInverse::quad_form(std::span<const std::pair<int, double>> a) const {
  const auto& S = f_.symbolic();
  double acc = 0.0;
  for (std::size_t u = 0; u < a.size(); ++u)
    for (std::size_t v = 0; v <= u; ++v) {
      int pi = S.inv_perm[a[u].first], pj = S.inv_perm[a[v].first];
      double s;
      if (!lookup(std::max(pi, pj), std::min(pi, pj), &s)) {
        Vec dense = Vec::Zero(S.n);
        for (const auto& [idx, val] : a) dense[idx] += val;
        return dense.dot(f_.solve(dense));
      }
      acc += (u == v ? 1.0 : 2.0) * a[u].second * a[v].second * s;
    }
  return acc;
}

Vec selected_inverse_diag(const CholFactor& f) { return SelectedInverse(f).diag(); }

}  // namespace coxmesh
