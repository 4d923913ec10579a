#pragma once

// Dense symmetric linear algebra: containers, norms, orthonormalization and
// truncated eigendecompositions.

#include "romrec/common.hpp"
#include "romrec/random.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace romrec {

/// Below this dimension spectral_norm uses a full eigendecomposition.
inline constexpr Index kDenseNormMaxDim = 64;

/// Dense p x p matrix whose entries satisfy a(i,j) == a(j,i) bit for bit.
///
/// The only ways in are symmetrize(), the named constructors, and arithmetic
/// on other SymMatrix values (entrywise +, - and scaling keep exact symmetry).
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(Index dim) : entries_(Matrix::Zero(checked(dim), dim)) {}

  static SymMatrix zero(Index dim) { return SymMatrix(dim); }

  static SymMatrix identity(Index dim) {
    SymMatrix out(dim);
    out.entries_.setIdentity();
    return out;
  }

  static SymMatrix diagonal(const Vector& values) {
    SymMatrix out(values.size());
    out.entries_.diagonal() = values;
    return out;
  }

  static SymMatrix outer(const Vector& u) {
    SymMatrix out(u.size());
    out.entries_.noalias() = u * u.transpose();
    // u_i*u_j and u_j*u_i are the same product; nothing to fix up.
    return out;
  }

  /// Adopts a matrix that is already exactly symmetric.
  static SymMatrix from_exact(Matrix a) {
    detail::require_dims(a.rows() == a.cols(), "SymMatrix: matrix is not square");
    checked(a.rows());
    for (Index j = 0; j < a.cols(); ++j)
      for (Index i = j + 1; i < a.rows(); ++i)
        if (a(i, j) != a(j, i)) throw DimensionError("SymMatrix: matrix is not exactly symmetric");
    SymMatrix out;
    out.entries_ = std::move(a);
    return out;
  }

  Index dim() const { return entries_.rows(); }
  const Matrix& dense() const { return entries_; }
  double operator()(Index i, Index j) const { return entries_(i, j); }

  SymMatrix& operator+=(const SymMatrix& o) {
    same_dim(o);
    entries_ += o.entries_;
    return *this;
  }
  SymMatrix& operator-=(const SymMatrix& o) {
    same_dim(o);
    entries_ -= o.entries_;
    return *this;
  }
  SymMatrix& operator*=(double s) {
    entries_ *= s;
    return *this;
  }

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
  friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.dim() == b.dim() && a.entries_ == b.entries_;
  }

 private:
  friend SymMatrix symmetrize(const Eigen::Ref<const Matrix>& a);

  static Index checked(Index dim) {
    if (dim < 1) throw DimensionError("SymMatrix: dimension must be at least 1");
    return dim;
  }
  void same_dim(const SymMatrix& o) const {
    detail::require_dims(o.dim() == dim(), "SymMatrix: dimension mismatch");
  }

  Matrix entries_;
};

/// (A + A^T) / 2.
inline SymMatrix symmetrize(const Eigen::Ref<const Matrix>& a) {
  detail::require_dims(a.rows() == a.cols(), "symmetrize: matrix is not square");
  SymMatrix out(a.rows());
  Matrix& e = out.entries_;
  const Index n = a.rows();
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      e(i, j) = v;
      e(j, i) = v;
    }
  return out;
}

/// Frobenius inner product <A, B> = Tr(A^T B).
inline double inner(const SymMatrix& a, const SymMatrix& b) {
  detail::require_dims(a.dim() == b.dim(), "inner: dimension mismatch");
  return a.dense().cwiseProduct(b.dense()).sum();
}

/// Orthonormal p x k basis. k may be zero only for the rank-zero subspace
/// produced internally; the public constructors keep k >= 1.
struct Subspace {
  Matrix basis;

  Index dim() const { return basis.rows(); }
  Index k() const { return basis.cols(); }
  SymMatrix projector() const {
    return symmetrize(basis * basis.transpose());
  }
};

/// L = basis * diag(spectrum) * basis^T with orthonormal basis columns.
/// Spectrum is sorted by descending magnitude.
struct LowRankFactors {
  Matrix basis;
  Vector spectrum;

  static LowRankFactors zero(Index dim) { return {Matrix(dim, 0), Vector(0)}; }

  Index dim() const { return basis.rows(); }
  Index rank() const { return spectrum.size(); }
  double trace() const { return spectrum.sum(); }

  SymMatrix reconstruct() const {
    if (rank() == 0) return SymMatrix(dim());
    return symmetrize(basis * spectrum.asDiagonal() * basis.transpose());
  }
};

inline double fro_norm(const SymMatrix& a) { return a.dense().norm(); }

inline double trace(const SymMatrix& a) { return a.dense().trace(); }

inline Vector eigenvalues(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Largest |eigenvalue|. Dense eigenvalues up to kDenseNormMaxDim, power
/// iteration above it.
inline double spectral_norm(const SymMatrix& a) {
  const Index p = a.dim();
  if (p <= kDenseNormMaxDim) return eigenvalues(a).cwiseAbs().maxCoeff();

  const Matrix& m = a.dense();
  Vector x = gaussian_vector(p, derive_seed(0, Stream::power));
  x.normalize();
  Vector ax = m * x;
  double est = ax.norm();
  if (est == 0.0) return 0.0;
  // est_k = ||A x_k|| = sqrt(x_k^T A^2 x_k): the Rayleigh quotient of A^2, so
  // a pair of eigenvalues +-lambda does not stall the iteration.
  for (Index it = 0; it < 10 * p; ++it) {
    x = ax / est;
    ax.noalias() = m * x;
    const double next = ax.norm();
    const double change = std::abs(next - est);
    est = next;
    if (change <= 1e-15 * est) break;
  }
  return est;
}

namespace detail {

/// Orthonormal basis of the column space of b (any shape), dropping columns
/// whose pivoted-QR diagonal falls below `drop_tol`.
inline Matrix orthonormal_columns(const Eigen::Ref<const Matrix>& b, double drop_tol) {
  if (b.cols() == 0) return Matrix(b.rows(), 0);
  Eigen::ColPivHouseholderQR<Matrix> qr(b);
  const Index diag = std::min(b.rows(), b.cols());
  const auto& r = qr.matrixQR();
  Index keep = 0;
  while (keep < diag && std::abs(r(keep, keep)) > drop_tol) ++keep;
  Matrix q = Matrix::Identity(b.rows(), keep);
  q.applyOnTheLeft(qr.householderQ().setLength(keep));
  return q;
}

inline double default_drop_tol(const Eigen::Ref<const Matrix>& b) { return 1e-12 * b.norm(); }

/// Extends the orthonormal columns of q to `target` columns with
/// deterministic random directions.
inline Matrix complete_basis(const Matrix& q, Index target, std::uint64_t seed) {
  if (q.cols() >= target) return q;
  Matrix stacked(q.rows(), target);
  stacked.leftCols(q.cols()) = q;
  stacked.rightCols(target - q.cols()) = gaussian_matrix(q.rows(), target - q.cols(), seed);
  Eigen::HouseholderQR<Matrix> qr(stacked);
  Matrix out = Matrix::Identity(q.rows(), target);
  out.applyOnTheLeft(qr.householderQ());
  // Householder QR keeps the span of the leading columns; restore q exactly.
  out.leftCols(q.cols()) = q;
  return out;
}

/// Indices of `values` ordered by descending magnitude; ties keep input order.
inline std::vector<Index> by_magnitude(const Vector& values) {
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(values(a)) > std::abs(values(b)); });
  return order;
}

/// Top-r eigenpairs (by |lambda|) of a small dense symmetric matrix.
inline LowRankFactors top_eigenpairs(const Eigen::Ref<const Matrix>& sym, Index r) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const auto order = by_magnitude(es.eigenvalues());
  LowRankFactors out{Matrix(sym.rows(), r), Vector(r)};
  for (Index j = 0; j < r; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    out.basis.col(j) = es.eigenvectors().col(src);
    out.spectrum(j) = es.eigenvalues()(src);
  }
  return out;
}

}  // namespace detail

/// Orthonormal basis for the column space of b. Numerically dependent
/// columns are dropped, so the result may have fewer columns than b.
inline Subspace orthonormalize(const Eigen::Ref<const Matrix>& b) {
  detail::require_dims(b.cols() <= b.rows(), "orthonormalize: more columns than rows");
  Subspace out{detail::orthonormal_columns(b, detail::default_drop_tol(b))};
  if (out.k() == 0) throw DimensionError("orthonormalize: input has numerical rank zero");
  return out;
}

/// The r eigenpairs of largest |eigenvalue|, from a full eigendecomposition.
inline LowRankFactors truncated_eig(const SymMatrix& a, Index r) {
  detail::require_dims(r >= 1 && r <= a.dim(), "truncated_eig: rank must be in [1, p]");
  return detail::top_eigenpairs(a.dense(), r);
}

/// Frobenius-optimal rank-r approximation (keeps eigenvalues by magnitude).
inline SymMatrix exact_rank_projection(const SymMatrix& a, Index r) {
  return truncated_eig(a, r).reconstruct();
}

/// Number of eigenvalues with |lambda| > rel_tol * ||A||_2.
inline Index numerical_rank(const SymMatrix& a, double rel_tol = 1e-8) {
  const Vector ev = eigenvalues(a).cwiseAbs();
  const double top = ev.maxCoeff();
  if (top == 0.0) return 0;
  return (ev.array() > rel_tol * top).count();
}

/// Spectral and Frobenius norms of a - b for factored operands, computed on
/// the joint column space without forming p x p matrices.
struct DifferenceNorms {
  double spectral;
  double frobenius;
};

inline DifferenceNorms difference_norms(const LowRankFactors& a, const LowRankFactors& b) {
  detail::require_dims(a.dim() == b.dim(), "difference_norms: dimension mismatch");
  const Index p = a.dim();
  const Index k = a.rank() + b.rank();
  if (k == 0) return {0.0, 0.0};
  Vector core_diag(k);
  core_diag << a.spectrum, -b.spectrum;
  Vector ev;
  if (k >= p) {
    ev = eigenvalues(a.reconstruct() - b.reconstruct());
  } else {
    Matrix stacked(p, k);
    stacked << a.basis, b.basis;
    Eigen::HouseholderQR<Matrix> qr(stacked);
    const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const Matrix core = r * core_diag.asDiagonal() * r.transpose();
    ev = eigenvalues(symmetrize(core));
  }
  return {ev.cwiseAbs().maxCoeff(), ev.norm()};
}

}  // namespace romrec
