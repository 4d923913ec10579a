#pragma once

// Randomized block Krylov SVD for symmetric operators.
//
// bksvd()/block_krylov() work on anything that can multiply a p x b block;
// mbksvd() runs the same iteration on the bias-corrected gradient
//   Delta = (1/m) sum_i d_i x_i x_i^T - c I
// applied sample by sample through implicit_apply(), so no p x p matrix is
// ever allocated.

#include "romrec/matcore.hpp"
#include "romrec/random.hpp"
#include "romrec/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

namespace romrec {

/// q = max(2, ceil(log(p) / sqrt(theta))).
inline Index default_depth(Index p, double accuracy) {
  const double q = std::ceil(std::log(static_cast<double>(p)) / std::sqrt(accuracy));
  return std::max<Index>(2, static_cast<Index>(q));
}

struct KrylovParams {
  Index rank = 1;
  Index block = 6;
  double accuracy = 0.1;
  Index depth = 2;
  std::uint64_t seed = 0;

  /// block = rank + 5 and the default depth for dimension p unless
  /// depth_override > 0.
  static KrylovParams for_rank(Index p, Index rank, double accuracy, std::uint64_t seed, Index depth_override = 0) {
    if (!(accuracy > 0.0 && accuracy < 1.0)) throw ConfigError("KrylovParams: accuracy must lie in (0, 1)");
    return {rank, rank + 5, accuracy, depth_override > 0 ? depth_override : default_depth(p, accuracy), seed};
  }

  void validate(Index p) const {
    detail::require_dims(rank >= 1 && rank <= p, "Krylov: rank must be in [1, p]");
    if (block <= rank) throw ConfigError("KrylovParams: block must exceed rank");
    if (depth < 1) throw ConfigError("KrylovParams: depth must be >= 1");
    if (!(accuracy > 0.0 && accuracy < 1.0)) throw ConfigError("KrylovParams: accuracy must lie in (0, 1)");
  }
};

/// Delta = (1/m) sum_i residuals_i x_i x_i^T - shift * I, kept implicit.
/// Holds a non-owning pointer to the ensemble, which must outlive it.
struct ImplicitGradient {
  const RankOneEnsemble* ensemble = nullptr;
  Vector residuals;
  double shift = 0.0;

  Index dim() const { return ensemble->dim(); }
  Index count() const { return ensemble->count(); }
};

inline ImplicitGradient make_implicit_gradient(const RankOneEnsemble& e, Vector residuals, double shift) {
  detail::require_dims(residuals.size() == e.count(), "ImplicitGradient: residual length must equal m");
  return {&e, std::move(residuals), shift};
}

/// Delta * G, accumulated over all samples and shifted once. O(m p b).
inline Matrix implicit_apply(const ImplicitGradient& grad, const Eigen::Ref<const Matrix>& g) {
  detail::require_dims(g.rows() == grad.dim(), "implicit_apply: block must have p rows");
  const Vector& d = grad.residuals;
  Matrix out = Matrix::Zero(g.rows(), g.cols());
  grad.ensemble->for_each_chunk([&](Index first, const Eigen::Ref<const RowMatrix>& xs) {
    Matrix projected = xs * g;  // rows are x_j^T G
    projected.array().colwise() *= d.segment(first, xs.rows()).array();
    out.noalias() += xs.transpose() * projected;
  });
  out /= static_cast<double>(grad.count());
  out -= grad.shift * g;
  return out;
}

/// Dense Delta. O(m p^2).
inline SymMatrix materialize_gradient(const ImplicitGradient& grad) {
  SymMatrix out = apply_adjoint(*grad.ensemble, grad.residuals);
  out *= 1.0 / static_cast<double>(grad.count());
  out -= grad.shift * SymMatrix::identity(grad.dim());
  return out;
}

namespace detail {

inline void rescale(Matrix& block) {
  const double norm = block.norm();
  if (norm > 0.0 && std::isfinite(norm)) block /= norm;
}

/// Orthonormal basis of the Krylov matrix, padded to at least `rank` columns.
inline Matrix krylov_basis(const Matrix& krylov, Index rank, std::uint64_t seed) {
  Matrix q = orthonormal_columns(krylov, default_drop_tol(krylov));
  return complete_basis(q, rank, derive_seed(seed, Stream::krylov));
}

/// Rayleigh-Ritz on Q^T A^2 Q = (AQ)^T (AQ): the top-rank eigenvectors U of
/// that small matrix give Z = Q U.
inline Matrix ritz_vectors(const Matrix& q, const Matrix& aq, Index rank) {
  const Matrix gram = aq.transpose() * aq;
  const LowRankFactors top = top_eigenpairs(symmetrize(gram).dense(), rank);
  return q * top.basis;
}

}  // namespace detail

/// Block Krylov SVD of a symmetric operator given by `apply` (G -> A G).
/// Krylov blocks A G, A^3 G, ..., A^(2q-1) G; one orthonormalization at the
/// end; Rayleigh-Ritz on Q^T A^2 Q.
template <class Apply>
Subspace block_krylov(Apply&& apply, Index p, const KrylovParams& params) {
  params.validate(p);
  const Index b = params.block;
  Matrix krylov(p, params.depth * b);

  Matrix block = apply(gaussian_matrix(p, b, params.seed));
  detail::rescale(block);
  krylov.leftCols(b) = block;
  for (Index i = 1; i < params.depth; ++i) {
    Matrix half = apply(block);
    detail::rescale(half);
    block = apply(half);
    detail::rescale(block);
    krylov.middleCols(i * b, b) = block;
  }

  const Matrix q = detail::krylov_basis(krylov, params.rank, params.seed);
  const Matrix aq = apply(q);
  return {detail::ritz_vectors(q, aq, params.rank)};
}

inline Subspace bksvd(const SymMatrix& a, const KrylovParams& params) {
  return block_krylov([&](const Matrix& g) -> Matrix { return a.dense() * g; }, a.dim(), params);
}

/// Z Z^T A for the bksvd subspace Z, symmetrized.
inline SymMatrix tail_project(const SymMatrix& a, Index rank, double accuracy, std::uint64_t seed) {
  const Subspace z = bksvd(a, KrylovParams::for_rank(a.dim(), rank, accuracy, seed));
  return symmetrize(z.basis * (z.basis.transpose() * a.dense()));
}

inline Subspace head_project(const SymMatrix& a, Index rank, double accuracy, std::uint64_t seed) {
  return bksvd(a, KrylovParams::for_rank(a.dim(), rank, accuracy, seed));
}

/// Block Krylov SVD of the implicit gradient. Same iteration as bksvd() on
/// materialize_gradient(grad), with every product done by implicit_apply().
inline Subspace mbksvd(const ImplicitGradient& grad, const KrylovParams& params) {
  const Index p = grad.dim();
  params.validate(p);
  const Index b = params.block;

  // Step 1: Gaussian start block.
  Matrix g = gaussian_matrix(p, b, params.seed);
  // Step 3: Krylov storage, q blocks of b columns.
  Matrix krylov(p, params.depth * b);

  // Step 4: Delta G.
  Matrix i_block = implicit_apply(grad, g);
  detail::rescale(i_block);
  krylov.leftCols(b) = i_block;
  g = std::move(i_block);

  for (Index i = 1; i < params.depth; ++i) {
    i_block = implicit_apply(grad, g);
    detail::rescale(i_block);
    Matrix j_block = implicit_apply(grad, i_block);
    detail::rescale(j_block);
    krylov.middleCols(i * b, b) = j_block;
    g = std::move(j_block);
  }

  // Step 5.
  const Matrix q = detail::krylov_basis(krylov, params.rank, params.seed);
  krylov.resize(0, 0);
  // Steps 6-7: left singular vectors of Q^T Delta, via Q^T Delta^2 Q.
  const Matrix dq = implicit_apply(grad, q);
  return {detail::ritz_vectors(q, dq, params.rank)};
}

}  // namespace romrec
