#pragma once

// Rank-one Gaussian measurements y_i = x_i^T L x_i (+ noise), the operator
// A(L), its adjoint A*(d) = sum_i d_i x_i x_i^T, synthetic ground truth, and
// single-pass covariance sketching.

#include "romrec/matcore.hpp"
#include "romrec/random.hpp"

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>

namespace romrec {

/// The m sensing vectors x_1..x_m in R^p.
///
/// Stored mode keeps the m x p array. Streaming mode keeps only the seed and
/// regenerates rows chunk by chunk; both modes see bit-identical vectors and
/// every kernel below walks them in the same fixed chunks, so results agree
/// exactly between the two.
class RankOneEnsemble {
 public:
  enum class Storage { stored, streaming };

  static constexpr Index kChunkRows = 128;

  RankOneEnsemble(Index dim, Index count, std::uint64_t seed, Storage storage = Storage::stored)
      : dim_(dim), count_(count), seed_(seed), storage_(storage) {
    detail::require_dims(dim >= 1 && count >= 1, "RankOneEnsemble: p and m must be at least 1");
    if (storage_ == Storage::stored) {
      vectors_.resize(count, dim);
      for (Index i = 0; i < count; ++i) fill_row(i, vectors_.row(i).data());
    }
  }

  /// Wraps explicit vectors (row i is x_i^T).
  static RankOneEnsemble from_vectors(RowMatrix vectors, std::uint64_t seed_tag = 0) {
    detail::require_dims(vectors.rows() >= 1 && vectors.cols() >= 1, "RankOneEnsemble: empty vectors");
    RankOneEnsemble out;
    out.dim_ = vectors.cols();
    out.count_ = vectors.rows();
    out.seed_ = seed_tag;
    out.storage_ = Storage::stored;
    out.vectors_ = std::move(vectors);
    return out;
  }

  Index dim() const { return dim_; }
  Index count() const { return count_; }
  std::uint64_t seed() const { return seed_; }
  Storage storage() const { return storage_; }

  /// Calls fn(first_row, rows) for consecutive blocks of at most kChunkRows
  /// rows, in order.
  template <class Fn>
  void for_each_chunk(Fn&& fn) const {
    if (storage_ == Storage::stored) {
      for (Index first = 0; first < count_; first += kChunkRows) {
        const Index n = std::min(kChunkRows, count_ - first);
        fn(first, Eigen::Ref<const RowMatrix>(vectors_.middleRows(first, n)));
      }
      return;
    }
    RowMatrix buffer(std::min(kChunkRows, count_), dim_);
    for (Index first = 0; first < count_; first += kChunkRows) {
      const Index n = std::min(kChunkRows, count_ - first);
      for (Index i = 0; i < n; ++i) fill_row(first + i, buffer.row(i).data());
      fn(first, Eigen::Ref<const RowMatrix>(buffer.topRows(n)));
    }
  }

  Vector vector(Index i) const {
    Vector out(dim_);
    if (storage_ == Storage::stored)
      out = vectors_.row(i).transpose();
    else
      fill_row(i, out.data());
    return out;
  }

  RowMatrix vectors() const {
    if (storage_ == Storage::stored) return vectors_;
    RowMatrix out(count_, dim_);
    for (Index i = 0; i < count_; ++i) fill_row(i, out.row(i).data());
    return out;
  }

 private:
  RankOneEnsemble() = default;

  void fill_row(Index i, double* out) const {
    fill_gaussian_row(seed_, i, std::span<double>(out, static_cast<std::size_t>(dim_)));
  }

  Index dim_ = 0;
  Index count_ = 0;
  std::uint64_t seed_ = 0;
  Storage storage_ = Storage::stored;
  RowMatrix vectors_;
};

struct Observations {
  Vector y;
  double noise_std = 0.0;
  std::uint64_t ensemble_seed = 0;
};

/// L_* = basis * diag(spectrum) * basis^T, PSD with condition number kappa.
struct GroundTruth {
  SymMatrix matrix;
  LowRankFactors factors;
  double condition_number = 1.0;
};

inline RankOneEnsemble sample_ensemble(Index p, Index m, std::uint64_t seed,
                                       RankOneEnsemble::Storage storage = RankOneEnsemble::Storage::stored) {
  return RankOneEnsemble(p, m, seed, storage);
}

/// Random rank-r PSD matrix: Gaussian p x r basis orthonormalized, spectrum
/// geometric from kappa down to 1.
inline GroundTruth generate_instance(Index p, Index r, double kappa, std::uint64_t seed) {
  detail::require_dims(r >= 1 && r <= p, "generate_instance: need 1 <= r <= p");
  if (!(kappa >= 1.0) || !std::isfinite(kappa)) throw ConfigError("generate_instance: condition number must be >= 1");
  if (r == 1 && kappa != 1.0) throw ConfigError("generate_instance: rank one instances have condition number 1");

  Subspace basis = orthonormalize(gaussian_matrix(p, r, seed));
  if (basis.k() != r) throw DimensionError("generate_instance: degenerate Gaussian draw");

  Vector spectrum(r);
  for (Index j = 0; j < r; ++j) {
    const double exponent = r == 1 ? 0.0 : static_cast<double>(r - 1 - j) / static_cast<double>(r - 1);
    spectrum(j) = std::pow(kappa, exponent);
  }
  LowRankFactors factors{std::move(basis.basis), std::move(spectrum)};
  SymMatrix matrix = factors.reconstruct();
  return {std::move(matrix), std::move(factors), kappa};
}

/// y_i = x_i^T L x_i.
inline Vector apply_operator(const RankOneEnsemble& e, const SymMatrix& l) {
  detail::require_dims(l.dim() == e.dim(), "apply_operator: dimension mismatch");
  Vector y(e.count());
  e.for_each_chunk([&](Index first, const Eigen::Ref<const RowMatrix>& xs) {
    const Matrix t = xs * l.dense();
    y.segment(first, xs.rows()) = (t.array() * xs.array()).rowwise().sum();
  });
  return y;
}

/// Factored path: v = basis^T x_i, y_i = sum_j spectrum_j v_j^2, O(pr) per row.
inline Vector apply_operator(const RankOneEnsemble& e, const LowRankFactors& l) {
  detail::require_dims(l.dim() == e.dim(), "apply_operator: dimension mismatch");
  Vector y = Vector::Zero(e.count());
  if (l.rank() == 0) return y;
  e.for_each_chunk([&](Index first, const Eigen::Ref<const RowMatrix>& xs) {
    const Matrix v = xs * l.basis;
    y.segment(first, xs.rows()).noalias() = v.array().square().matrix() * l.spectrum;
  });
  return y;
}

/// sum_i d_i x_i x_i^T (no 1/m).
inline SymMatrix apply_adjoint(const RankOneEnsemble& e, const Vector& d) {
  detail::require_dims(d.size() == e.count(), "apply_adjoint: length of d must equal m");
  Matrix acc = Matrix::Zero(e.dim(), e.dim());
  e.for_each_chunk([&](Index first, const Eigen::Ref<const RowMatrix>& xs) {
    const RowMatrix weighted = d.segment(first, xs.rows()).asDiagonal() * xs;
    acc.noalias() += xs.transpose() * weighted;
  });
  return symmetrize(acc);
}

/// y = A(L_*) + noise_std * g with g drawn from noise_seed.
inline Observations observe(const RankOneEnsemble& e, const GroundTruth& truth, double noise_std,
                            std::uint64_t noise_seed) {
  if (!(noise_std >= 0.0)) throw ConfigError("observe: noise standard deviation must be >= 0");
  Observations obs{apply_operator(e, truth.factors), noise_std, e.seed()};
  if (noise_std > 0.0) obs.y += noise_std * gaussian_vector(e.count(), noise_seed);
  return obs;
}

inline double mean_observation(const Observations& obs) {
  if (obs.y.size() == 0) throw DimensionError("mean_observation: no observations");
  return obs.y.mean();
}

/// Single-pass covariance sketch: y_i = (1/T) sum_t (x_i^T s_t)^2.
/// Holds m running sums; the p x p empirical covariance is never formed.
class CovarianceSketch {
 public:
  explicit CovarianceSketch(const RankOneEnsemble& e) : ensemble_(&e), sums_(Vector::Zero(e.count())) {}

  void add(const Vector& sample) {
    detail::require_dims(sample.size() == ensemble_->dim(), "CovarianceSketch: sample has wrong dimension");
    ensemble_->for_each_chunk([&](Index first, const Eigen::Ref<const RowMatrix>& xs) {
      sums_.segment(first, xs.rows()).array() += (xs * sample).array().square();
    });
    ++samples_;
  }

  Index samples() const { return samples_; }

  Observations observations() const {
    if (samples_ == 0) throw DimensionError("CovarianceSketch: empty stream");
    return {sums_ / static_cast<double>(samples_), 0.0, ensemble_->seed()};
  }

 private:
  const RankOneEnsemble* ensemble_;
  Vector sums_;
  Index samples_ = 0;
};

/// Sketches any range of p-vectors.
template <class Range>
Observations sketch_stream(const Range& samples, const RankOneEnsemble& e) {
  CovarianceSketch sketch(e);
  for (const auto& s : samples) sketch.add(s);
  return sketch.observations();
}

/// CSV with header `index,y`.
inline void write_observations_csv(std::ostream& out, const Observations& obs) {
  out << "index,y\n" << std::setprecision(17);
  for (Index i = 0; i < obs.y.size(); ++i) out << i << ',' << obs.y(i) << '\n';
}

}  // namespace romrec
