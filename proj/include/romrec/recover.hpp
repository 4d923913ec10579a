#pragma once

// Projected gradient recovery of a rank-r symmetric matrix from rank-one
// measurements, with the trace bias of E[A*A] removed from the gradient:
//
//   Delta_t = (1/m) sum_i (x_i^T L_t x_i - y_i) x_i x_i^T - (Tr(L_t) - ybar) I
//
// eprom_run:  L_{t+1} = P_r(L_t - eta Delta_t)            (exact projection)
// aprom_run:  L_{t+1} = T(L_t - eta H(Delta_t))           (head/tail projections)

#include "romrec/krylov.hpp"
#include "romrec/matcore.hpp"
#include "romrec/random.hpp"
#include "romrec/sensing.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace romrec {

enum class SamplingMode { fresh, reuse };
enum class ProjectionMode { exact, bksvd, mbksvd };

inline std::string_view to_string(SamplingMode m) { return m == SamplingMode::fresh ? "fresh" : "reuse"; }

inline std::string_view to_string(ProjectionMode m) {
  switch (m) {
    case ProjectionMode::exact: return "exact";
    case ProjectionMode::bksvd: return "bksvd";
    case ProjectionMode::mbksvd: return "mbksvd";
  }
  return "?";
}

struct RecoveryConfig {
  Index rank = 1;
  double step_size = 0.5;
  Index max_iters = 200;
  /// Stop once the relative spectral error drops to this (needs ground truth).
  double tolerance = 1e-9;
  /// Stop when the objective changes by less than this, relatively, over
  /// `objective_window` iterations.
  double objective_tolerance = 1e-10;
  Index objective_window = 5;
  SamplingMode sampling = SamplingMode::fresh;
  ProjectionMode projection = ProjectionMode::exact;
  /// Head projection rank; 0 means 2 * rank.
  Index head_rank = 0;
  double accuracy = 0.1;
  /// Krylov depth; 0 means default_depth(p, accuracy).
  Index depth = 0;
  std::uint64_t ensemble_seed = 1;
  std::uint64_t noise_seed = 2;
  std::uint64_t krylov_seed = 3;

  Index effective_head_rank(Index p) const { return std::min(p, head_rank > 0 ? head_rank : 2 * rank); }

  void validate(Index p) const {
    if (rank < 1 || rank > p) throw ConfigError("RecoveryConfig: rank must be in [1, p]");
    if (!(step_size > 0.0)) throw ConfigError("RecoveryConfig: step size must be positive");
    if (max_iters < 1) throw ConfigError("RecoveryConfig: max_iters must be >= 1");
    if (head_rank != 0 && head_rank < rank) throw ConfigError("RecoveryConfig: head_rank must be >= rank");
    if (!(accuracy > 0.0 && accuracy < 1.0)) throw ConfigError("RecoveryConfig: accuracy must lie in (0, 1)");
    if (depth < 0) throw ConfigError("RecoveryConfig: depth must be >= 0");
  }
};

struct IterationRecord {
  Index iter = 0;
  double objective = 0.0;
  double rel_spec_err = std::numeric_limits<double>::quiet_NaN();
  double rel_fro_err = std::numeric_limits<double>::quiet_NaN();
  double trace = 0.0;
  double grad_ms = 0.0;
  double head_ms = 0.0;
  double tail_ms = 0.0;
  Index samples_used = 0;
};

enum class StopReason { max_iters, tolerance, stalled, diverged };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::max_iters: return "max_iters";
    case StopReason::tolerance: return "tolerance";
    case StopReason::stalled: return "stalled";
    case StopReason::diverged: return "diverged";
  }
  return "?";
}

struct RecoveryTrace {
  std::vector<IterationRecord> records;
  StopReason stop = StopReason::max_iters;
  /// Relative spectral error of L_0 (1 unless L_* = 0).
  double initial_rel_spec_err = std::numeric_limits<double>::quiet_NaN();
};

struct RecoveryResult {
  LowRankFactors estimate;
  RecoveryTrace trace;
};

struct Measurements {
  RankOneEnsemble ensemble;
  Observations obs;
};

/// What a solver is given: either one fixed measurement set (reuse), or a
/// ground truth to draw a fresh set from every iteration, or both.
struct RecoveryProblem {
  Index dim = 0;
  Index count = 0;
  double noise_std = 0.0;
  std::optional<GroundTruth> truth;
  std::optional<Measurements> fixed;

  static RecoveryProblem from_truth(GroundTruth truth, Index m, double noise_std) {
    detail::require_dims(m >= 1, "RecoveryProblem: m must be >= 1");
    const Index p = truth.factors.dim();
    return {p, m, noise_std, std::move(truth), std::nullopt};
  }

  static RecoveryProblem from_measurements(RankOneEnsemble e, Observations obs,
                                           std::optional<GroundTruth> truth = std::nullopt) {
    detail::require_dims(obs.y.size() == e.count(), "RecoveryProblem: observation count must equal m");
    const Index p = e.dim();
    const Index m = e.count();
    const double sigma = obs.noise_std;
    return {p, m, sigma, std::move(truth), Measurements{std::move(e), std::move(obs)}};
  }
};

/// Measurement set for iteration t: ensemble and noise seeds are derived from
/// the config seeds and t. Reuse mode uses t = 0 throughout.
inline Measurements draw_measurements(const GroundTruth& truth, Index m, double noise_std, const RecoveryConfig& cfg,
                                      Index t,
                                      RankOneEnsemble::Storage storage = RankOneEnsemble::Storage::stored) {
  const auto index = static_cast<std::uint64_t>(t);
  RankOneEnsemble e(truth.factors.dim(), m, derive_seed(cfg.ensemble_seed, Stream::ensemble, index), storage);
  Observations obs = observe(e, truth, noise_std, derive_seed(cfg.noise_seed, Stream::noise, index));
  return {std::move(e), std::move(obs)};
}

/// F(L) = (1/2m) sum_i (y_i - x_i^T L x_i)^2.
inline double objective(const RankOneEnsemble& e, const Observations& obs, const LowRankFactors& l) {
  const Vector r = apply_operator(e, l) - obs.y;
  return 0.5 * r.squaredNorm() / static_cast<double>(e.count());
}

/// Residuals d_i = x_i^T L_t x_i - y_i (factored path) and shift Tr(L_t) - ybar.
inline ImplicitGradient bias_corrected_gradient(const RankOneEnsemble& e, const Observations& obs, double ybar,
                                                const LowRankFactors& current) {
  detail::require_dims(obs.y.size() == e.count(), "bias_corrected_gradient: observation count must equal m");
  detail::require_dims(current.dim() == e.dim(), "bias_corrected_gradient: dimension mismatch");
  return make_implicit_gradient(e, apply_operator(e, current) - obs.y, current.trace() - ybar);
}

struct ResidualMetrics {
  double rel_spec_err;
  double fro_err;
  double objective;
};

/// ||L^ - L*||_2 / ||L*||_2 (plain ||L^ - L*||_2 when L* = 0), ||L^ - L*||_F
/// and F(L^), computed densely.
inline ResidualMetrics residual_metrics(const LowRankFactors& estimate, const SymMatrix& truth,
                                        const RankOneEnsemble& e, const Observations& obs) {
  const SymMatrix diff = estimate.reconstruct() - truth;
  const double scale = spectral_norm(truth);
  const double spec = spectral_norm(diff);
  return {scale > 0.0 ? spec / scale : spec, fro_norm(diff), objective(e, obs, estimate)};
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct StepTiming {
  double grad_ms = 0.0;
  double head_ms = 0.0;
  double tail_ms = 0.0;
};

/// Eigen-decomposes the r x r core Z^T N Z and returns Z-rotated factors.
inline LowRankFactors rotate_core(const Matrix& z, const Matrix& core, Index rank) {
  LowRankFactors small = top_eigenpairs(symmetrize(core).dense(), rank);
  return {z * small.basis, std::move(small.spectrum)};
}

inline LowRankFactors eprom_step(const LowRankFactors& current, const ImplicitGradient& grad,
                                 const RecoveryConfig& cfg, StepTiming& timing) {
  auto t0 = Clock::now();
  const SymMatrix gradient = materialize_gradient(grad);
  timing.grad_ms += elapsed_ms(t0);

  t0 = Clock::now();
  LowRankFactors next = truncated_eig(current.reconstruct() - cfg.step_size * gradient, cfg.rank);
  timing.tail_ms += elapsed_ms(t0);
  return next;
}

/// One approximate-projection step.
///
/// Head: V (p x h) from the gradient, and DV = Delta V. The update
///   N = L_t - (eta/2) (V DV^T + DV V^T)
/// is the symmetric part of L_t - eta P_V Delta and is only ever applied in
/// factored form. Tail: Z (p x r) from N, then L_{t+1} = Z eig(Z^T N Z) Z^T,
/// which is symmetric with rank <= r.
inline LowRankFactors aprom_step(const LowRankFactors& current, const ImplicitGradient& grad,
                                 const RecoveryConfig& cfg, Index t, StepTiming& timing) {
  const Index p = grad.dim();
  const Index h = cfg.effective_head_rank(p);
  const std::uint64_t head_seed = derive_seed(cfg.krylov_seed, Stream::krylov, 2 * static_cast<std::uint64_t>(t));
  const std::uint64_t tail_seed = derive_seed(cfg.krylov_seed, Stream::krylov, 2 * static_cast<std::uint64_t>(t) + 1);

  Matrix v;
  Matrix dv;
  if (cfg.projection == ProjectionMode::mbksvd) {
    auto t0 = Clock::now();
    v = mbksvd(grad, KrylovParams::for_rank(p, h, cfg.accuracy, head_seed, cfg.depth)).basis;
    dv = implicit_apply(grad, v);
    timing.head_ms += elapsed_ms(t0);
  } else {
    auto t0 = Clock::now();
    const SymMatrix gradient = materialize_gradient(grad);
    timing.grad_ms += elapsed_ms(t0);
    t0 = Clock::now();
    if (cfg.projection == ProjectionMode::bksvd)
      v = bksvd(gradient, KrylovParams::for_rank(p, h, cfg.accuracy, head_seed, cfg.depth)).basis;
    else
      v = truncated_eig(gradient, h).basis;
    dv = gradient.dense() * v;
    timing.head_ms += elapsed_ms(t0);
  }

  const auto t0 = Clock::now();
  const double half_step = 0.5 * cfg.step_size;
  auto apply_update = [&](const Matrix& g) -> Matrix {
    Matrix out = Matrix::Zero(p, g.cols());
    if (current.rank() > 0) out.noalias() += current.basis * (current.spectrum.asDiagonal() * (current.basis.transpose() * g));
    out.noalias() -= half_step * (v * (dv.transpose() * g));
    out.noalias() -= half_step * (dv * (v.transpose() * g));
    return out;
  };

  Matrix z;
  if (cfg.projection == ProjectionMode::exact) {
    Matrix span(p, current.rank() + 2 * h);
    span << current.basis, v, dv;
    z = orthonormal_columns(span, default_drop_tol(span));
    z = complete_basis(z, cfg.rank, tail_seed);
    LowRankFactors restricted = top_eigenpairs(symmetrize(z.transpose() * apply_update(z)).dense(), cfg.rank);
    timing.tail_ms += elapsed_ms(t0);
    return {z * restricted.basis, std::move(restricted.spectrum)};
  }
  z = block_krylov(apply_update, p, KrylovParams::for_rank(p, cfg.rank, cfg.accuracy, tail_seed, cfg.depth)).basis;
  LowRankFactors next = rotate_core(z, z.transpose() * apply_update(z), cfg.rank);
  timing.tail_ms += elapsed_ms(t0);
  return next;
}

template <class Step>
RecoveryResult run_projected_descent(const RecoveryProblem& problem, const RecoveryConfig& cfg, Step&& step) {
  cfg.validate(problem.dim);
  if (cfg.sampling == SamplingMode::fresh && !problem.truth)
    throw ConfigError("fresh sampling needs a ground truth to draw measurements from");
  if (cfg.sampling == SamplingMode::reuse && !problem.fixed && !problem.truth)
    throw ConfigError("reuse sampling needs measurements or a ground truth");

  std::optional<Measurements> reused;
  const Measurements* batch = nullptr;
  if (cfg.sampling == SamplingMode::reuse) {
    if (problem.fixed) {
      batch = &*problem.fixed;
    } else {
      reused = draw_measurements(*problem.truth, problem.count, problem.noise_std, cfg, 0);
      batch = &*reused;
    }
  }

  RecoveryResult result{LowRankFactors::zero(problem.dim), {}};
  RecoveryTrace& trace = result.trace;

  auto errors = [&](const LowRankFactors& l) -> DifferenceNorms {
    if (!problem.truth) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    const LowRankFactors& star = problem.truth->factors;
    const DifferenceNorms diff = difference_norms(l, star);
    const double spec_scale = star.rank() > 0 ? star.spectrum.cwiseAbs().maxCoeff() : 0.0;
    const double fro_scale = star.spectrum.norm();
    return {spec_scale > 0.0 ? diff.spectral / spec_scale : diff.spectral,
            fro_scale > 0.0 ? diff.frobenius / fro_scale : diff.frobenius};
  };

  trace.initial_rel_spec_err = errors(result.estimate).spectral;
  if (problem.truth && trace.initial_rel_spec_err <= cfg.tolerance) {
    trace.stop = StopReason::tolerance;
    return result;
  }

  double pooled_sum = 0.0;
  Index pooled_count = 0;
  Index samples_used = 0;
  for (Index t = 0; t < cfg.max_iters; ++t) {
    std::optional<Measurements> fresh;
    if (cfg.sampling == SamplingMode::fresh) {
      fresh = draw_measurements(*problem.truth, problem.count, problem.noise_std, cfg, t);
      batch = &*fresh;
      pooled_sum += batch->obs.y.sum();
      pooled_count += batch->obs.y.size();
      samples_used += problem.count;
    } else {
      samples_used = problem.count;
    }
    // Fresh batches all estimate the same Tr(L_*), so ybar pools every batch
    // drawn so far; reuse mode has a single batch.
    const double ybar = cfg.sampling == SamplingMode::fresh ? pooled_sum / static_cast<double>(pooled_count)
                                                            : mean_observation(batch->obs);

    StepTiming timing;
    auto t0 = Clock::now();
    const ImplicitGradient grad = bias_corrected_gradient(batch->ensemble, batch->obs, ybar, result.estimate);
    timing.grad_ms += elapsed_ms(t0);

    result.estimate = step(result.estimate, grad, t, timing);

    IterationRecord rec;
    rec.iter = t + 1;
    rec.objective = objective(batch->ensemble, batch->obs, result.estimate);
    const DifferenceNorms err = errors(result.estimate);
    rec.rel_spec_err = err.spectral;
    rec.rel_fro_err = err.frobenius;
    rec.trace = result.estimate.trace();
    rec.grad_ms = timing.grad_ms;
    rec.head_ms = timing.head_ms;
    rec.tail_ms = timing.tail_ms;
    rec.samples_used = samples_used;
    trace.records.push_back(rec);

    if (!std::isfinite(rec.objective) || !result.estimate.spectrum.allFinite()) {
      trace.stop = StopReason::diverged;
      break;
    }
    if (problem.truth && rec.rel_spec_err <= cfg.tolerance) {
      trace.stop = StopReason::tolerance;
      break;
    }
    const auto n = static_cast<Index>(trace.records.size());
    if (n > cfg.objective_window) {
      const double before = trace.records[static_cast<std::size_t>(n - 1 - cfg.objective_window)].objective;
      const double change = std::abs(before - rec.objective);
      if (change <= cfg.objective_tolerance * std::max(std::abs(before), std::numeric_limits<double>::min())) {
        trace.stop = StopReason::stalled;
        break;
      }
    }
  }
  return result;
}

}  // namespace detail

/// Exact-projection solver. Starts from L_0 = 0.
inline RecoveryResult eprom_run(const RecoveryProblem& problem, RecoveryConfig cfg) {
  if (cfg.projection != ProjectionMode::exact) throw ConfigError("eprom_run: projection mode must be exact");
  return detail::run_projected_descent(problem, cfg,
                                       [&](const LowRankFactors& l, const ImplicitGradient& g, Index, detail::StepTiming& tm) {
                                         return detail::eprom_step(l, g, cfg, tm);
                                       });
}

/// Head/tail-projection solver. ProjectionMode::bksvd materializes the
/// gradient for the head step, mbksvd never forms a p x p matrix, and exact
/// replaces both projections by eigendecompositions.
inline RecoveryResult aprom_run(const RecoveryProblem& problem, RecoveryConfig cfg) {
  return detail::run_projected_descent(problem, cfg,
                                       [&](const LowRankFactors& l, const ImplicitGradient& g, Index t, detail::StepTiming& tm) {
                                         return detail::aprom_step(l, g, cfg, t, tm);
                                       });
}

/// Trace CSV body: `iter,objective,rel_spec_err,trace_Lt,grad_ms,head_ms,tail_ms,samples_used`.
inline void write_trace_csv(std::ostream& out, const RecoveryTrace& trace, bool include_timing = true) {
  out << "iter,objective,rel_spec_err,trace_Lt,grad_ms,head_ms,tail_ms,samples_used\n";
  out << std::setprecision(17);
  for (const IterationRecord& r : trace.records) {
    out << r.iter << ',' << r.objective << ',' << r.rel_spec_err << ',' << r.trace << ',';
    if (include_timing)
      out << r.grad_ms << ',' << r.head_ms << ',' << r.tail_ms;
    else
      out << "0,0,0";
    out << ',' << r.samples_used << '\n';
  }
}

}  // namespace romrec
