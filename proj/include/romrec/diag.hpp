#pragma once

// Monte-Carlo probes for the statistical identities behind the solvers.
//
// Each probe returns a ProbeReport with one measured statistic, the value or
// bound it is compared against, and a pass flag. Tail-bound constants are
// not known, so absolute checks use exact mean identities and everything
// else is a ratio test across an m (or p) grid.

#include "romrec/krylov.hpp"
#include "romrec/matcore.hpp"
#include "romrec/random.hpp"
#include "romrec/sensing.hpp"

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace romrec {

struct ProbeReport {
  std::string probe;
  /// key=value pairs, written semicolon-separated.
  std::vector<std::pair<std::string, std::string>> params;
  double measured = 0.0;
  double predicted = 0.0;
  bool pass = false;
  std::uint64_t seed = 0;

  template <class T>
  ProbeReport& with(std::string key, const T& value) {
    std::ostringstream s;
    s << std::setprecision(12) << value;
    params.emplace_back(std::move(key), s.str());
    return *this;
  }

  std::string param_string() const {
    std::string out;
    for (const auto& [k, v] : params) {
      if (!out.empty()) out += ';';
      out += k + '=' + v;
    }
    return out;
  }
};

inline void write_probe_header(std::ostream& out) { out << "probe,param_json,measured,predicted,pass,seed\n"; }

inline void write_probe_row(std::ostream& out, const ProbeReport& r) {
  out << r.probe << ',' << r.param_string() << ',' << std::setprecision(17) << r.measured << ',' << r.predicted
      << ',' << (r.pass ? 1 : 0) << ',' << r.seed << '\n';
}

/// Ratio tests: a statistic that should shrink like 1/sqrt(m) drops by about
/// 2 when m is quadrupled.
inline constexpr double kRateLow = 1.5;
inline constexpr double kRateHigh = 2.7;

namespace detail {

inline std::uint64_t trial_seed(std::uint64_t seed, Index trial) {
  return derive_seed(seed, Stream::trial, static_cast<std::uint64_t>(trial));
}

/// (1/m) A*A(M) for one ensemble.
inline SymMatrix normalized_gram_apply(const RankOneEnsemble& e, const SymMatrix& m) {
  SymMatrix s = apply_adjoint(e, apply_operator(e, m));
  s *= 1.0 / static_cast<double>(e.count());
  return s;
}

inline SymMatrix expectation_mean(Index p, Index m, const SymMatrix& mat, Index trials, std::uint64_t seed) {
  SymMatrix avg(p);
  for (Index t = 0; t < trials; ++t) avg += normalized_gram_apply(RankOneEnsemble(p, m, trial_seed(seed, t)), mat);
  avg *= 1.0 / static_cast<double>(trials);
  return avg;
}

inline double expectation_deviation(Index p, Index m, const SymMatrix& mat, Index trials, std::uint64_t seed) {
  const SymMatrix target = 2.0 * mat + trace(mat) * SymMatrix::identity(p);
  return spectral_norm(expectation_mean(p, m, mat, trials, seed) - target);
}

inline double mean_abs_ybar_error(const GroundTruth& truth, Index m, Index trials, std::uint64_t seed) {
  const double tr = truth.factors.trace();
  double sum = 0.0;
  for (Index t = 0; t < trials; ++t) {
    const RankOneEnsemble e(truth.factors.dim(), m, trial_seed(seed, t));
    sum += std::abs(mean_observation(observe(e, truth, 0.0, 0)) - tr);
  }
  return sum / static_cast<double>(trials);
}

/// ||(1/m) A* e||_2 for e ~ sigma N(0, I_m), one value per trial.
inline std::vector<double> noise_adjoint_norms(Index p, Index m, double sigma, Index trials, std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(trials));
  for (Index t = 0; t < trials; ++t) {
    const std::uint64_t s = trial_seed(seed, t);
    const RankOneEnsemble e(p, m, derive_seed(s, Stream::ensemble));
    const Vector noise = sigma * gaussian_vector(m, derive_seed(s, Stream::noise));
    SymMatrix g = apply_adjoint(e, noise);
    g *= 1.0 / static_cast<double>(m);
    out.push_back(spectral_norm(g));
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline void require_trials(Index m, Index trials) {
  detail::require_dims(m >= 1, "probe: m must be >= 1");
  if (trials < 1) throw ConfigError("probe: trials must be >= 1");
}

}  // namespace detail

/// Spectral deviation of the trial-averaged (1/m) A*A(M) from 2M + Tr(M) I.
/// Passes when the deviation is at most `rel_tol` (2||M||_2 + |Tr M|).
inline ProbeReport probe_expectation_identity(Index p, Index m, const SymMatrix& mat, Index trials,
                                              std::uint64_t seed, double rel_tol = 0.05) {
  detail::require_trials(m, trials);
  detail::require_dims(mat.dim() == p, "probe_expectation_identity: dimension mismatch");
  const double deviation = detail::expectation_deviation(p, m, mat, trials, seed);
  const double scale = 2.0 * spectral_norm(mat) + std::abs(trace(mat));
  ProbeReport r{"expectation_identity", {}, deviation, rel_tol * scale, false, seed};
  r.with("p", p).with("m", m).with("trials", trials).with("reference_scale",
                                                           scale / std::sqrt(static_cast<double>(m * trials)));
  r.pass = std::isfinite(deviation) && deviation <= rel_tol * scale;
  return r;
}

/// Deviation at budget m*trials over deviation at 4x the budget (four times
/// the trials), each averaged over `replicates` independent seeds.
inline ProbeReport probe_expectation_rate(Index p, Index m, const SymMatrix& mat, Index trials, Index replicates,
                                          std::uint64_t seed) {
  detail::require_trials(m, trials);
  double small = 0.0;
  double large = 0.0;
  for (Index k = 0; k < replicates; ++k) {
    small += detail::expectation_deviation(p, m, mat, trials, derive_seed(seed, Stream::samples, 2 * k));
    large += detail::expectation_deviation(p, m, mat, 4 * trials, derive_seed(seed, Stream::samples, 2 * k + 1));
  }
  const double ratio = small / large;
  ProbeReport r{"expectation_identity_rate", {}, ratio, 2.0, ratio >= kRateLow && ratio <= kRateHigh, seed};
  r.with("p", p).with("m", m).with("trials", trials).with("replicates", replicates);
  return r;
}

/// Mean |ybar - Tr(L_*)| over noiseless trials against c Tr(L_*) / sqrt(m)
/// with c = sqrt(2): Var(x^T L x) = 2||L||_F^2 <= 2 Tr(L)^2 for PSD L.
inline ProbeReport probe_mean_observation(const GroundTruth& truth, Index m, Index trials, std::uint64_t seed) {
  detail::require_trials(m, trials);
  const double tr = truth.factors.trace();
  double worst = 0.0;
  double sum = 0.0;
  for (Index t = 0; t < trials; ++t) {
    const RankOneEnsemble e(truth.factors.dim(), m, detail::trial_seed(seed, t));
    const double dev = std::abs(mean_observation(observe(e, truth, 0.0, 0)) - tr);
    worst = std::max(worst, dev);
    sum += dev;
  }
  const double mean = sum / static_cast<double>(trials);
  const double bound = std::sqrt(2.0) * std::abs(tr) / std::sqrt(static_cast<double>(m));
  ProbeReport r{"mean_observation", {}, mean, bound, mean <= bound, seed};
  r.with("p", truth.factors.dim()).with("r", truth.factors.rank()).with("m", m).with("trials", trials).with("max", worst);
  return r;
}

inline ProbeReport probe_mean_observation_rate(const GroundTruth& truth, Index m, Index trials, std::uint64_t seed) {
  detail::require_trials(m, trials);
  const double small = detail::mean_abs_ybar_error(truth, m, trials, derive_seed(seed, Stream::samples, 0));
  const double large = detail::mean_abs_ybar_error(truth, 4 * m, trials, derive_seed(seed, Stream::samples, 1));
  const double ratio = small / large;
  ProbeReport r{"mean_observation_rate", {}, ratio, 2.0, ratio >= kRateLow && ratio <= kRateHigh, seed};
  r.with("p", truth.factors.dim()).with("m", m).with("trials", trials);
  return r;
}

/// Mean ||(1/m) A* e||_2. Predicted value sigma sqrt(p log p / m) (constant 1);
/// passes when the statistic is finite, positive (zero for sigma = 0) and its
/// coefficient of variation across trials is below 0.25.
inline ProbeReport probe_statistical_error(Index p, Index m, double sigma, Index trials, std::uint64_t seed) {
  detail::require_trials(m, trials);
  if (!(sigma >= 0.0)) throw ConfigError("probe_statistical_error: sigma must be >= 0");
  const std::vector<double> norms = detail::noise_adjoint_norms(p, m, sigma, trials, seed);
  const double mean = detail::mean_of(norms);
  const double spread = mean > 0.0 ? detail::stddev_of(norms) / mean : 0.0;
  const double predicted =
      sigma * std::sqrt(static_cast<double>(p) * std::log(static_cast<double>(p)) / static_cast<double>(m));
  const bool ok = sigma == 0.0 ? mean == 0.0 : (std::isfinite(mean) && mean > 0.0 && spread < 0.25);
  ProbeReport r{"statistical_error", {}, mean, predicted, ok, seed};
  r.with("p", p).with("m", m).with("sigma", sigma).with("trials", trials).with("cv", spread);
  return r;
}

inline ProbeReport probe_statistical_error_rate(Index p, Index m, double sigma, Index trials, std::uint64_t seed) {
  detail::require_trials(m, trials);
  const double small = detail::mean_of(detail::noise_adjoint_norms(p, m, sigma, trials, derive_seed(seed, Stream::samples, 0)));
  const double large =
      detail::mean_of(detail::noise_adjoint_norms(p, 4 * m, sigma, trials, derive_seed(seed, Stream::samples, 1)));
  const double ratio = small / large;
  ProbeReport r{"statistical_error_rate", {}, ratio, 2.0, ratio >= kRateLow && ratio <= kRateHigh, seed};
  r.with("p", p).with("m", m).with("sigma", sigma).with("trials", trials);
  return r;
}

/// Growth from p to 2p at fixed m, compared with sqrt(p log p): passes when
/// the measured ratio is within a factor 2 of the predicted one.
inline ProbeReport probe_statistical_error_growth(Index p, Index m, double sigma, Index trials, std::uint64_t seed) {
  detail::require_trials(m, trials);
  detail::require_dims(p >= 2, "probe_statistical_error_growth: p must be >= 2");
  const double small = detail::mean_of(detail::noise_adjoint_norms(p, m, sigma, trials, derive_seed(seed, Stream::samples, 0)));
  const double large =
      detail::mean_of(detail::noise_adjoint_norms(2 * p, m, sigma, trials, derive_seed(seed, Stream::samples, 1)));
  const double ratio = large / small;
  const double dp = static_cast<double>(p);
  const double predicted = std::sqrt(2.0 * dp * std::log(2.0 * dp) / (dp * std::log(dp)));
  const bool ok = ratio >= 0.5 * predicted && ratio <= 2.0 * predicted;
  ProbeReport r{"statistical_error_growth", {}, ratio, predicted, ok, seed};
  r.with("p", p).with("m", m).with("sigma", sigma).with("trials", trials);
  return r;
}

/// Left side of the CU-RIP condition for one ensemble, with y = A(L2):
///   || D - rho ((1/m) A*A(D) - (Tr(L1) - ybar) I) ||_2,   D = L1 - L2.
inline double curip_lhs(const SymMatrix& l1, const SymMatrix& l2, const RankOneEnsemble& e, double rho) {
  const SymMatrix d = l1 - l2;
  const double ybar = apply_operator(e, l2).mean();
  SymMatrix inner_term = detail::normalized_gram_apply(e, d);
  inner_term -= (trace(l1) - ybar) * SymMatrix::identity(d.dim());
  return spectral_norm(d - rho * inner_term);
}

/// Mean lhs / ||L1 - L2||_2 over trials (plain lhs when L1 = L2). Passes when
/// finite; the trend in m is checked by probe_curip_trend.
inline ProbeReport probe_curip(const SymMatrix& l1, const SymMatrix& l2, Index p, Index m, double rho, Index trials,
                               std::uint64_t seed) {
  detail::require_trials(m, trials);
  detail::require_dims(l1.dim() == p && l2.dim() == p, "probe_curip: dimension mismatch");
  const double gap = spectral_norm(l1 - l2);
  double sum = 0.0;
  for (Index t = 0; t < trials; ++t)
    sum += curip_lhs(l1, l2, RankOneEnsemble(p, m, detail::trial_seed(seed, t)), rho);
  const double mean = sum / static_cast<double>(trials);
  const double ratio = gap > 0.0 ? mean / gap : mean;
  ProbeReport r{"curip", {}, ratio, std::abs(1.0 - 2.0 * rho), std::isfinite(ratio), seed};
  r.with("p", p).with("m", m).with("rho", rho).with("trials", trials);
  return r;
}

/// CU-RIP ratio at m_small versus m_large; passes when it decreases.
inline ProbeReport probe_curip_trend(const SymMatrix& l1, const SymMatrix& l2, Index p, Index m_small, Index m_large,
                                     double rho, Index trials, std::uint64_t seed) {
  const ProbeReport a = probe_curip(l1, l2, p, m_small, rho, trials, derive_seed(seed, Stream::samples, 0));
  const ProbeReport b = probe_curip(l1, l2, p, m_large, rho, trials, derive_seed(seed, Stream::samples, 1));
  ProbeReport r{"curip_trend", {}, b.measured / a.measured, 1.0, b.measured < a.measured, seed};
  r.with("p", p).with("m_small", m_small).with("m_large", m_large).with("rho", rho).with("trials", trials);
  r.with("ratio_small", a.measured).with("ratio_large", b.measured);
  return r;
}

/// Symmetric p x p matrix with the given eigenvalues and a random eigenbasis.
inline SymMatrix planted_symmetric(const Vector& spectrum, std::uint64_t seed) {
  const Index p = spectrum.size();
  const Matrix q = orthonormalize(gaussian_matrix(p, p, seed)).basis;
  return symmetrize(q * spectrum.asDiagonal() * q.transpose());
}

/// Test corpus for the projection guarantees: even indices have a clear gap
/// after `rank`, odd ones have sigma_r / sigma_{r+1} - 1 = 5e-4. Signs are
/// mixed in both.
inline std::vector<SymMatrix> projection_corpus(Index p, Index rank, Index count, std::uint64_t seed) {
  detail::require_dims(rank >= 1 && rank < p, "projection_corpus: need 1 <= rank < p");
  std::vector<SymMatrix> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index k = 0; k < count; ++k) {
    const std::uint64_t s = detail::trial_seed(seed, k);
    Vector mags(p);
    if (k % 2 == 0) {
      for (Index j = 0; j < p; ++j) mags(j) = j < rank ? 10.0 - j : std::pow(0.8, static_cast<double>(j - rank));
    } else {
      // Slow decay; the r-th and (r+1)-th magnitudes nearly coincide.
      for (Index j = 0; j < p; ++j) mags(j) = 1.0 / (1.0 + 0.1 * static_cast<double>(j));
      mags(rank) = mags(rank - 1) / (1.0 + 5e-4);
    }
    const Vector signs = gaussian_vector(p, derive_seed(s, Stream::samples));
    Vector spectrum(p);
    for (Index j = 0; j < p; ++j) spectrum(j) = signs(j) < 0.0 ? -mags(j) : mags(j);
    out.push_back(planted_symmetric(spectrum, s));
  }
  return out;
}

struct ProjectionConstants {
  /// max over the corpus of ||A - T(A)||_F / ||A - A_r||_F
  double tail;
  /// min over the corpus of ||P_V A||_F / ||A_r||_F
  double head;
  Index tail_violations;
  Index head_violations;
};

/// Measures the tail and head constants of the Krylov projections on `corpus`
/// against a full eigendecomposition, counting violations of c_T = 1 + theta
/// and c_H = 1 - theta.
inline ProjectionConstants measure_projection_constants(const std::vector<SymMatrix>& corpus, Index rank,
                                                        double accuracy, std::uint64_t seed) {
  ProjectionConstants out{0.0, std::numeric_limits<double>::infinity(), 0, 0};
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const SymMatrix& a = corpus[k];
    const std::uint64_t s = derive_seed(seed, Stream::krylov, k);
    const SymMatrix best = exact_rank_projection(a, rank);
    const double best_tail = fro_norm(a - best);
    const double best_head = fro_norm(best);

    const double tail_err = fro_norm(a - tail_project(a, rank, accuracy, s));
    const Matrix v = head_project(a, rank, accuracy, s).basis;
    const double head_energy = (v.transpose() * a.dense()).norm();

    const double ct = best_tail > 0.0 ? tail_err / best_tail : (tail_err > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
    const double ch = best_head > 0.0 ? head_energy / best_head : 1.0;
    out.tail = std::max(out.tail, ct);
    out.head = std::min(out.head, ch);
    if (tail_err > (1.0 + accuracy) * best_tail) ++out.tail_violations;
    if (head_energy < (1.0 - accuracy) * best_head) ++out.head_violations;
  }
  return out;
}

inline std::vector<ProbeReport> probe_projection_constants(Index p, Index rank, double accuracy, Index count,
                                                           std::uint64_t seed) {
  const ProjectionConstants c =
      measure_projection_constants(projection_corpus(p, rank, count, seed), rank, accuracy, seed);
  ProbeReport tail{"tail_constant", {}, c.tail, 1.0 + accuracy, c.tail_violations == 0, seed};
  tail.with("p", p).with("rank", rank).with("theta", accuracy).with("matrices", count).with("violations",
                                                                                            c.tail_violations);
  ProbeReport head{"head_constant", {}, c.head, 1.0 - accuracy, c.head_violations == 0, seed};
  head.with("p", p).with("rank", rank).with("theta", accuracy).with("matrices", count).with("violations",
                                                                                            c.head_violations);
  return {tail, head};
}

}  // namespace romrec
