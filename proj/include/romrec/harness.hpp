#pragma once

// Experiment drivers behind the CLI. Every command writes CSV to an ostream,
// starting with `# seed=` and `# config=` lines that are enough to replay it.

#include "romrec/diag.hpp"
#include "romrec/recover.hpp"
#include "romrec/sensing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace romrec {

enum class Experiment { run, phase, condnum, scaling, probes };
enum class Algorithm { eprom, aprom_bksvd, aprom_mbksvd };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::eprom: return "eprom";
    case Algorithm::aprom_bksvd: return "aprom-bksvd";
    case Algorithm::aprom_mbksvd: return "aprom-mbksvd";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  if (s == "eprom") return Algorithm::eprom;
  if (s == "aprom-bksvd") return Algorithm::aprom_bksvd;
  if (s == "aprom-mbksvd") return Algorithm::aprom_mbksvd;
  return std::nullopt;
}

struct ExperimentSpec {
  Experiment kind = Experiment::run;
  std::vector<Index> p_grid{100};
  Index r = 5;
  std::vector<Index> m_grid{5000};
  std::vector<double> kappa_grid{1.0};
  double noise_std = 0.0;
  std::vector<Algorithm> algos{Algorithm::eprom};
  Index trials = 10;
  std::uint64_t seed = 1;
  double threshold = 0.05;
  double eta = 0.5;
  Index iters = 200;
  SamplingMode sampling = SamplingMode::fresh;
  double theta = 0.1;
  Index threads = 1;
  Index depth = 0;
  Index head_rank = 0;
  /// scaling: regenerate sensing vectors on the fly instead of storing them.
  bool streaming = false;
  /// scaling: timed iterations after one warm-up.
  Index timing_iters = 3;
  /// run: write measured phase timings (zeros otherwise, for byte-stable output).
  bool timing_columns = true;

  void validate() const {
    if (p_grid.empty() || m_grid.empty() || kappa_grid.empty() || algos.empty())
      throw ConfigError("experiment grids must be non-empty");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (r < 1) throw ConfigError("r must be >= 1");
    for (Index p : p_grid)
      if (p < 1 || r > p) throw ConfigError("each p must satisfy 1 <= r <= p");
    for (Index m : m_grid)
      if (m < 1) throw ConfigError("m must be >= 1");
    for (double k : kappa_grid)
      if (!(k >= 1.0) || !std::isfinite(k)) throw ConfigError("condition numbers must be >= 1");
    if (!(noise_std >= 0.0)) throw ConfigError("noise std must be >= 0");
    if (!(threshold > 0.0)) throw ConfigError("threshold must be positive");
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (iters < 1) throw ConfigError("iters must be >= 1");
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("theta must lie in (0, 1)");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (depth < 0 || head_rank < 0) throw ConfigError("depth and head rank must be >= 0");
    if (head_rank != 0 && head_rank < r) throw ConfigError("head rank must be >= r");
    if (timing_iters < 1) throw ConfigError("timing iterations must be >= 1");
  }

  /// Flat key=value description used for the `# config=` line.
  std::string describe() const {
    std::ostringstream s;
    s << std::setprecision(17);
    auto list = [&](const char* key, const auto& values, auto&& fmt) {
      s << key << '=';
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s << '|';
        fmt(values[i]);
      }
      s << ';';
    };
    static constexpr const char* kinds[] = {"run", "phase", "condnum", "scaling", "probes"};
    s << "kind=" << kinds[static_cast<int>(kind)] << ';';
    list("p", p_grid, [&](Index v) { s << v; });
    s << "r=" << r << ';';
    list("m", m_grid, [&](Index v) { s << v; });
    list("kappa", kappa_grid, [&](double v) { s << v; });
    list("algo", algos, [&](Algorithm a) { s << to_string(a); });
    s << "noise_std=" << noise_std << ";trials=" << trials << ";threshold=" << threshold << ";eta=" << eta
      << ";iters=" << iters << ";sampling=" << to_string(sampling) << ";theta=" << theta << ";depth=" << depth
      << ";head_rank=" << head_rank << ";streaming=" << (streaming ? 1 : 0);
    return s.str();
  }
};

inline void write_preamble(std::ostream& out, const ExperimentSpec& spec) {
  out << "# seed=" << spec.seed << '\n' << "# config=" << spec.describe() << '\n';
}

/// Seeds for trial t. They depend only on the master seed and t, so the same
/// trial sees the same instance and samples in every grid cell.
inline RecoveryConfig trial_config(const ExperimentSpec& spec, Algorithm algo, Index trial) {
  const auto t = static_cast<std::uint64_t>(trial);
  RecoveryConfig cfg;
  cfg.rank = spec.r;
  cfg.step_size = spec.eta;
  cfg.max_iters = spec.iters;
  cfg.sampling = spec.sampling;
  cfg.projection = algo == Algorithm::eprom         ? ProjectionMode::exact
                   : algo == Algorithm::aprom_bksvd ? ProjectionMode::bksvd
                                                    : ProjectionMode::mbksvd;
  cfg.head_rank = spec.head_rank;
  cfg.accuracy = spec.theta;
  cfg.depth = spec.depth;
  cfg.ensemble_seed = derive_seed(spec.seed, Stream::ensemble, t);
  cfg.noise_seed = derive_seed(spec.seed, Stream::noise, t);
  cfg.krylov_seed = derive_seed(spec.seed, Stream::krylov, t);
  return cfg;
}

inline std::uint64_t trial_truth_seed(const ExperimentSpec& spec, Index trial) {
  return derive_seed(spec.seed, Stream::truth, static_cast<std::uint64_t>(trial));
}

inline RecoveryResult run_algorithm(Algorithm algo, const RecoveryProblem& problem, const RecoveryConfig& cfg) {
  return algo == Algorithm::eprom ? eprom_run(problem, cfg) : aprom_run(problem, cfg);
}

/// Final relative spectral error of a run (1 if it made no progress record).
inline double final_error(const RecoveryResult& result) {
  if (result.trace.records.empty()) return result.trace.initial_rel_spec_err;
  return result.trace.records.back().rel_spec_err;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to slot i by the caller, which keeps output order independent of
/// scheduling.
inline void parallel_for(Index n, Index threads, const std::function<void(Index)>& fn) {
  const Index workers = std::max<Index>(1, std::min(threads, n));
  if (workers == 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Number of trials whose final relative spectral error is below threshold.
inline Index count_successes(const ExperimentSpec& spec, Algorithm algo, Index p, Index m, double kappa) {
  std::vector<char> ok(static_cast<std::size_t>(spec.trials), 0);
  parallel_for(spec.trials, spec.threads, [&](Index t) {
    GroundTruth truth = generate_instance(p, spec.r, kappa, trial_truth_seed(spec, t));
    const RecoveryProblem problem = RecoveryProblem::from_truth(std::move(truth), m, spec.noise_std);
    const RecoveryResult res = run_algorithm(algo, problem, trial_config(spec, algo, t));
    ok[static_cast<std::size_t>(t)] = final_error(res) < spec.threshold ? 1 : 0;
  });
  return static_cast<Index>(std::count(ok.begin(), ok.end(), 1));
}

/// Single recovery run on trial 0 of the first grid cell. A ground truth
/// passed in replaces the generated one.
inline RecoveryResult cmd_run(const ExperimentSpec& spec, std::ostream& out,
                              const std::optional<GroundTruth>& truth_in = std::nullopt) {
  spec.validate();
  const Algorithm algo = spec.algos.front();
  GroundTruth truth = truth_in ? *truth_in
                               : generate_instance(spec.p_grid.front(), spec.r, spec.kappa_grid.front(),
                                                   trial_truth_seed(spec, 0));
  const RecoveryProblem problem = RecoveryProblem::from_truth(std::move(truth), spec.m_grid.front(), spec.noise_std);
  RecoveryResult res = run_algorithm(algo, problem, trial_config(spec, algo, 0));
  write_preamble(out, spec);
  write_trace_csv(out, res.trace, spec.timing_columns);
  return res;
}

/// Success probability for every (algorithm, m) cell.
inline void cmd_phase(const ExperimentSpec& spec, std::ostream& out) {
  spec.validate();
  write_preamble(out, spec);
  out << "algo,p,r,m,trials,successes,prob\n" << std::setprecision(17);
  const Index p = spec.p_grid.front();
  for (Algorithm algo : spec.algos)
    for (Index m : spec.m_grid) {
      const Index wins = count_successes(spec, algo, p, m, spec.kappa_grid.front());
      out << to_string(algo) << ',' << p << ',' << spec.r << ',' << m << ',' << spec.trials << ',' << wins << ','
          << static_cast<double>(wins) / static_cast<double>(spec.trials) << '\n'
          << std::flush;
    }
}

/// Success probability for every (algorithm, kappa) cell at fixed m.
inline void cmd_condnum(const ExperimentSpec& spec, std::ostream& out) {
  spec.validate();
  write_preamble(out, spec);
  out << "algo,p,r,m,kappa,trials,successes,prob\n" << std::setprecision(17);
  const Index p = spec.p_grid.front();
  const Index m = spec.m_grid.front();
  for (Algorithm algo : spec.algos)
    for (double kappa : spec.kappa_grid) {
      const Index wins = count_successes(spec, algo, p, m, kappa);
      out << to_string(algo) << ',' << p << ',' << spec.r << ',' << m << ',' << kappa << ',' << spec.trials << ','
          << wins << ',' << static_cast<double>(wins) / static_cast<double>(spec.trials) << '\n'
          << std::flush;
    }
}

struct ScalingRow {
  Algorithm algo;
  Index p;
  Index m;
  double iter_ms;
  double grad_ms;
  double head_ms;
  double tail_ms;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Per-iteration phase timings: one warm-up iteration, then the median of
/// `timing_iters` iterations, each phase taken separately.
inline ScalingRow time_iterations(const ExperimentSpec& spec, Algorithm algo, Index p, Index m) {
  GroundTruth truth = generate_instance(p, spec.r, spec.kappa_grid.front(), trial_truth_seed(spec, 0));
  RecoveryConfig cfg = trial_config(spec, algo, 0);
  cfg.sampling = SamplingMode::reuse;
  cfg.max_iters = 1 + spec.timing_iters;
  cfg.tolerance = 0.0;
  cfg.objective_tolerance = 0.0;

  const auto storage = spec.streaming ? RankOneEnsemble::Storage::streaming : RankOneEnsemble::Storage::stored;
  Measurements meas = draw_measurements(truth, m, spec.noise_std, cfg, 0, storage);
  const RecoveryProblem problem =
      RecoveryProblem::from_measurements(std::move(meas.ensemble), std::move(meas.obs), std::move(truth));
  const RecoveryResult res = run_algorithm(algo, problem, cfg);

  std::vector<double> it, g, h, t;
  for (std::size_t k = 1; k < res.trace.records.size(); ++k) {
    const IterationRecord& rec = res.trace.records[k];
    it.push_back(rec.grad_ms + rec.head_ms + rec.tail_ms);
    g.push_back(rec.grad_ms);
    h.push_back(rec.head_ms);
    t.push_back(rec.tail_ms);
  }
  if (it.empty()) throw ConfigError("scaling: run stopped before any timed iteration");
  return {algo, p, m, detail::median_of(it), detail::median_of(g), detail::median_of(h), detail::median_of(t)};
}

/// Timing sweep over the p grid. A single m applies to every p; an m grid
/// with one entry per p pairs them up instead.
inline std::vector<ScalingRow> cmd_scaling(const ExperimentSpec& spec, std::ostream& out) {
  spec.validate();
  const bool paired = spec.m_grid.size() == spec.p_grid.size();
  if (!paired && spec.m_grid.size() != 1) throw ConfigError("scaling: give one m or one m per p");
  write_preamble(out, spec);
  out << "algo,p,r,m,iter_ms,grad_ms,head_ms,tail_ms\n" << std::setprecision(6) << std::fixed;
  std::vector<ScalingRow> rows;
  for (Algorithm algo : spec.algos)
    for (std::size_t i = 0; i < spec.p_grid.size(); ++i) {
      const Index p = spec.p_grid[i];
      const Index m = paired ? spec.m_grid[i] : spec.m_grid.front();
      const ScalingRow row = time_iterations(spec, algo, p, m);
      rows.push_back(row);
      out << to_string(algo) << ',' << p << ',' << spec.r << ',' << m << ',' << row.iter_ms << ',' << row.grad_ms
          << ',' << row.head_ms << ',' << row.tail_ms << '\n'
          << std::flush;
    }
  out << std::defaultfloat;
  return rows;
}

/// Least-squares slope of log(y) against log(x).
inline double fitted_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  detail::require_dims(x.size() == y.size() && x.size() >= 2, "fitted_exponent: need two or more points");
  double mx = 0.0, my = 0.0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// Sizes for the probe suite.
struct ProbeSizes {
  Index identity_p = 20;
  Index identity_rank = 3;
  Index identity_m = 1000;
  Index identity_trials = 200;
  Index identity_replicates = 4;
  Index ybar_p = 20;
  Index ybar_r = 2;
  Index ybar_m = 10000;
  Index ybar_trials = 100;
  Index noise_p = 30;
  Index noise_m = 3000;
  double noise_sigma = 0.1;
  Index noise_trials = 50;
  Index curip_p = 30;
  Index curip_r = 3;
  double curip_rho = 0.5;
  Index curip_m_small = 1000;
  Index curip_m_large = 10000;
  Index curip_trials = 10;
  Index projection_p = 40;
  Index projection_rank = 5;
  Index projection_matrices = 50;
};

/// Random rank-k PSD matrix G G^T with a p x k Gaussian G.
inline SymMatrix random_psd(Index p, Index k, std::uint64_t seed) {
  const Matrix g = gaussian_matrix(p, k, seed);
  return symmetrize(g * g.transpose());
}

inline std::vector<ProbeReport> run_probes(std::uint64_t seed, double theta, const ProbeSizes& s = {}) {
  auto sub = [&](std::uint64_t k) { return derive_seed(seed, Stream::samples, k); };
  std::vector<ProbeReport> out;

  const SymMatrix m = random_psd(s.identity_p, s.identity_rank, sub(0));
  out.push_back(probe_expectation_identity(s.identity_p, s.identity_m, m, s.identity_trials, sub(1)));
  out.push_back(probe_expectation_rate(s.identity_p, s.identity_m, m, s.identity_trials, s.identity_replicates, sub(2)));

  const GroundTruth truth = generate_instance(s.ybar_p, s.ybar_r, 1.0, sub(3));
  out.push_back(probe_mean_observation(truth, s.ybar_m, s.ybar_trials, sub(4)));
  out.push_back(probe_mean_observation_rate(truth, s.ybar_m, s.ybar_trials, sub(5)));

  out.push_back(probe_statistical_error(s.noise_p, s.noise_m, s.noise_sigma, s.noise_trials, sub(6)));
  out.push_back(probe_statistical_error_rate(s.noise_p, s.noise_m, s.noise_sigma, s.noise_trials, sub(7)));
  out.push_back(probe_statistical_error_growth(s.noise_p, s.noise_m, s.noise_sigma, s.noise_trials, sub(8)));

  const SymMatrix l1 = generate_instance(s.curip_p, s.curip_r, 1.0, sub(9)).matrix;
  const SymMatrix l2 = generate_instance(s.curip_p, s.curip_r, 1.0, sub(10)).matrix;
  out.push_back(probe_curip(l1, l2, s.curip_p, s.curip_m_large, s.curip_rho, s.curip_trials, sub(11)));
  out.push_back(probe_curip_trend(l1, l2, s.curip_p, s.curip_m_small, s.curip_m_large, s.curip_rho, s.curip_trials,
                                  sub(12)));

  for (ProbeReport& r :
       probe_projection_constants(s.projection_p, s.projection_rank, theta, s.projection_matrices, sub(13)))
    out.push_back(std::move(r));
  return out;
}

/// Runs the probe suite and writes one row per probe. Returns true when
/// every probe passed.
inline bool cmd_probes(const ExperimentSpec& spec, std::ostream& out, const ProbeSizes& sizes = {}) {
  spec.validate();
  write_preamble(out, spec);
  write_probe_header(out);
  bool all = true;
  for (const ProbeReport& r : run_probes(spec.seed, spec.theta, sizes)) {
    write_probe_row(out, r);
    all = all && r.pass;
  }
  return all;
}

}  // namespace romrec
