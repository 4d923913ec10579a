// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// nonzero if any selected criterion fails.
//
//   acceptance                 all criteria
//   acceptance --criterion N   just criterion N (repeatable)

#include "romrec/romrec.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace romrec;

namespace {

// Pinned tolerances.
constexpr std::uint64_t kSeed = 1;
constexpr double kSuccess = 0.05;
constexpr Index kTrials = 10;
constexpr Index kMinSuccesses = 9;
constexpr double kProjectorTol = 1e-8;
constexpr double kIdentityRelTol = 0.05;
constexpr double kRateLo = 1.5, kRateHi = 2.7;
constexpr double kProbDelta = 0.1;
constexpr double kQuadLo = 1.7, kQuadHi = 2.3;
constexpr double kLinLo = 0.7, kLinHi = 1.4;
constexpr double kFloorLo = 1.6, kFloorHi = 2.6;
constexpr double kContractionShare = 0.95;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

ExperimentSpec operating_point() {
  ExperimentSpec s;
  s.p_grid = {100};
  s.r = 5;
  s.m_grid = {5000};
  s.kappa_grid = {1.0};
  s.noise_std = 0.0;
  s.eta = 0.5;
  s.iters = 200;
  s.trials = kTrials;
  s.seed = kSeed;
  s.threshold = kSuccess;
  s.sampling = SamplingMode::fresh;
  return s;
}

RecoveryResult trial_run(const ExperimentSpec& s, Algorithm algo, Index trial, double kappa) {
  GroundTruth truth = generate_instance(s.p_grid.front(), s.r, kappa, trial_truth_seed(s, trial));
  const RecoveryProblem problem = RecoveryProblem::from_truth(std::move(truth), s.m_grid.front(), s.noise_std);
  return run_algorithm(algo, problem, trial_config(s, algo, trial));
}

/// Criterion-1 runs, shared with criterion 8.
const std::map<Algorithm, std::vector<RecoveryResult>>& operating_point_runs() {
  static const auto runs = [] {
    std::map<Algorithm, std::vector<RecoveryResult>> out;
    const ExperimentSpec s = operating_point();
    for (Algorithm algo : {Algorithm::eprom, Algorithm::aprom_mbksvd})
      for (Index t = 0; t < s.trials; ++t) out[algo].push_back(trial_run(s, algo, t, 1.0));
    return out;
  }();
  return runs;
}

Outcome criterion1() {
  bool pass = true;
  std::string detail;
  for (const auto& [algo, runs] : operating_point_runs()) {
    Index wins = 0;
    double worst = 0.0;
    for (const RecoveryResult& r : runs) {
      const double e = final_error(r);
      wins += e < kSuccess ? 1 : 0;
      worst = std::max(worst, e);
    }
    pass = pass && wins >= kMinSuccesses;
    detail += std::string(to_string(algo)) + " " + std::to_string(wins) + "/" + std::to_string(runs.size()) +
              " (worst " + fmt(worst) + ") ";
  }
  return {pass, detail + "need >= 9/10 with error < 0.05"};
}

Outcome criterion2() {
  double worst = 0.0;
  for (Index k = 0; k < 20; ++k) {
    const std::uint64_t s = derive_seed(kSeed, Stream::trial, static_cast<std::uint64_t>(k));
    const Index p = 10 + (k * 7) % 41;       // 10..50
    const Index m = 50 + (k * 113) % 451;    // 50..500
    const Index r = 1 + k % 5;               // 1..5
    const RankOneEnsemble e(p, m, derive_seed(s, Stream::ensemble));
    const ImplicitGradient grad =
        make_implicit_gradient(e, gaussian_vector(m, derive_seed(s, Stream::noise)), 0.5 * (k % 3) - 0.5);
    const KrylovParams params = KrylovParams::for_rank(p, r, 0.1, derive_seed(s, Stream::krylov));
    const double d =
        (mbksvd(grad, params).projector() - bksvd(materialize_gradient(grad), params).projector()).dense().norm();
    worst = std::max(worst, d);
  }
  return {worst <= kProjectorTol, "max projector difference " + fmt(worst) + " over 20 cases (tol 1e-8)"};
}

Outcome criterion3() {
  const Index p = 20;
  const SymMatrix mat = random_psd(p, 3, derive_seed(kSeed, Stream::truth));
  const Index m = 1000, trials = 200;  // m * trials = 2e5
  const ProbeReport dev =
      probe_expectation_identity(p, m, mat, trials, derive_seed(kSeed, Stream::samples, 1), kIdentityRelTol);
  const ProbeReport rate = probe_expectation_rate(p, m, mat, trials, 4, derive_seed(kSeed, Stream::samples, 2));
  const bool rate_ok = rate.measured >= kRateLo && rate.measured <= kRateHi;
  return {dev.pass && rate_ok, "deviation " + fmt(dev.measured) + " (limit " + fmt(dev.predicted) +
                                   "), ratio B/4B " + fmt(rate.measured) + " (band [1.5, 2.7])"};
}

Outcome criterion4() {
  const auto corpus = projection_corpus(40, 5, 50, derive_seed(kSeed, Stream::truth));
  const ProjectionConstants c = measure_projection_constants(corpus, 5, 0.1, derive_seed(kSeed, Stream::krylov));
  return {c.tail_violations == 0 && c.head_violations == 0,
          "tail violations " + std::to_string(c.tail_violations) + " (max c_T " + fmt(c.tail, 6) +
              "), head violations " + std::to_string(c.head_violations) + " (min c_H " + fmt(c.head, 6) +
              ") over 50 matrices"};
}

Outcome criterion5() {
  ExperimentSpec s = operating_point();
  s.m_grid = {6000};
  bool pass = true;
  std::string detail;
  for (Algorithm algo : {Algorithm::eprom, Algorithm::aprom_mbksvd}) {
    std::vector<double> probs;
    for (double kappa : {1.0, 10.0, 100.0})
      probs.push_back(static_cast<double>(count_successes(s, algo, 100, 6000, kappa)) / static_cast<double>(s.trials));
    pass = pass && std::abs(probs[2] - probs[0]) <= kProbDelta + 1e-12;
    detail += std::string(to_string(algo)) + " prob(k=1,10,100)=" + fmt(probs[0]) + "," + fmt(probs[1]) + "," +
              fmt(probs[2]) + " ";
  }
  return {pass, detail + "need |prob(100) - prob(1)| <= 0.1"};
}

Outcome criterion6() {
  ExperimentSpec s = operating_point();
  s.m_grid = {20000};
  s.timing_iters = 3;
  const Index m = 20000;

  std::vector<double> ps, ep_grad, mb_head;
  double ep_iter = 0.0, mb_iter = 0.0;
  for (Index p : {250, 500, 1000}) {
    s.p_grid = {p};
    const ScalingRow ep = time_iterations(s, Algorithm::eprom, p, m);
    const ScalingRow mb = time_iterations(s, Algorithm::aprom_mbksvd, p, m);
    ps.push_back(static_cast<double>(p));
    ep_grad.push_back(ep.grad_ms);
    mb_head.push_back(mb.head_ms);
    std::cout << "  timing p=" << p << " eprom iter " << fmt(ep.iter_ms) << " ms (grad " << fmt(ep.grad_ms)
              << "), mbksvd iter " << fmt(mb.iter_ms) << " ms (head " << fmt(mb.head_ms) << ")\n";
    if (p == 1000) {
      ep_iter = ep.iter_ms;
      mb_iter = mb.iter_ms;
    }
  }
  const double quad = fitted_exponent(ps, ep_grad);
  const double lin = fitted_exponent(ps, mb_head);
  const bool faster = mb_iter < ep_iter;
  const bool quad_ok = quad >= kQuadLo && quad <= kQuadHi;
  const bool lin_ok = lin >= kLinLo && lin <= kLinHi;
  return {faster && quad_ok && lin_ok,
          std::string("(a) p=1000 mbksvd ") + fmt(mb_iter) + " ms vs eprom " + fmt(ep_iter) + " ms " +
              (faster ? "ok" : "NOT faster") + "; (b) eprom grad exponent " + fmt(quad, 3) + " [1.7, 2.3] " +
              (quad_ok ? "ok" : "out") + ", mbksvd head exponent " + fmt(lin, 3) + " [0.7, 1.4] " +
              (lin_ok ? "ok" : "out")};
}

double plateau(const RecoveryResult& r) {
  const auto& rec = r.trace.records;
  const std::size_t n = std::min<std::size_t>(20, rec.size());
  double s = 0.0;
  for (std::size_t k = rec.size() - n; k < rec.size(); ++k) s += rec[k].rel_spec_err;
  return s / static_cast<double>(n);
}

Outcome criterion7() {
  ExperimentSpec s = operating_point();
  s.noise_std = 0.1;
  double small = 0.0, large = 0.0;
  for (Index t = 0; t < kTrials; ++t) {
    s.m_grid = {5000};
    small += plateau(trial_run(s, Algorithm::eprom, t, 1.0));
    s.m_grid = {20000};
    large += plateau(trial_run(s, Algorithm::eprom, t, 1.0));
  }
  small /= kTrials;
  large /= kTrials;
  const double ratio = small / large;
  return {ratio >= kFloorLo && ratio <= kFloorHi, "plateau m=5000 " + fmt(small) + ", m=20000 " + fmt(large) +
                                                      ", ratio " + fmt(ratio) + " (band [1.6, 2.6])"};
}

/// Share of pre-plateau iterations whose error ratio is below one. The floor
/// is the median of the last ten errors; the pre-plateau stretch runs from
/// L_0 until the error first reaches twice the floor.
std::pair<Index, Index> contraction_counts(const RecoveryResult& r) {
  std::vector<double> err{r.trace.initial_rel_spec_err};
  for (const auto& rec : r.trace.records) err.push_back(rec.rel_spec_err);
  std::vector<double> tail(err.end() - std::min<std::ptrdiff_t>(10, static_cast<std::ptrdiff_t>(err.size())), err.end());
  std::sort(tail.begin(), tail.end());
  const double floor = tail[tail.size() / 2];
  Index good = 0, total = 0;
  for (std::size_t k = 1; k < err.size(); ++k) {
    ++total;
    if (err[k] < err[k - 1]) ++good;
    if (err[k] <= 2.0 * floor) break;
  }
  return {good, total};
}

Outcome criterion8() {
  Index good = 0, total = 0;
  for (const RecoveryResult& r : operating_point_runs().at(Algorithm::eprom)) {
    const auto [g, t] = contraction_counts(r);
    good += g;
    total += t;
  }
  Index ap_good = 0, ap_total = 0;
  for (const RecoveryResult& r : operating_point_runs().at(Algorithm::aprom_mbksvd)) {
    const auto [g, t] = contraction_counts(r);
    ap_good += g;
    ap_total += t;
  }
  const double share = total ? static_cast<double>(good) / static_cast<double>(total) : 0.0;
  return {share >= kContractionShare, "eprom " + std::to_string(good) + "/" + std::to_string(total) +
                                          " pre-plateau iterations contract (" + fmt(share) +
                                          ", need >= 0.95); aprom-mbksvd " + std::to_string(ap_good) + "/" +
                                          std::to_string(ap_total)};
}

Outcome criterion9() {
  auto twice = [](const std::function<void(std::ostream&)>& f) {
    std::ostringstream a, b;
    f(a);
    f(b);
    return a.str() == b.str() && !a.str().empty();
  };
  ExperimentSpec s = operating_point();
  s.timing_columns = false;
  bool ok = true;
  std::string detail;
  for (Algorithm algo : {Algorithm::eprom, Algorithm::aprom_mbksvd}) {
    s.algos = {algo};
    const bool same = twice([&](std::ostream& o) { cmd_run(s, o); });
    ok = ok && same;
    detail += "run " + std::string(to_string(algo)) + (same ? " identical; " : " DIFFERS; ");
  }
  ExperimentSpec phase = s;
  phase.p_grid = {40};
  phase.r = 2;
  phase.m_grid = {800, 1600};
  phase.trials = 4;
  phase.iters = 50;
  phase.algos = {Algorithm::eprom, Algorithm::aprom_bksvd, Algorithm::aprom_mbksvd};
  const bool phase_same = twice([&](std::ostream& o) { cmd_phase(phase, o); });
  phase.threads = 3;
  std::ostringstream serial, threaded;
  ExperimentSpec one = phase;
  one.threads = 1;
  cmd_phase(one, serial);
  cmd_phase(phase, threaded);
  const bool thread_same = serial.str() == threaded.str();
  ProbeSizes sizes;
  sizes.identity_trials = 50;
  sizes.projection_matrices = 10;
  const bool probes_same = twice([&](std::ostream& o) { cmd_probes(s, o, sizes); });
  ok = ok && phase_same && thread_same && probes_same;
  detail += std::string("phase ") + (phase_same ? "identical" : "DIFFERS") + ", threads 1 vs 3 " +
            (thread_same ? "identical" : "DIFFER") + ", probes " + (probes_same ? "identical" : "DIFFER");
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      const int n = std::atoi(argv[++i]);
      if (n < 1 || n > 9) {
        std::cerr << "criterion must be 1..9\n";
        return 2;
      }
      selected.insert(n);
    } else {
      std::cerr << "usage: acceptance [--criterion N]...\n";
      return 2;
    }
  }
  if (selected.empty())
    for (int n = 1; n <= 9; ++n) selected.insert(n);

  bool all = true;
  for (int n : selected) {
    const Outcome o = criteria[static_cast<std::size_t>(n - 1)]();
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
