// romrec: recovery runs, phase/condition-number sweeps, timing and probes.
//
// Exit codes: 0 ok, 1 usage, 2 IO or format error, 3 probe failure.

#include "romrec/romrec.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using romrec::Index;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

template <class T>
T parse_number(const std::string& s) {
  std::istringstream in(s);
  T v{};
  in >> v;
  if (!in || !in.eof()) throw UsageError("not a number: " + s);
  return v;
}

/// "a:b:step" (inclusive) or "x,y,z".
template <class T>
std::vector<T> parse_grid(const std::string& s) {
  std::vector<T> out;
  const auto range = split(s, ':');
  if (range.size() == 3) {
    const T a = parse_number<T>(range[0]);
    const T b = parse_number<T>(range[1]);
    const T step = parse_number<T>(range[2]);
    if (!(step > T{0})) throw UsageError("grid step must be positive: " + s);
    for (T v = a; v <= b; v += step) out.push_back(v);
  } else {
    for (const auto& item : split(s, ',')) out.push_back(parse_number<T>(item));
  }
  if (out.empty()) throw UsageError("empty grid: " + s);
  return out;
}

struct Options {
  Index p = 100;
  Index r = 5;
  std::optional<Index> m;
  std::string m_grid, kappa_grid, p_grid;
  std::optional<double> kappa;
  std::string algo;
  double eta = 0.5;
  Index iters = 200;
  double noise_std = 0.0;
  std::optional<std::uint64_t> seed;
  Index trials = 10;
  double threshold = 0.05;
  std::string sampling = "fresh";
  double theta = 0.1;
  Index threads = 1;
  Index depth = 0;
  Index head_rank = 0;
  std::string out;
  std::string truth_in, truth_out, obs_out;
  bool streaming = false;
  bool no_timing = false;
  Index timing_iters = 3;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--p", o.p, "Matrix dimension");
  cmd->add_option("--r", o.r, "Rank");
  cmd->add_option("--m", o.m, "Measurements per iteration (fresh) or in total (reuse)");
  cmd->add_option("--m-grid", o.m_grid, "m values: a:b:step or a comma list");
  cmd->add_option("--kappa", o.kappa, "Condition number of the ground truth");
  cmd->add_option("--kappa-grid", o.kappa_grid, "Condition numbers, comma list");
  cmd->add_option("--p-grid", o.p_grid, "Dimensions for scaling, comma list");
  cmd->add_option("--algo", o.algo, "eprom | aprom-bksvd | aprom-mbksvd (comma list allowed)");
  cmd->add_option("--eta", o.eta, "Step size");
  cmd->add_option("--iters", o.iters, "Maximum iterations");
  cmd->add_option("--noise-std", o.noise_std, "Observation noise standard deviation");
  cmd->add_option("--seed", o.seed, "Master seed (falls back to ROMREC_SEED, then 1)");
  cmd->add_option("--trials", o.trials, "Trials per grid cell");
  cmd->add_option("--threshold", o.threshold, "Success threshold on relative spectral error");
  cmd->add_option("--sampling", o.sampling, "fresh | reuse")->check(CLI::IsMember({"fresh", "reuse"}));
  cmd->add_option("--theta", o.theta, "Krylov accuracy parameter");
  cmd->add_option("--threads", o.threads, "Concurrent trials");
  cmd->add_option("--depth", o.depth, "Krylov depth override (0 = default)");
  cmd->add_option("--head-rank", o.head_rank, "Head projection rank (0 = 2r)");
  cmd->add_option("--out", o.out, "Output CSV path (default stdout)");
}

std::uint64_t resolve_seed(const Options& o) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("ROMREC_SEED")) return parse_number<std::uint64_t>(env);
  return 1;
}

romrec::ExperimentSpec build_spec(romrec::Experiment kind, const Options& o) {
  romrec::ExperimentSpec s;
  s.kind = kind;
  s.r = o.r;
  s.p_grid = o.p_grid.empty() ? std::vector<Index>{o.p} : parse_grid<Index>(o.p_grid);
  if (kind == romrec::Experiment::scaling && o.p_grid.empty()) s.p_grid = {250, 500, 1000};

  if (!o.m_grid.empty())
    s.m_grid = parse_grid<Index>(o.m_grid);
  else if (o.m)
    s.m_grid = {*o.m};
  else if (kind == romrec::Experiment::phase)
    s.m_grid = parse_grid<Index>("1000:8000:1000");
  else if (kind == romrec::Experiment::condnum)
    s.m_grid = {6000};
  else if (kind == romrec::Experiment::scaling)
    s.m_grid = {20000};
  else
    s.m_grid = {5000};

  if (!o.kappa_grid.empty())
    s.kappa_grid = parse_grid<double>(o.kappa_grid);
  else if (o.kappa)
    s.kappa_grid = {*o.kappa};
  else if (kind == romrec::Experiment::condnum)
    s.kappa_grid = {1.0, 10.0, 100.0};

  std::string algo = o.algo;
  if (algo.empty()) algo = kind == romrec::Experiment::run ? "eprom" : "eprom,aprom-mbksvd";
  s.algos.clear();
  for (const auto& name : split(algo, ',')) {
    const auto a = romrec::parse_algorithm(name);
    if (!a) throw UsageError("unknown algorithm: " + name);
    s.algos.push_back(*a);
  }

  s.noise_std = o.noise_std;
  s.trials = o.trials;
  s.seed = resolve_seed(o);
  s.threshold = o.threshold;
  s.eta = o.eta;
  s.iters = o.iters;
  s.sampling = o.sampling == "reuse" ? romrec::SamplingMode::reuse : romrec::SamplingMode::fresh;
  s.theta = o.theta;
  s.threads = o.threads;
  s.depth = o.depth;
  s.head_rank = o.head_rank;
  s.streaming = o.streaming;
  s.timing_iters = o.timing_iters;
  s.timing_columns = !o.no_timing;
  s.validate();
  return s;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file_.open(path);
    if (!file_) throw romrec::FormatError("cannot open " + path + " for writing");
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw romrec::FormatError("write failed");
  }

 private:
  std::ofstream file_;
};

int run_command(romrec::Experiment kind, const Options& o) {
  const romrec::ExperimentSpec spec = build_spec(kind, o);
  Output out(o.out);
  int code = 0;
  switch (kind) {
    case romrec::Experiment::run: {
      std::optional<romrec::GroundTruth> truth;
      if (!o.truth_in.empty()) {
        romrec::SymMatrix m = romrec::read_rom1(o.truth_in);
        if (m.dim() != spec.p_grid.front()) throw UsageError("--truth-in dimension does not match --p");
        romrec::LowRankFactors f = romrec::truncated_eig(m, spec.r);
        truth = romrec::GroundTruth{std::move(m), std::move(f), 0.0};
      } else if (!o.truth_out.empty() || !o.obs_out.empty()) {
        truth = romrec::generate_instance(spec.p_grid.front(), spec.r, spec.kappa_grid.front(),
                                          romrec::trial_truth_seed(spec, 0));
      }
      if (!o.truth_out.empty()) romrec::write_rom1(o.truth_out, truth->matrix);
      if (!o.obs_out.empty()) {
        // The first measurement batch the solver sees.
        const auto cfg = romrec::trial_config(spec, spec.algos.front(), 0);
        const auto meas = romrec::draw_measurements(*truth, spec.m_grid.front(), spec.noise_std, cfg, 0);
        std::ofstream obs(o.obs_out);
        if (!obs) throw romrec::FormatError("cannot open " + o.obs_out + " for writing");
        romrec::write_observations_csv(obs, meas.obs);
      }
      romrec::cmd_run(spec, out.stream(), truth);
      break;
    }
    case romrec::Experiment::phase: romrec::cmd_phase(spec, out.stream()); break;
    case romrec::Experiment::condnum: romrec::cmd_condnum(spec, out.stream()); break;
    case romrec::Experiment::scaling: romrec::cmd_scaling(spec, out.stream()); break;
    case romrec::Experiment::probes:
      if (!romrec::cmd_probes(spec, out.stream())) code = 3;
      break;
  }
  out.finish();
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank matrix recovery from rank-one projections"};
  app.require_subcommand(1);
  Options o;

  auto* run = app.add_subcommand("run", "Single recovery run, per-iteration trace CSV");
  auto* phase = app.add_subcommand("phase", "Success probability over an m grid");
  auto* condnum = app.add_subcommand("condnum", "Success probability over a condition-number grid");
  auto* scaling = app.add_subcommand("scaling", "Per-iteration phase timings over a p grid");
  auto* probes = app.add_subcommand("probes", "Monte-Carlo checks of the statistical identities");
  for (auto* cmd : {run, phase, condnum, scaling, probes}) add_common(cmd, o);
  run->add_option("--truth-in", o.truth_in, "Ground truth matrix (ROM1)");
  run->add_option("--truth-out", o.truth_out, "Write the ground truth (ROM1)");
  run->add_option("--obs-out", o.obs_out, "Write the first observation batch (CSV)");
  run->add_flag("--no-timing", o.no_timing, "Write zeros in the timing columns");
  scaling->add_flag("--streaming", o.streaming, "Regenerate sensing vectors instead of storing them");
  scaling->add_option("--timing-iters", o.timing_iters, "Timed iterations after one warm-up");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  romrec::Experiment kind = romrec::Experiment::run;
  if (phase->parsed()) kind = romrec::Experiment::phase;
  if (condnum->parsed()) kind = romrec::Experiment::condnum;
  if (scaling->parsed()) kind = romrec::Experiment::scaling;
  if (probes->parsed()) kind = romrec::Experiment::probes;

  try {
    return run_command(kind, o);
  } catch (const UsageError& e) {
    std::cerr << "romrec: " << e.what() << '\n';
    return 1;
  } catch (const romrec::FormatError& e) {
    std::cerr << "romrec: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    // ConfigError and DimensionError.
    std::cerr << "romrec: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "romrec: " << e.what() << '\n';
    return 2;
  }
}
