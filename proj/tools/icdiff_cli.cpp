// icdiff: validate | bench | sweep | sample

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "icdiff/bench.hpp"
#include "icdiff/validate.hpp"

namespace {

using namespace icdiff;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool trace = false;
  bool no_timing = false;
  int n = 8;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "experiment config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
}

// Precedence for the output directory: --out, then ICDIFF_OUT_DIR, then the config.
ExperimentConfig resolve_config(const CommonFlags& f) {
  ExperimentConfig c = f.config_path.empty() ? ExperimentConfig{} : load_experiment_config(f.config_path);
  if (const char* env = std::getenv("ICDIFF_OUT_DIR"); env && *env) c.out_dir = env;
  if (!f.out_dir.empty()) c.out_dir = f.out_dir;
  if (f.seed) c.seed = *f.seed;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.no_timing) c.record_timing = false;
  c.validate();
  return c;
}

void progress(const std::string& what) { std::cerr << "  " << what << '\n'; }

std::ofstream open_file(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot write " + path.string());
  return os;
}

int cmd_validate(const CommonFlags& f) {
  ValidateOptions opts;
  if (f.seed) opts.seed = *f.seed;
  if (f.jobs) opts.jobs = *f.jobs;
  bool all_passed = true;
  const auto results = run_checks(opts);
  for (const CheckResult& r : results) {
    all_passed = all_passed && r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(24) << r.id << ' ' << r.detail << " ["
              << std::fixed << std::setprecision(0) << r.elapsed_ms << " ms]\n";
    std::cout.unsetf(std::ios::floatfield);
  }
  std::cout << (all_passed ? "all checks passed" : "some checks FAILED") << '\n';
  return all_passed ? kExitOk : kExitCheckFailure;
}

int cmd_bench(const CommonFlags& f) {
  const ExperimentConfig c = resolve_config(f);
  const auto denoiser = make_denoiser(c);
  std::cerr << "bench: tuning " << expand_grid(c).size() << " cells, then evaluating the best per sampler\n";
  const BenchResult r = run_bench(c, *denoiser, progress);
  write_results_csv(c.out_dir / "tuning.csv", r.tuning.rows);
  write_summary_csv(c.out_dir / "tuning_summary.csv", r.tuning.summary);
  write_summary_csv(c.out_dir / "best.csv", r.tuning.best);
  write_results_csv(c.out_dir / "results.csv", r.rows);
  write_summary_csv(c.out_dir / "summary.csv", r.summary);
  write_summary_csv(std::cout, r.summary);
  return kExitOk;
}

int cmd_sweep(const CommonFlags& f) {
  const ExperimentConfig c = resolve_config(f);
  const auto denoiser = make_denoiser(c);
  std::cerr << "sweep: " << expand_grid(c).size() << " cells x " << c.n_seeds << " seeds\n";
  const SweepResult r = run_sweep(c, *denoiser, SeedStream::eval, c.n_seeds, c.n_samples, progress);
  write_results_csv(c.out_dir / "results.csv", r.rows);
  write_summary_csv(c.out_dir / "summary.csv", r.summary);
  write_summary_csv(c.out_dir / "best.csv", r.best);
  write_summary_csv(std::cout, r.best);
  return kExitOk;
}

int cmd_sample(const CommonFlags& f) {
  if (f.n < 0) throw Error(ErrorKind::config, "--n must be >= 0");
  const ExperimentConfig c = resolve_config(f);
  const auto denoiser = make_denoiser(c);
  SamplerConfig sc = c.sampler;
  sc.record_trace = f.trace;
  sc.validate(c.spec());

  std::vector<GenerationReport> reports(static_cast<std::size_t>(f.n));
  parallel_for(reports.size(), c.jobs, [&](std::size_t i) {
    SamplerConfig chain = sc;
    chain.seed = derive_seed(c.seed, {hash_label("sample"), i});
    reports[i] = generate(chain, *denoiser, c.spec(), c.masking());
  });

  auto samples = open_file(c.out_dir / "samples.jsonl");
  write_samples_jsonl(samples, reports, c.chain());
  if (f.trace) {
    auto traces = open_file(c.out_dir / "traces.jsonl");
    write_traces_jsonl(traces, reports);
  }
  std::size_t residual = 0;
  for (const auto& r : reports) residual += r.residual_masks;
  if (residual > 0) std::cerr << "warning: " << residual << " positions left masked (final_argmax is off)\n";
  std::cerr << "sample: wrote " << reports.size() << " sequences to " << (c.out_dir / "samples.jsonl").string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked discrete diffusion samplers on a sticky Markov chain"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* validate = app.add_subcommand("validate", "run the invariant suite");
  validate->add_option("--seed", flags.seed, "master seed");
  validate->add_option("--jobs", flags.jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "tune each sampler per NFE, then evaluate on fresh seeds");
  add_common(bench, flags);
  bench->add_flag("--no-timing", flags.no_timing, "write wall_ms = 0 for byte-stable output");

  auto* sweep = app.add_subcommand("sweep", "full hyperparameter sweep with per-NFE best cells");
  add_common(sweep, flags);
  sweep->add_flag("--no-timing", flags.no_timing, "write wall_ms = 0 for byte-stable output");

  auto* sample = app.add_subcommand("sample", "generate sequences with the [sampler] settings");
  add_common(sample, flags);
  sample->add_option("--n", flags.n, "number of sequences");
  sample->add_flag("--trace", flags.trace, "also write one trace record per denoiser evaluation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*validate) return cmd_validate(flags);
    if (*bench) return cmd_bench(flags);
    if (*sweep) return cmd_sweep(flags);
    return cmd_sample(flags);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return e.kind() == ErrorKind::config ? kExitConfigError : kExitCheckFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailure;
  }
}
