#pragma once

// Experiment harness for the sticky-chain error-rate benchmark: config
// ingestion, grid expansion with matched NFE budgets, seeded runs and
// CSV/JSON-lines output.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "icdiff/chain.hpp"
#include "icdiff/hollow.hpp"
#include "icdiff/samplers.hpp"

namespace icdiff {

struct ExperimentConfig {
  // [chain]
  int vocab = 4;
  int length = 128;
  double stickiness = 0.9;
  // [schedule]
  ScheduleKind schedule = ScheduleKind::cosine;
  double t_min = 1e-3;
  // [grid]
  std::vector<PredictorKind> predictors{PredictorKind::ancestral};
  std::vector<CorrectorKind> correctors{CorrectorKind::none, CorrectorKind::forward_backward, CorrectorKind::informed};
  std::vector<int> nfe{32, 64, 128};
  std::vector<int> k{1, 2, 4, 8, 16};
  std::vector<double> tau{0.01, 0.1, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> h_c{0.01, 0.1, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0};
  ConfidenceKind confidence = ConfidenceKind::margin;
  FinalArgmaxMode final_argmax = FinalArgmaxMode::masked;
  // [run]
  int n_samples = 64;
  int n_seeds = 5;
  int tune_samples = 64;
  int tune_seeds = 5;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool record_timing = true;
  // [sampler] (used by `sample`)
  SamplerConfig sampler;
  // [denoiser]
  std::string denoiser = "oracle";  // oracle | hollow
  HollowDims hollow;
  std::uint64_t hollow_seed = 0;
  // [output]
  std::filesystem::path out_dir = "out";

  SequenceSpec spec() const { return SequenceSpec(vocab, length); }
  StickyChainModel chain() const { return StickyChainModel(vocab, stickiness); }
  MaskingSchedule masking() const { return MaskingSchedule(schedule); }
  void validate() const;
};

/// Flat key-value file with [section] headers; list values are comma
/// separated. Unknown sections or keys are config errors.
ExperimentConfig parse_experiment_config(std::istream& is);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// The denoiser named by the config (oracle, or a randomly initialised
/// hollow net).
std::unique_ptr<Denoiser> make_denoiser(const ExperimentConfig& config);

/// One point of the sampler grid at a given NFE budget.
struct GridCell {
  PredictorKind predictor = PredictorKind::ancestral;
  CorrectorKind corrector = CorrectorKind::none;
  int nfe = 32;
  int k = 0;        // informed only
  double tau = 0.0; // informed only
  double h_c = 0.0; // forward-backward only

  std::string sampler_label() const;
  /// Canonical text key; its hash keys the cell's random streams.
  std::string key() const;

  /// Concrete sampler settings with nfe() == this->nfe exactly.
  ///  - no corrector: P = NFE - F (F = 1 if the final argmax is on).
  ///  - with corrector (C = 1): P = (NFE + 1 - F) / 2, and t_c is placed
  ///    half a step below the first predictor landing time, so every
  ///    predictor step but the first is followed by one corrector step.
  /// Throws config error if the budget cannot be matched.
  SamplerConfig resolve(const ExperimentConfig& config) const;
};

/// Cartesian product of the grid; hyperparameters only vary where they
/// apply (k, tau for informed; h_c for forward-backward).
std::vector<GridCell> expand_grid(const ExperimentConfig& config);

struct ResultRow {
  std::string sampler;
  std::size_t nfe = 0;
  int k = 0;
  double tau = 0.0;
  double h_c = 0.0;
  int seed = 0;
  double err_mean = 0.0;  // pooled over the seed's chains
  double err_std = 0.0;   // across per-chain error rates
  double wall_ms = 0.0;
};

struct SummaryRow {
  std::string sampler;
  std::size_t nfe = 0;
  int k = 0;
  double tau = 0.0;
  double h_c = 0.0;
  int n_seeds = 0;
  double err_mean = 0.0;  // mean of per-seed err_mean
  double err_std = 0.0;   // std of per-seed err_mean
  double err_se = 0.0;    // err_std / sqrt(n_seeds)
};

enum class SeedStream : std::uint64_t { eval = 1, tune = 2 };

/// Generated samples of one (cell, seed) run, in chain order.
struct CellRun {
  ResultRow row;
  std::vector<SequenceState> samples;
};

/// n_samples chains for (cell, seed_index); chain i uses the sub-stream
/// derive_seed(master, {stream, hash(cell.key()), seed_index, i}).
/// Verifies every chain's NFE against its trace.
CellRun run_cell(const ExperimentConfig& config, const GridCell& cell, int seed_index, SeedStream stream,
                 const Denoiser& denoiser, int n_samples);

std::vector<SummaryRow> summarise(const std::vector<ResultRow>& rows);

/// Lowest mean error per (sampler, nfe); ties go to smaller k, then tau, then h_c.
std::vector<SummaryRow> best_per_sampler(const std::vector<SummaryRow>& summary);

struct SweepResult {
  std::vector<ResultRow> rows;       // |grid| x n_seeds
  std::vector<SummaryRow> summary;   // per cell
  std::vector<SummaryRow> best;      // per (sampler, nfe)
};

using ProgressFn = std::function<void(const std::string&)>;

/// Full Cartesian sweep on the given stream.
SweepResult run_sweep(const ExperimentConfig& config, const Denoiser& denoiser, SeedStream stream,
                      int n_seeds, int n_samples, const ProgressFn& progress = {});

struct BenchResult {
  SweepResult tuning;              // sweep over hyperparameters on the tune stream
  std::vector<ResultRow> rows;     // tuned cells on the eval stream
  std::vector<SummaryRow> summary;
};

/// For each (predictor, corrector, nfe): tune hyperparameters on the tune
/// stream, then evaluate the chosen cell on n_seeds eval seeds.
BenchResult run_bench(const ExperimentConfig& config, const Denoiser& denoiser, const ProgressFn& progress = {});

inline constexpr const char* kResultHeader = "sampler,nfe,k,tau,h_c,seed,err_mean,err_std,wall_ms";
inline constexpr const char* kSummaryHeader = "sampler,nfe,k,tau,h_c,n_seeds,err_mean,err_std,err_se";

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);
void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

/// JSON lines: one {"chain", "tokens", "nfe", "error_rate"} object per sample.
void write_samples_jsonl(std::ostream& os, const std::vector<GenerationReport>& reports, const StickyChainModel& model);
/// JSON lines: one {"chain", "eval", "t", "action", "changed"} object per denoiser evaluation.
void write_traces_jsonl(std::ostream& os, const std::vector<GenerationReport>& reports);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace icdiff
