#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "icdiff/bench.hpp"

using namespace icdiff;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.length = 24;
  c.nfe = {8, 16};
  c.k = {1, 2};
  c.tau = {0.1, 1.0};
  c.h_c = {0.5, 2.0};
  c.n_samples = 6;
  c.n_seeds = 2;
  c.tune_samples = 4;
  c.tune_seeds = 2;
  c.seed = 5;
  c.record_timing = false;
  return c;
}

std::string csv_of(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  write_results_csv(os, rows);
  return os.str();
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_experiment_config(is);
}

ErrorKind kind_of_parse(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::contract;
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse(
      "[chain]\nS = 3\nD = 40\np = 0.8\n"
      "[schedule]\nkind = linear\n"
      "[grid]\ncorrectors = none, informed\nnfe = 16, 32\nk = 1, 4\ntau = 0.5\n"
      "[run]\nn_samples = 10\nseed = 77\njobs = 2\ntiming = false\n"
      "[sampler]\npredictor = tau_leaping\nP = 5\ncorrector = forward_backward\nh_c = 0.5\n"
      "[output]\ndir = results\n");
  CHECK(c.vocab == 3);
  CHECK(c.length == 40);
  CHECK(c.stickiness == 0.8);
  CHECK(c.schedule == ScheduleKind::linear);
  CHECK(c.correctors == std::vector<CorrectorKind>{CorrectorKind::none, CorrectorKind::informed});
  CHECK(c.nfe == std::vector<int>{16, 32});
  CHECK(c.tau == std::vector<double>{0.5});
  CHECK(c.h_c.size() == 9);  // default kept
  CHECK(c.seed == 77);
  CHECK(c.jobs == 2);
  CHECK_FALSE(c.record_timing);
  CHECK(c.sampler.predictor == PredictorKind::tau_leaping);
  CHECK(c.sampler.predictor_steps == 5);
  CHECK(c.sampler.h_c == 0.5);
  CHECK(c.out_dir == "results");

  CHECK(kind_of_parse("[chain]\nvocab = 4\n") == ErrorKind::config);
  CHECK(kind_of_parse("[nope]\nx = 1\n") == ErrorKind::config);
  CHECK(kind_of_parse("[chain]\nS = four\n") == ErrorKind::config);
  CHECK(kind_of_parse("[grid]\nnfe =\n") == ErrorKind::config);
  CHECK(kind_of_parse("[grid]\ncorrectors = none, magic\n") == ErrorKind::config);
  CHECK(kind_of_parse("[chain]\np = 1.5\n") == ErrorKind::config);
  CHECK(kind_of_parse("[run]\njobs = 0\n") == ErrorKind::config);
}

TEST_CASE("default grid values and matched NFE") {
  const ExperimentConfig c;
  CHECK(c.k == std::vector<int>{1, 2, 4, 8, 16});
  CHECK(c.tau == std::vector<double>{0.01, 0.1, 0.5, 1.0, 2.0, 4.0});
  const auto cells = expand_grid(c);
  CHECK(cells.size() == 3 * (1 + 9 + 30));
  for (const GridCell& cell : cells) {
    const SamplerConfig s = cell.resolve(c);
    CHECK(s.expected_nfe() == static_cast<std::size_t>(cell.nfe));
    if (cell.corrector == CorrectorKind::none) {
      CHECK(s.predictor_steps == cell.nfe - 1);
    } else {
      CHECK(s.predictor_steps == cell.nfe / 2);
      CHECK(s.corrector_steps == 1);
    }
  }
}

TEST_CASE("unmatchable budgets are config errors") {
  ExperimentConfig c = tiny_config();
  c.nfe = {11};
  c.correctors = {CorrectorKind::informed};
  CHECK_THROWS_AS(expand_grid(c), Error);
}

TEST_CASE("sweep row count and determinism across worker counts") {
  ExperimentConfig c = tiny_config();
  const OracleDenoiser oracle(c.chain());
  const auto grid = expand_grid(c);
  const SweepResult a = run_sweep(c, oracle, SeedStream::eval, c.n_seeds, c.n_samples);
  CHECK(a.rows.size() == grid.size() * static_cast<std::size_t>(c.n_seeds));
  CHECK(a.summary.size() == grid.size());
  CHECK(a.best.size() == c.nfe.size() * c.correctors.size());
  for (const ResultRow& r : a.rows) {
    CHECK(r.err_mean >= 0.0);
    CHECK(r.err_mean <= 1.0);
    CHECK(r.err_std >= 0.0);
    CHECK(r.wall_ms == 0.0);
  }
  c.jobs = 3;
  const SweepResult b = run_sweep(c, oracle, SeedStream::eval, c.n_seeds, c.n_samples);
  CHECK(csv_of(a.rows) == csv_of(b.rows));
}

TEST_CASE("adding grid cells does not perturb existing cells") {
  ExperimentConfig c = tiny_config();
  const OracleDenoiser oracle(c.chain());
  const GridCell cell{PredictorKind::ancestral, CorrectorKind::informed, 16, 2, 1.0, 0.0};
  const CellRun before = run_cell(c, cell, 1, SeedStream::eval, oracle, 5);
  c.k = {1, 2, 4, 8};
  c.nfe = {8, 16, 32};
  const CellRun after = run_cell(c, cell, 1, SeedStream::eval, oracle, 5);
  CHECK(before.samples == after.samples);
}

TEST_CASE("error aggregation matches recomputation from raw samples") {
  const ExperimentConfig c = tiny_config();
  const OracleDenoiser oracle(c.chain());
  const GridCell cell{PredictorKind::ancestral, CorrectorKind::none, 9, 0, 0.0, 0.0};
  const CellRun run = run_cell(c, cell, 0, SeedStream::eval, oracle, 40);
  CHECK(run.samples.size() == 40);
  CHECK(run.row.err_mean == doctest::Approx(error_rate(run.samples, c.chain())).epsilon(1e-14));
  CHECK(run.row.err_mean > 0.0);  // 8 predictor steps over 24 positions makes mistakes
  CHECK(run.row.nfe == 9);
}

TEST_CASE("one token per step: zero error in every cell") {
  ExperimentConfig c = tiny_config();
  c.predictors = {PredictorKind::one_at_a_time};
  c.correctors = {CorrectorKind::none};
  c.nfe = {c.length + 1};
  const OracleDenoiser oracle(c.chain());
  const SweepResult r = run_sweep(c, oracle, SeedStream::eval, 3, 10);
  for (const ResultRow& row : r.rows) CHECK(row.err_mean == 0.0);
}

TEST_CASE("single-cell grid: the summary and best row equal that cell") {
  ExperimentConfig c = tiny_config();
  c.correctors = {CorrectorKind::informed};
  c.nfe = {16};
  c.k = {2};
  c.tau = {0.5};
  const OracleDenoiser oracle(c.chain());
  const SweepResult r = run_sweep(c, oracle, SeedStream::eval, 3, 4);
  REQUIRE(r.summary.size() == 1);
  REQUIRE(r.best.size() == 1);
  CHECK(r.best[0].k == 2);
  CHECK(r.best[0].tau == 0.5);
  CHECK(r.best[0].err_mean == r.summary[0].err_mean);
  double mean = 0.0;
  for (const ResultRow& row : r.rows) mean += row.err_mean / 3.0;
  CHECK(r.summary[0].err_mean == doctest::Approx(mean));
}

TEST_CASE("best-cell tie-break prefers smaller k, then smaller tau") {
  std::vector<SummaryRow> rows = {
      {"ancestral+informed", 32, 4, 0.1, 0.0, 5, 0.01, 0.0, 0.0},
      {"ancestral+informed", 32, 2, 1.0, 0.0, 5, 0.01, 0.0, 0.0},
      {"ancestral+informed", 32, 2, 0.5, 0.0, 5, 0.01, 0.0, 0.0},
      {"ancestral+informed", 32, 1, 0.5, 0.0, 5, 0.02, 0.0, 0.0},
      {"ancestral+informed", 64, 8, 4.0, 0.0, 5, 0.00, 0.0, 0.0},
  };
  const auto best = best_per_sampler(rows);
  REQUIRE(best.size() == 2);
  CHECK(best[0].k == 2);
  CHECK(best[0].tau == 0.5);
  CHECK(best[1].nfe == 64);
}

TEST_CASE("summary statistics") {
  std::vector<ResultRow> rows;
  for (int s = 0; s < 4; ++s) rows.push_back({"ancestral+none", 8, 0, 0.0, 0.0, s, 0.1 * (s + 1), 0.0, 0.0});
  const auto summary = summarise(rows);
  REQUIRE(summary.size() == 1);
  CHECK(summary[0].n_seeds == 4);
  CHECK(summary[0].err_mean == doctest::Approx(0.25));
  const double sd = std::sqrt((0.0225 + 0.0025 + 0.0025 + 0.0225) / 3.0);
  CHECK(summary[0].err_std == doctest::Approx(sd));
  CHECK(summary[0].err_se == doctest::Approx(sd / 2.0));
}

TEST_CASE("bench: tuned cells are evaluated on fresh seeds") {
  const ExperimentConfig c = tiny_config();
  const OracleDenoiser oracle(c.chain());
  const BenchResult r = run_bench(c, oracle);
  CHECK(r.tuning.rows.size() == expand_grid(c).size() * static_cast<std::size_t>(c.tune_seeds));
  CHECK(r.rows.size() == r.tuning.best.size() * static_cast<std::size_t>(c.n_seeds));
  CHECK(r.summary.size() == r.tuning.best.size());
  const BenchResult again = run_bench(c, oracle);
  CHECK(csv_of(r.rows) == csv_of(again.rows));
}

TEST_CASE("csv and json-lines output") {
  const std::vector<ResultRow> rows = {{"ancestral+informed", 32, 2, 0.5, 0.0, 1, 0.125, 0.25, 0.0}};
  CHECK(csv_of(rows) == "sampler,nfe,k,tau,h_c,seed,err_mean,err_std,wall_ms\nancestral+informed,32,2,0.5,0,1,0.125,0.25,0\n");

  const OracleDenoiser oracle(default_chain());
  SamplerConfig sc;
  sc.predictor_steps = 4;
  std::vector<GenerationReport> reports = {generate(sc, oracle, SequenceSpec(4, 6), MaskingSchedule())};
  std::ostringstream samples, traces;
  write_samples_jsonl(samples, reports, default_chain());
  write_traces_jsonl(traces, reports);
  CHECK(samples.str().find("\"tokens\":[") != std::string::npos);
  CHECK(samples.str().find("\"nfe\":5") != std::string::npos);
  std::size_t lines = 0;
  for (char ch : traces.str()) lines += ch == '\n';
  CHECK(lines == reports[0].nfe);

  const auto dir = std::filesystem::temp_directory_path() / "icdiff_bench_out";
  std::filesystem::remove_all(dir);
  write_results_csv(dir / "nested" / "r.csv", rows);
  CHECK(std::filesystem::exists(dir / "nested" / "r.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw Error(ErrorKind::io, "boom");
                  }),
                  Error);
}
