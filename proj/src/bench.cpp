#include "icdiff/bench.hpp"

#include <algorithm>
#include <atomic>
#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace icdiff {

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  boost::split(parts, s, boost::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    boost::trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

template <typename T>
T parse_scalar(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (!is || !(is >> std::ws).eof()) throw Error(ErrorKind::config, "bad value '" + v + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::config, "bad boolean '" + v + "' for " + key);
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F&& f) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(f(key, item));
  if (out.empty()) throw Error(ErrorKind::config, "empty list for " + key);
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  (void)spec();
  (void)chain();
  if (!(t_min > 0.0 && t_min < 1.0)) throw Error(ErrorKind::config, "t_min must lie in (0, 1)");
  if (n_samples < 0 || n_seeds < 1 || tune_samples < 1 || tune_seeds < 1)
    throw Error(ErrorKind::config, "sample and seed counts must be positive");
  if (jobs < 1) throw Error(ErrorKind::config, "jobs must be >= 1");
  if (predictors.empty() || correctors.empty() || nfe.empty() || k.empty() || tau.empty() || h_c.empty())
    throw Error(ErrorKind::config, "grid lists must be non-empty");
  if (denoiser != "oracle" && denoiser != "hollow") throw Error(ErrorKind::config, "denoiser must be oracle or hollow");
}

ExperimentConfig parse_experiment_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::config, e.what());
  }
  ExperimentConfig c;
  c.sampler.t_min = c.t_min;
  bool sampler_t_min_set = false;

  for (const auto& [section, body] : tree) {
    if (body.empty()) throw Error(ErrorKind::config, "top-level key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const std::string v = boost::trim_copy(node.get_value<std::string>());
      const std::string name = section + "." + key;
      if (section == "chain") {
        if (key == "S") c.vocab = parse_scalar<int>(name, v);
        else if (key == "D") c.length = parse_scalar<int>(name, v);
        else if (key == "p") c.stickiness = parse_scalar<double>(name, v);
        else throw Error(ErrorKind::config, "unknown key " + name);
      } else if (section == "schedule") {
        if (key == "kind") c.schedule = parse_schedule_kind(v);
        else if (key == "t_min") c.t_min = parse_scalar<double>(name, v);
        else throw Error(ErrorKind::config, "unknown key " + name);
      } else if (section == "grid") {
        if (key == "predictors") c.predictors = parse_list<PredictorKind>(name, v, [](auto&, auto& s) { return parse_predictor(s); });
        else if (key == "correctors") c.correctors = parse_list<CorrectorKind>(name, v, [](auto&, auto& s) { return parse_corrector(s); });
        else if (key == "nfe") c.nfe = parse_list<int>(name, v, parse_scalar<int>);
        else if (key == "k") c.k = parse_list<int>(name, v, parse_scalar<int>);
        else if (key == "tau") c.tau = parse_list<double>(name, v, parse_scalar<double>);
        else if (key == "h_c") c.h_c = parse_list<double>(name, v, parse_scalar<double>);
        else if (key == "confidence") c.confidence = parse_confidence(v);
        else if (key == "final_argmax") c.final_argmax = parse_final_argmax(v);
        else throw Error(ErrorKind::config, "unknown key " + name);
      } else if (section == "run") {
        if (key == "n_samples") c.n_samples = parse_scalar<int>(name, v);
        else if (key == "n_seeds") c.n_seeds = parse_scalar<int>(name, v);
        else if (key == "tune_samples") c.tune_samples = parse_scalar<int>(name, v);
        else if (key == "tune_seeds") c.tune_seeds = parse_scalar<int>(name, v);
        else if (key == "seed") c.seed = parse_scalar<std::uint64_t>(name, v);
        else if (key == "jobs") c.jobs = parse_scalar<int>(name, v);
        else if (key == "timing") c.record_timing = parse_bool(name, v);
        else throw Error(ErrorKind::config, "unknown key " + name);
      } else if (section == "sampler") {
        auto& s = c.sampler;
        if (key == "predictor") s.predictor = parse_predictor(v);
        else if (key == "P") s.predictor_steps = parse_scalar<int>(name, v);
        else if (key == "corrector") s.corrector = parse_corrector(v);
        else if (key == "C") s.corrector_steps = parse_scalar<int>(name, v);
        else if (key == "k") s.k = parse_scalar<int>(name, v);
        else if (key == "tau") s.tau = parse_scalar<double>(name, v);
        else if (key == "confidence") s.confidence = parse_confidence(v);
        else if (key == "t_c") s.t_c = parse_scalar<double>(name, v);
        else if (key == "t_min") { s.t_min = parse_scalar<double>(name, v); sampler_t_min_set = true; }
        else if (key == "h_c") s.h_c = parse_scalar<double>(name, v);
        else if (key == "final_argmax") s.final_argmax = parse_final_argmax(v);
        else if (key == "trace") s.record_trace = parse_bool(name, v);
        else throw Error(ErrorKind::config, "unknown key " + name);
      } else if (section == "denoiser") {
        if (key == "kind") c.denoiser = v;
        else if (key == "layers") c.hollow.layers = parse_scalar<int>(name, v);
        else if (key == "mix_every") c.hollow.mix_every = parse_scalar<int>(name, v);
        else if (key == "embed") c.hollow.embed = parse_scalar<int>(name, v);
        else if (key == "heads") c.hollow.heads = parse_scalar<int>(name, v);
        else if (key == "seed") c.hollow_seed = parse_scalar<std::uint64_t>(name, v);
        else throw Error(ErrorKind::config, "unknown key " + name);
      } else if (section == "output") {
        if (key == "dir") c.out_dir = v;
        else throw Error(ErrorKind::config, "unknown key " + name);
      } else {
        throw Error(ErrorKind::config, "unknown section [" + section + "]");
      }
    }
  }
  if (!sampler_t_min_set) c.sampler.t_min = c.t_min;
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::config, "cannot open config " + path.string());
  return parse_experiment_config(is);
}

std::unique_ptr<Denoiser> make_denoiser(const ExperimentConfig& config) {
  if (config.denoiser == "hollow") {
    HollowDims dims = config.hollow;
    dims.vocab = config.vocab;
    dims.max_len = config.length;
    return std::make_unique<HollowDenoiser>(init_hollow(config.hollow_seed, dims));
  }
  return std::make_unique<OracleDenoiser>(config.chain());
}

// ---- grid ----

std::string GridCell::sampler_label() const { return to_string(predictor) + "+" + to_string(corrector); }

std::string GridCell::key() const {
  std::ostringstream os;
  os << sampler_label() << "|nfe=" << nfe;
  if (corrector == CorrectorKind::informed) os << "|k=" << k << "|tau=" << fmt_double(tau);
  if (corrector == CorrectorKind::forward_backward) os << "|h_c=" << fmt_double(h_c);
  return os.str();
}

SamplerConfig GridCell::resolve(const ExperimentConfig& config) const {
  SamplerConfig s;
  s.predictor = predictor;
  s.corrector = corrector;
  s.confidence = config.confidence;
  s.final_argmax = config.final_argmax;
  s.t_min = config.t_min;
  s.record_trace = true;
  const int final_evals = config.final_argmax == FinalArgmaxMode::off ? 0 : 1;
  if (corrector == CorrectorKind::none) {
    s.predictor_steps = nfe - final_evals;
    s.corrector_steps = 0;
    s.t_c = 1.0;
  } else {
    if ((nfe + 1 - final_evals) % 2 != 0)
      throw Error(ErrorKind::config, "NFE budget " + std::to_string(nfe) + " cannot be split evenly for " + key());
    s.predictor_steps = (nfe + 1 - final_evals) / 2;
    s.corrector_steps = 1;
    if (s.predictor_steps < 2) throw Error(ErrorKind::config, "NFE budget too small for a corrector sampler");
    const double dt = (1.0 - config.t_min) / s.predictor_steps;
    s.t_c = 1.0 - 1.5 * dt;
    s.k = corrector == CorrectorKind::informed ? k : 1;
    s.tau = tau;
    s.h_c = h_c;
  }
  if (s.predictor_steps < 1) throw Error(ErrorKind::config, "NFE budget too small for " + key());
  s.validate(config.spec());
  if (s.expected_nfe() != static_cast<std::size_t>(nfe))
    throw Error(ErrorKind::config, "NFE budget could not be matched for " + key());
  return s;
}

std::vector<GridCell> expand_grid(const ExperimentConfig& config) {
  std::vector<GridCell> cells;
  for (int budget : config.nfe) {
    for (PredictorKind p : config.predictors) {
      for (CorrectorKind c : config.correctors) {
        GridCell base{p, c, budget, 0, 0.0, 0.0};
        if (c == CorrectorKind::informed) {
          for (int k : config.k) {
            for (double tau : config.tau) {
              GridCell cell = base;
              cell.k = k;
              cell.tau = tau;
              cells.push_back(cell);
            }
          }
        } else if (c == CorrectorKind::forward_backward) {
          for (double h : config.h_c) {
            GridCell cell = base;
            cell.h_c = h;
            cells.push_back(cell);
          }
        } else {
          cells.push_back(base);
        }
      }
    }
  }
  for (const auto& cell : cells) (void)cell.resolve(config);
  return cells;
}

// ---- runs ----

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

CellRun run_cell(const ExperimentConfig& config, const GridCell& cell, int seed_index, SeedStream stream,
                 const Denoiser& denoiser, int n_samples) {
  const auto start = std::chrono::steady_clock::now();
  const SamplerConfig base = cell.resolve(config);
  const SequenceSpec spec = config.spec();
  const StickyChainModel model = config.chain();
  const MaskingSchedule sched = config.masking();
  const std::uint64_t cell_key = hash_label(cell.key());

  const auto n = static_cast<std::size_t>(n_samples);
  std::vector<SequenceState> samples(n);
  std::vector<std::size_t> illegal(n, 0);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    SamplerConfig sc = base;
    sc.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(stream), cell_key,
                                        static_cast<std::uint64_t>(seed_index), i});
    GenerationReport report = generate(sc, denoiser, spec, sched);
    if (report.nfe != base.expected_nfe() || report.trace.size() != report.nfe)
      throw Error(ErrorKind::contract, "NFE accounting mismatch in " + cell.key());
    if (report.sample.has_mask())
      throw Error(ErrorKind::invalid_input, "sample still masked; enable the final argmax for " + cell.key());
    illegal[i] = count_illegal_transitions(report.sample, model);
    samples[i] = std::move(report.sample);
  });

  CellRun run;
  ResultRow& row = run.row;
  row.sampler = cell.sampler_label();
  row.nfe = base.expected_nfe();
  row.k = cell.k;
  row.tau = cell.tau;
  row.h_c = cell.h_c;
  row.seed = seed_index;
  const double pairs = static_cast<double>(spec.length - 1);
  if (n > 0 && spec.length > 1) {
    double total = 0.0, sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = static_cast<double>(illegal[i]) / pairs;
      total += static_cast<double>(illegal[i]);
      sum += r;
      sum_sq += r * r;
    }
    row.err_mean = total / (pairs * static_cast<double>(n));
    if (n > 1) {
      const double mean = sum / static_cast<double>(n);
      row.err_std = std::sqrt(std::max(0.0, (sum_sq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1)));
    }
  }
  if (config.record_timing)
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  run.samples = std::move(samples);
  return run;
}

std::vector<SummaryRow> summarise(const std::vector<ResultRow>& rows) {
  // Group by cell identity, preserving first-seen order.
  std::vector<SummaryRow> out;
  std::vector<std::vector<double>> groups;
  for (const ResultRow& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SummaryRow& s) {
      return s.sampler == r.sampler && s.nfe == r.nfe && s.k == r.k && s.tau == r.tau && s.h_c == r.h_c;
    });
    if (it == out.end()) {
      out.push_back({r.sampler, r.nfe, r.k, r.tau, r.h_c, 0, 0.0, 0.0, 0.0});
      groups.emplace_back();
      it = out.end() - 1;
    }
    groups[static_cast<std::size_t>(it - out.begin())].push_back(r.err_mean);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& g = groups[i];
    const double n = static_cast<double>(g.size());
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : g) var += (v - mean) * (v - mean);
    out[i].n_seeds = static_cast<int>(g.size());
    out[i].err_mean = mean;
    out[i].err_std = g.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    out[i].err_se = out[i].err_std / std::sqrt(n);
  }
  return out;
}

std::vector<SummaryRow> best_per_sampler(const std::vector<SummaryRow>& summary) {
  std::vector<SummaryRow> best;
  for (const SummaryRow& s : summary) {
    auto it = std::find_if(best.begin(), best.end(),
                           [&](const SummaryRow& b) { return b.sampler == s.sampler && b.nfe == s.nfe; });
    if (it == best.end()) {
      best.push_back(s);
      continue;
    }
    const auto key = [](const SummaryRow& r) { return std::tuple(r.err_mean, r.k, r.tau, r.h_c); };
    if (key(s) < key(*it)) *it = s;
  }
  return best;
}

SweepResult run_sweep(const ExperimentConfig& config, const Denoiser& denoiser, SeedStream stream, int n_seeds,
                      int n_samples, const ProgressFn& progress) {
  SweepResult result;
  for (const GridCell& cell : expand_grid(config)) {
    for (int s = 0; s < n_seeds; ++s) {
      result.rows.push_back(run_cell(config, cell, s, stream, denoiser, n_samples).row);
    }
    if (progress) progress(cell.key());
  }
  result.summary = summarise(result.rows);
  result.best = best_per_sampler(result.summary);
  return result;
}

BenchResult run_bench(const ExperimentConfig& config, const Denoiser& denoiser, const ProgressFn& progress) {
  BenchResult bench;
  bench.tuning = run_sweep(config, denoiser, SeedStream::tune, config.tune_seeds, config.tune_samples, progress);
  for (const SummaryRow& best : bench.tuning.best) {
    GridCell cell;
    // Recover the cell from the grid rather than re-parsing the label.
    for (const GridCell& c : expand_grid(config)) {
      if (c.sampler_label() == best.sampler && static_cast<std::size_t>(c.nfe) == best.nfe && c.k == best.k &&
          c.tau == best.tau && c.h_c == best.h_c) {
        cell = c;
        break;
      }
    }
    for (int s = 0; s < config.n_seeds; ++s)
      bench.rows.push_back(run_cell(config, cell, s, SeedStream::eval, denoiser, config.n_samples).row);
    if (progress) progress("eval " + cell.key());
  }
  bench.summary = summarise(bench.rows);
  return bench;
}

// ---- output ----

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kResultHeader << '\n';
  for (const ResultRow& r : rows) {
    os << r.sampler << ',' << r.nfe << ',' << r.k << ',' << fmt_double(r.tau) << ',' << fmt_double(r.h_c) << ','
       << r.seed << ',' << fmt_double(r.err_mean) << ',' << fmt_double(r.err_std) << ',' << fmt_double(r.wall_ms)
       << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << kSummaryHeader << '\n';
  for (const SummaryRow& r : rows) {
    os << r.sampler << ',' << r.nfe << ',' << r.k << ',' << fmt_double(r.tau) << ',' << fmt_double(r.h_c) << ','
       << r.n_seeds << ',' << fmt_double(r.err_mean) << ',' << fmt_double(r.err_std) << ',' << fmt_double(r.err_se)
       << '\n';
  }
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot write " + path.string());
  return os;
}

}  // namespace

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  auto os = open_output(path);
  write_results_csv(os, rows);
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  auto os = open_output(path);
  write_summary_csv(os, rows);
}

void write_samples_jsonl(std::ostream& os, const std::vector<GenerationReport>& reports, const StickyChainModel& model) {
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    nlohmann::json j;
    j["chain"] = i;
    j["tokens"] = std::vector<Token>(r.sample.tokens().begin(), r.sample.tokens().end());
    j["nfe"] = r.nfe;
    if (r.sample.has_mask()) {
      j["error_rate"] = nullptr;
      j["residual_masks"] = r.residual_masks;
    } else {
      const SequenceState one[] = {r.sample};
      j["error_rate"] = error_rate(one, model);
    }
    os << j.dump() << '\n';
  }
}

void write_traces_jsonl(std::ostream& os, const std::vector<GenerationReport>& reports) {
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (std::size_t e = 0; e < reports[i].trace.size(); ++e) {
      const TraceRecord& rec = reports[i].trace[e];
      nlohmann::json j;
      j["chain"] = i;
      j["eval"] = e;
      j["t"] = rec.t;
      j["action"] = rec.action;
      j["changed"] = rec.changed;
      os << j.dump() << '\n';
    }
  }
}

}  // namespace icdiff
