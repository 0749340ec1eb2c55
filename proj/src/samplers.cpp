#include "icdiff/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "icdiff/losses.hpp"

namespace icdiff {

PredictorKind parse_predictor(std::string_view s) {
  if (s == "ancestral") return PredictorKind::ancestral;
  if (s == "tau_leaping") return PredictorKind::tau_leaping;
  if (s == "one_at_a_time") return PredictorKind::one_at_a_time;
  throw Error(ErrorKind::config, "unknown predictor '" + std::string(s) + "'");
}

CorrectorKind parse_corrector(std::string_view s) {
  if (s == "none") return CorrectorKind::none;
  if (s == "forward_backward") return CorrectorKind::forward_backward;
  if (s == "informed") return CorrectorKind::informed;
  throw Error(ErrorKind::config, "unknown corrector '" + std::string(s) + "'");
}

ConfidenceKind parse_confidence(std::string_view s) {
  if (s == "plain") return ConfidenceKind::plain;
  if (s == "margin") return ConfidenceKind::margin;
  throw Error(ErrorKind::config, "unknown confidence variant '" + std::string(s) + "'");
}

FinalArgmaxMode parse_final_argmax(std::string_view s) {
  if (s == "off") return FinalArgmaxMode::off;
  if (s == "masked") return FinalArgmaxMode::masked;
  if (s == "all") return FinalArgmaxMode::all;
  throw Error(ErrorKind::config, "unknown final_argmax mode '" + std::string(s) + "'");
}

std::string to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::ancestral: return "ancestral";
    case PredictorKind::tau_leaping: return "tau_leaping";
    case PredictorKind::one_at_a_time: return "one_at_a_time";
  }
  return "?";
}

std::string to_string(CorrectorKind k) {
  switch (k) {
    case CorrectorKind::none: return "none";
    case CorrectorKind::forward_backward: return "forward_backward";
    case CorrectorKind::informed: return "informed";
  }
  return "?";
}

std::string to_string(ConfidenceKind k) { return k == ConfidenceKind::plain ? "plain" : "margin"; }

std::string to_string(FinalArgmaxMode k) {
  switch (k) {
    case FinalArgmaxMode::off: return "off";
    case FinalArgmaxMode::masked: return "masked";
    case FinalArgmaxMode::all: return "all";
  }
  return "?";
}

void SamplerConfig::validate(const SequenceSpec& spec) const {
  if (predictor_steps < 1) throw Error(ErrorKind::config, "predictor steps P must be >= 1");
  if (corrector_steps < 0) throw Error(ErrorKind::config, "corrector steps C must be >= 0");
  if (k < 1 || k > spec.length) throw Error(ErrorKind::config, "k must lie in [1, D]");
  if (!(t_min > 0.0 && t_min < t_c && t_c <= 1.0)) throw Error(ErrorKind::config, "need 0 < t_min < t_c <= 1");
  if (!(tau >= 0.0)) throw Error(ErrorKind::config, "tau must be >= 0");
  if (!(h_c >= 0.0)) throw Error(ErrorKind::config, "h_c must be >= 0");
}

namespace {

double step_size(const SamplerConfig& c) { return (1.0 - c.t_min) / c.predictor_steps; }

// Time after predictor step `step` (1-based); the last step lands on t_min.
double time_after(const SamplerConfig& c, int step) {
  return step == c.predictor_steps ? c.t_min : 1.0 - step * step_size(c);
}

void check_probs(const DenoiserOutput& probs, const SequenceState& x) {
  if (probs.length() != x.size() || probs.vocab() != x.spec().vocab)
    throw Error(ErrorKind::shape, "denoiser output does not match the sequence");
}

// Unmask every masked position independently with probability p.
StepOutcome unmask_each(const SequenceState& x, double p, const DenoiserOutput& probs, Rng& rng) {
  StepOutcome out{x, {}, false};
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (!x.is_masked(d)) continue;
    if (!bernoulli(rng, p)) continue;
    out.state.set(d, sample_categorical(rng, probs.row(d)));
    out.changed.push_back(d);
  }
  return out;
}

void check_step(double t, double dt) {
  if (!(dt >= 0.0)) throw Error(ErrorKind::domain, "step size must be non-negative");
  if (!(t - dt >= 0.0 && t <= 1.0)) throw Error(ErrorKind::domain, "step must stay within [0, 1]");
}

}  // namespace

StepOutcome ancestral_step(const SequenceState& x, double t, double dt, const DenoiserOutput& probs,
                           const MaskingSchedule& sched, Rng& rng) {
  check_probs(probs, x);
  check_step(t, dt);
  const double a_t = sched.alpha(t);
  const double a_s = sched.alpha(t - dt);
  if (a_t >= 1.0) {
    if (x.has_mask()) throw Error(ErrorKind::singular, "alpha(t) = 1 with masked positions");
    return {x, {}, false};
  }
  const double p = std::clamp((a_s - a_t) / (1.0 - a_t), 0.0, 1.0);
  return unmask_each(x, p, probs, rng);
}

StepOutcome ancestral_step(const SequenceState& x, double t, double dt, const Denoiser& denoiser,
                           const MaskingSchedule& sched, Rng& rng) {
  return ancestral_step(x, t, dt, denoiser.evaluate(x, t), sched, rng);
}

StepOutcome tau_leaping_step(const SequenceState& x, double t, double dt, const DenoiserOutput& probs,
                             const MaskingSchedule& sched, Rng& rng) {
  check_probs(probs, x);
  check_step(t, dt);
  if (dt == 0.0) return {x, {}, false};
  if (sched.alpha(t) >= 1.0) {
    if (x.has_mask()) throw Error(ErrorKind::singular, "alpha(t) = 1 with masked positions");
    return {x, {}, false};
  }
  const double rate = sched.unmask_rate(t);
  return unmask_each(x, -std::expm1(-rate * dt), probs, rng);
}

StepOutcome tau_leaping_step(const SequenceState& x, double t, double dt, const Denoiser& denoiser,
                             const MaskingSchedule& sched, Rng& rng) {
  return tau_leaping_step(x, t, dt, denoiser.evaluate(x, t), sched, rng);
}

StepOutcome one_at_a_time_step(const SequenceState& x, const DenoiserOutput& probs, Rng& rng) {
  check_probs(probs, x);
  const auto masked = x.masked_positions();
  if (masked.empty()) return {x, {}, true};
  std::uniform_int_distribution<std::size_t> pick(0, masked.size() - 1);
  const std::size_t d = masked[pick(rng)];
  StepOutcome out{x, {d}, false};
  out.state.set(d, sample_categorical(rng, probs.row(d)));
  return out;
}

StepOutcome one_at_a_time_step(const SequenceState& x, const Denoiser& denoiser, Rng& rng) {
  if (!x.has_mask()) return {x, {}, true};
  return one_at_a_time_step(x, denoiser.evaluate(x, 0.0), rng);
}

StepOutcome fb_corrector_step(const SequenceState& x, double t, double h, const DenoiserOutput& probs,
                              const MaskingSchedule& sched, Rng& rng) {
  check_probs(probs, x);
  if (!(h >= 0.0)) throw Error(ErrorKind::domain, "corrector step size must be non-negative");
  StepOutcome out{x, {}, false};
  if (h == 0.0) return out;
  const double remask = -std::expm1(-sched.beta(t) * h);
  const double unmask = sched.alpha(t) >= 1.0 ? 0.0 : -std::expm1(-sched.unmask_rate(t) * h);
  const Token mask = x.spec().mask();
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (x.is_masked(d)) {
      if (!bernoulli(rng, unmask)) continue;
      out.state.set(d, sample_categorical(rng, probs.row(d)));
    } else {
      if (!bernoulli(rng, remask)) continue;
      out.state.set(d, mask);
    }
    out.changed.push_back(d);
  }
  return out;
}

StepOutcome fb_corrector_step(const SequenceState& x, double t, double h, const Denoiser& denoiser,
                              const MaskingSchedule& sched, Rng& rng) {
  return fb_corrector_step(x, t, h, denoiser.evaluate(x, t), sched, rng);
}

std::vector<ScoredPosition> confidence_scores(const DenoiserOutput& probs, const SequenceState& x, double t,
                                              const MaskingSchedule& sched, ConfidenceKind variant) {
  check_probs(probs, x);
  const double log_alpha = variant == ConfidenceKind::plain ? std::log(sched.alpha(t)) : 0.0;
  std::vector<ScoredPosition> out;
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (x.is_masked(d)) continue;
    const auto row = probs.row(d);
    const auto cur = static_cast<std::size_t>(x[d]);
    const double log_cur = std::log(std::max(row[cur], kProbFloor));
    if (variant == ConfidenceKind::plain) {
      out.push_back({d, log_alpha + log_cur});
      continue;
    }
    double best_alt = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i)
      if (i != cur) best_alt = std::max(best_alt, row[i]);
    out.push_back({d, log_cur - std::log(std::max(best_alt, kProbFloor))});
  }
  return out;
}

std::vector<std::size_t> gumbel_top_k(std::span<const double> confidences, std::size_t k, double tau, Rng& rng) {
  if (k > confidences.size()) throw Error(ErrorKind::selection, "k exceeds the number of candidates");
  if (!(tau >= 0.0)) throw Error(ErrorKind::domain, "tau must be >= 0");
  std::vector<double> rank(confidences.size());
  for (std::size_t i = 0; i < rank.size(); ++i) {
    // Draw even when tau = 0 so the stream position does not depend on tau.
    const double g = gumbel(rng);
    rank[i] = -confidences[i] + (tau > 0.0 ? tau * g : 0.0);
  }
  std::vector<std::size_t> idx(rank.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return rank[a] > rank[b] || (rank[a] == rank[b] && a < b); });
  idx.resize(k);
  return idx;
}

StepOutcome informed_corrector_step(const SequenceState& x, double t, int k, double tau, ConfidenceKind variant,
                                    const DenoiserOutput& probs, const MaskingSchedule& sched, Rng& rng) {
  if (k < 1) throw Error(ErrorKind::config, "k must be >= 1");
  const auto scored = confidence_scores(probs, x, t, sched, variant);
  if (scored.empty()) return {x, {}, true};
  std::vector<double> c(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) c[i] = scored[i].confidence;
  const std::size_t k_eff = std::min(static_cast<std::size_t>(k), scored.size());
  auto picks = gumbel_top_k(c, k_eff, tau, rng);
  std::sort(picks.begin(), picks.end());

  // All selected rows come from the same evaluation (parallel update).
  StepOutcome out{x, {}, false};
  for (std::size_t i : picks) {
    const std::size_t d = scored[i].position;
    const Token v = sample_categorical(rng, probs.row(d));
    if (v != x[d]) {
      out.state.set(d, v);
      out.changed.push_back(d);
    }
  }
  return out;
}

StepOutcome informed_corrector_step(const SequenceState& x, double t, int k, double tau, ConfidenceKind variant,
                                    const Denoiser& denoiser, const MaskingSchedule& sched, Rng& rng) {
  return informed_corrector_step(x, t, k, tau, variant, denoiser.evaluate(x, t), sched, rng);
}

StepOutcome final_argmax(const SequenceState& x, const DenoiserOutput& probs, FinalArgmaxMode mode) {
  check_probs(probs, x);
  StepOutcome out{x, {}, false};
  if (mode == FinalArgmaxMode::off) return out;
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (mode == FinalArgmaxMode::masked && !x.is_masked(d)) continue;
    const Token v = argmax_first(probs.row(d));
    if (v != x[d]) {
      out.state.set(d, v);
      out.changed.push_back(d);
    }
  }
  return out;
}

StepOutcome final_argmax(const SequenceState& x, const Denoiser& denoiser, double t, FinalArgmaxMode mode) {
  return final_argmax(x, denoiser.evaluate(x, t), mode);
}

std::size_t SamplerConfig::expected_nfe() const {
  std::size_t active = 0;
  if (corrector != CorrectorKind::none) {
    for (int s = 1; s <= predictor_steps; ++s)
      if (time_after(*this, s) <= t_c) ++active;
  }
  return static_cast<std::size_t>(predictor_steps) + active * static_cast<std::size_t>(corrector_steps) +
         (final_argmax != FinalArgmaxMode::off ? 1 : 0);
}

GenerationReport generate(const SamplerConfig& config, const Denoiser& denoiser, const SequenceSpec& spec,
                          const MaskingSchedule& sched) {
  config.validate(spec);
  Rng rng(config.seed);
  GenerationReport report;
  SequenceState x = SequenceState::all_masked(spec);

  auto evaluate = [&](double t) {
    ++report.nfe;
    return denoiser.evaluate(x, t);
  };
  auto record = [&](double t, const char* action, StepOutcome&& step) {
    if (config.record_trace) report.trace.push_back({t, action, std::move(step.changed)});
    x = std::move(step.state);
  };

  const double dt = step_size(config);
  double t = 1.0;
  for (int step = 1; step <= config.predictor_steps; ++step) {
    const double t_next = time_after(config, step);
    const DenoiserOutput probs = evaluate(t);
    switch (config.predictor) {
      case PredictorKind::ancestral:
        record(t, "predictor", ancestral_step(x, t, t - t_next, probs, sched, rng));
        break;
      case PredictorKind::tau_leaping:
        record(t, "predictor", tau_leaping_step(x, t, t - t_next, probs, sched, rng));
        break;
      case PredictorKind::one_at_a_time:
        record(t, "predictor", one_at_a_time_step(x, probs, rng));
        break;
    }
    t = t_next;
    if (config.corrector == CorrectorKind::none || t > config.t_c) continue;
    for (int c = 0; c < config.corrector_steps; ++c) {
      const DenoiserOutput cprobs = evaluate(t);
      if (config.corrector == CorrectorKind::informed) {
        record(t, "corrector",
               informed_corrector_step(x, t, config.k, config.tau, config.confidence, cprobs, sched, rng));
      } else {
        record(t, "corrector", fb_corrector_step(x, t, config.h_c * dt, cprobs, sched, rng));
      }
    }
  }
  if (config.final_argmax != FinalArgmaxMode::off) {
    const DenoiserOutput probs = evaluate(t);
    record(t, "final_argmax", final_argmax(x, probs, config.final_argmax));
  }
  report.residual_masks = x.mask_count();
  report.sample = std::move(x);
  return report;
}

}  // namespace icdiff
