#pragma once

// Predictor and corrector steps for masked diffusion, and the full
// predictor-corrector generation loop.
//
// Every step has two forms: one taking a precomputed DenoiserOutput for the
// current state (pure given the random stream), and one taking a Denoiser that
// evaluates it once and delegates. generate() uses the first form so that
// NFE accounting is done in exactly one place.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icdiff/denoiser.hpp"
#include "icdiff/schedule.hpp"

namespace icdiff {

enum class PredictorKind { ancestral, tau_leaping, one_at_a_time };
enum class CorrectorKind { none, forward_backward, informed };
enum class ConfidenceKind { plain, margin };
/// masked: fill remaining masks only. all: every position takes its row argmax.
enum class FinalArgmaxMode { off, masked, all };

PredictorKind parse_predictor(std::string_view s);
CorrectorKind parse_corrector(std::string_view s);
ConfidenceKind parse_confidence(std::string_view s);
FinalArgmaxMode parse_final_argmax(std::string_view s);
std::string to_string(PredictorKind k);
std::string to_string(CorrectorKind k);
std::string to_string(ConfidenceKind k);
std::string to_string(FinalArgmaxMode k);

struct SamplerConfig {
  PredictorKind predictor = PredictorKind::ancestral;
  int predictor_steps = 8;  // P
  CorrectorKind corrector = CorrectorKind::none;
  int corrector_steps = 1;  // C, per active predictor step
  int k = 1;                // parallel informed updates
  double tau = 1.0;         // Gumbel temperature
  ConfidenceKind confidence = ConfidenceKind::margin;
  double t_c = 0.9;         // correctors run after predictor steps landing at t <= t_c
  double t_min = 1e-3;
  /// Forward-backward corrector step, as a multiple of the predictor step size.
  double h_c = 1.0;
  FinalArgmaxMode final_argmax = FinalArgmaxMode::masked;
  std::uint64_t seed = 0;
  bool record_trace = true;

  /// Throws config error when violated: P >= 1, C >= 0, 1 <= k <= D,
  /// 0 < t_min < t_c <= 1, tau >= 0, h_c >= 0.
  void validate(const SequenceSpec& spec) const;
  /// NFE that generate() will report for this configuration.
  std::size_t expected_nfe() const;
};

struct StepOutcome {
  SequenceState state;
  std::vector<std::size_t> changed;  // positions whose token changed
  bool noop = false;                 // nothing to act on
};

// ---- predictors ----

/// Each masked position unmasks with probability
/// (alpha(t-dt) - alpha(t)) / (1 - alpha(t)), drawing from its row.
StepOutcome ancestral_step(const SequenceState& x, double t, double dt, const DenoiserOutput& probs,
                           const MaskingSchedule& sched, Rng& rng);
StepOutcome ancestral_step(const SequenceState& x, double t, double dt, const Denoiser& denoiser,
                           const MaskingSchedule& sched, Rng& rng);

/// Each masked position fires with probability 1 - exp(-lambda dt), where
/// lambda = -alpha'(t)/(1 - alpha(t)) is held fixed over the step. A position
/// fires at most once.
StepOutcome tau_leaping_step(const SequenceState& x, double t, double dt, const DenoiserOutput& probs,
                             const MaskingSchedule& sched, Rng& rng);
StepOutcome tau_leaping_step(const SequenceState& x, double t, double dt, const Denoiser& denoiser,
                             const MaskingSchedule& sched, Rng& rng);

/// Unmasks one uniformly chosen masked position. noop if none is masked.
StepOutcome one_at_a_time_step(const SequenceState& x, const DenoiserOutput& probs, Rng& rng);
StepOutcome one_at_a_time_step(const SequenceState& x, const Denoiser& denoiser, Rng& rng);

// ---- correctors ----

/// Tau-leap of the forward+backward rate for duration h: unmasked positions
/// re-mask with probability 1 - exp(-beta(t) h), masked positions unmask
/// with probability 1 - exp(-alpha'/(alpha-1) h) from their rows.
StepOutcome fb_corrector_step(const SequenceState& x, double t, double h, const DenoiserOutput& probs,
                              const MaskingSchedule& sched, Rng& rng);
StepOutcome fb_corrector_step(const SequenceState& x, double t, double h, const Denoiser& denoiser,
                              const MaskingSchedule& sched, Rng& rng);

struct ScoredPosition {
  std::size_t position;
  double confidence;
};

/// Confidence of every unmasked position, ascending by position.
///   plain:  log(alpha_t p(x^d | .))
///   margin: log p(x^d | .) - max_{i != x^d} log p(i | .)
/// Probabilities are floored at kProbFloor before taking logs.
std::vector<ScoredPosition> confidence_scores(const DenoiserOutput& probs, const SequenceState& x, double t,
                                              const MaskingSchedule& sched, ConfidenceKind variant);

/// Top-k indices of r_i = -c_i + tau g_i, g_i ~ Gumbel(0,1), in descending
/// order of r. Equivalent to sampling k indices without replacement from
/// softmax(-c/tau). With tau = 0, the k smallest scores (lower index first
/// on ties).
std::vector<std::size_t> gumbel_top_k(std::span<const double> confidences, std::size_t k, double tau, Rng& rng);

/// Scores unmasked positions, selects min(k, |unmasked|) of them with
/// gumbel_top_k and resamples each from its row in parallel. The mask set is
/// never changed. noop when there is no unmasked position.
StepOutcome informed_corrector_step(const SequenceState& x, double t, int k, double tau, ConfidenceKind variant,
                                    const DenoiserOutput& probs, const MaskingSchedule& sched, Rng& rng);
StepOutcome informed_corrector_step(const SequenceState& x, double t, int k, double tau, ConfidenceKind variant,
                                    const Denoiser& denoiser, const MaskingSchedule& sched, Rng& rng);

/// Row argmax (lowest index on ties) at masked positions, or at all positions.
StepOutcome final_argmax(const SequenceState& x, const DenoiserOutput& probs, FinalArgmaxMode mode);
StepOutcome final_argmax(const SequenceState& x, const Denoiser& denoiser, double t, FinalArgmaxMode mode);

// ---- generation ----

struct TraceRecord {
  double t = 0.0;
  std::string action;  // "predictor" | "corrector" | "final_argmax"
  std::vector<std::size_t> changed;
};

struct GenerationReport {
  SequenceState sample;
  std::size_t nfe = 0;
  std::vector<TraceRecord> trace;  // one record per denoiser evaluation
  std::size_t residual_masks = 0;  // masks left when final_argmax is off
};

/// Starts from all-MASK at t = 1 and runs P predictor steps of size
/// (1 - t_min)/P. After each predictor step that lands at t <= t_c, runs C
/// corrector steps. Then applies the final argmax if configured.
/// nfe = P + P_active * C + (final_argmax != off).
GenerationReport generate(const SamplerConfig& config, const Denoiser& denoiser, const SequenceSpec& spec,
                          const MaskingSchedule& sched);

}  // namespace icdiff
