#pragma once

// Masked-diffusion ELBO expressions. All values are reported as positive
// negative-ELBO quantities (nats per sequence).
//
//   masked   L_M    = int alpha'/(1-alpha) E[ sum_{d in M(x)}    log p(x_0^d | x) ]        dt
//   unmasked L_Mbar = int alpha'/alpha     E[ sum_{d notin M(x)} log p(x_0^d | M^d(x)) ] dt
//   hd       L_HD   = (L_M + L_Mbar) / 2 on shared draws
//
// The dense evaluator computes the general CTMC objective with explicit sums
// over neighbouring states and the exact q_{t|0}; it agrees with L_Mbar up to
// a theta-independent constant.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>

#include "icdiff/denoiser.hpp"
#include "icdiff/schedule.hpp"

namespace icdiff {

/// Floor applied inside every log.
inline constexpr double kProbFloor = 1e-12;

struct LossEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 for exact evaluation
  std::size_t n_samples = 0;
};

/// t ~ U[t_lo, t_hi], x ~ q_{t|0}(. | x0). The weights alpha'/(1-alpha) and
/// alpha'/alpha blow up at opposite ends, so the range is clipped.
struct MonteCarloMode {
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  double t_lo = 1e-3;
  double t_hi = 1.0 - 1e-3;
};

/// Gauss-Legendre in t, exact enumeration of the 2^D mask patterns. The
/// (1-alpha) and alpha factors of the pattern probabilities are cancelled
/// against the weights analytically, so the integrand is bounded on [0, 1].
struct ExactMode {
  int nodes = 64;  // one of 16, 32, 64, 128
  double t_lo = 0.0;
  double t_hi = 1.0;
};

using LossMode = std::variant<MonteCarloMode, ExactMode>;

/// Bound on mask patterns for exact mode (2^D).
inline constexpr std::size_t kMaxMaskPatterns = 65536;

LossEstimate loss_masked(const Denoiser& denoiser, const SequenceState& x0, const MaskingSchedule& sched,
                         const LossMode& mode);
/// Requires a hollow denoiser (contract error otherwise).
LossEstimate loss_unmasked(const Denoiser& denoiser, const SequenceState& x0, const MaskingSchedule& sched,
                           const LossMode& mode);
LossEstimate loss_hd(const Denoiser& denoiser, const SequenceState& x0, const MaskingSchedule& sched,
                     const LossMode& mode);

/// Dense general-CTMC objective (without its additive constant). D <= 3, S <= 3.
LossEstimate loss_ctmc_dense(const Denoiser& denoiser, const SequenceState& x0, const MaskingSchedule& sched,
                             const ExactMode& quadrature);

/// s_t(M^d(x))_x = alpha/(1-alpha) * p(x^d | M^d(x)); x^d must be unmasked.
double score_from_denoiser(const Denoiser& denoiser, const SequenceState& x, std::size_t d, double t,
                           const MaskingSchedule& sched);

/// Integrate f over [lo, hi] with an n-node Gauss-Legendre rule.
double gauss_legendre(const std::function<double(double)>& f, double lo, double hi, int nodes);

}  // namespace icdiff
