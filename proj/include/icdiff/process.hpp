#pragma once

// Absorbing forward process, plus dense CTMC utilities over the full product
// space {0..S-1, MASK}^D. The dense pieces are exact oracles for tiny
// instances ((S+1)^D <= 4096) and are not meant for sampling.

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "icdiff/rng.hpp"
#include "icdiff/schedule.hpp"
#include "icdiff/sequence.hpp"

namespace icdiff {

/// Each position keeps its token with probability alpha(t), else becomes MASK.
SequenceState forward_sample(const SequenceState& x0, double t, const MaskingSchedule& sched, Rng& rng);

/// q_{t|0}(x_t^d | x_0^d) for one coordinate.
double forward_kernel(Token xt, Token x0, Token mask, double alpha);

/// (S+1)x(S+1) base rate: x -> MASK at rate 1 for x != MASK; MASK row zero.
Eigen::MatrixXd absorbing_rate_base(int vocab);

/// Upper bound on (S+1)^D for the dense oracles.
inline constexpr std::size_t kMaxDenseStates = 4096;

/// Flattened index of a state in base (S+1), position 0 most significant.
std::size_t state_index(const SequenceState& x);
SequenceState state_from_index(const SequenceSpec& spec, std::size_t index);
/// (S+1)^D; throws capacity error above kMaxDenseStates.
std::size_t dense_state_count(const SequenceSpec& spec);

struct DenseRateMatrix {
  SequenceSpec spec;
  Eigen::MatrixXd entries;

  std::size_t n_states() const { return static_cast<std::size_t>(entries.rows()); }
  /// Off-diagonals non-negative and rows summing to zero within tol.
  bool is_valid(double tol = 1e-10) const;
};

/// R_t(x,y) = beta(t) sum_d R_b(x^d,y^d) 1{x^{\d} = y^{\d}}.
DenseRateMatrix joint_rate_dense(const SequenceSpec& spec, double t, const MaskingSchedule& sched);
/// Same with beta = 1; the time dependence is a scalar factor.
DenseRateMatrix joint_rate_base(const SequenceSpec& spec);

/// exp( (int_{t0}^{t1} beta) * R_base ) for a unit-beta rate matrix.
Eigen::MatrixXd transition_probs_expm(const DenseRateMatrix& base_rate, double t0, double t1,
                                      const MaskingSchedule& sched);

/// Exact q_t over the dense state space, given q_0 over the same space.
Eigen::VectorXd exact_marginals(const SequenceSpec& spec, const Eigen::VectorXd& q0, double t,
                                const MaskingSchedule& sched);

/// Marginals below this threshold are treated as unreachable.
inline constexpr double kZeroMarginal = 1e-300;

/// Time reversal R~_t(y,x) = R_t(x,y) q_t(x)/q_t(y); rows re-normalised.
DenseRateMatrix backward_rate_dense(const SequenceSpec& spec, double t, const MaskingSchedule& sched,
                                    const Eigen::VectorXd& marginals);

/// R^c_t = R_t + R~_t, which leaves q_t stationary.
DenseRateMatrix corrector_rate_dense(const SequenceSpec& spec, double t, const MaskingSchedule& sched,
                                     const Eigen::VectorXd& marginals);

}  // namespace icdiff
