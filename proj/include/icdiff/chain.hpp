#pragma once

// Sticky Markov chain data distribution and its exact denoising posterior.

#include <cstddef>
#include <span>
#include <vector>

#include "icdiff/rng.hpp"
#include "icdiff/sequence.hpp"

namespace icdiff {

/// Row-major D x S table of per-position distributions over clean tokens.
class PosteriorTable {
 public:
  PosteriorTable() = default;
  PosteriorTable(std::size_t length, int vocab)
      : length_(length), vocab_(vocab), values_(length * static_cast<std::size_t>(vocab), 0.0) {}

  std::size_t length() const noexcept { return length_; }
  int vocab() const noexcept { return vocab_; }

  std::span<double> row(std::size_t d) {
    return {values_.data() + d * static_cast<std::size_t>(vocab_), static_cast<std::size_t>(vocab_)};
  }
  std::span<const double> row(std::size_t d) const {
    return {values_.data() + d * static_cast<std::size_t>(vocab_), static_cast<std::size_t>(vocab_)};
  }
  double operator()(std::size_t d, int s) const { return values_[d * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(s)]; }
  double& operator()(std::size_t d, int s) { return values_[d * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(s)]; }

  std::span<const double> values() const noexcept { return values_; }

  /// Largest |a - b| over all entries; shapes must match.
  friend double max_abs_diff(const PosteriorTable& a, const PosteriorTable& b);

 private:
  std::size_t length_ = 0;
  int vocab_ = 0;
  std::vector<double> values_;
};

/// A[i][i] = p, A[i][(i+1) mod S] = 1 - p; uniform initial distribution.
class StickyChainModel {
 public:
  StickyChainModel(int vocab, double stickiness);

  int vocab() const noexcept { return vocab_; }
  double stickiness() const noexcept { return p_; }
  double transition(int from, int to) const {
    return a_[static_cast<std::size_t>(from) * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(to)];
  }
  bool is_legal(int from, int to) const { return transition(from, to) > 0.0; }
  /// Row-major S x S.
  std::span<const double> transition_matrix() const noexcept { return a_; }

  /// q_0(x) for a clean sequence.
  double sequence_probability(std::span<const Token> tokens) const;

 private:
  int vocab_;
  double p_;
  std::vector<double> a_;
};

StickyChainModel default_chain();  // S=4, p=0.9

SequenceState sample_chain(const StickyChainModel& model, int length, Rng& rng);

/// values[d] = q(x_0^d | x^{\d}) by one forward and one backward sweep of
/// scaled messages, excluding the evidence at d. If the context on one side
/// has zero probability, the message on that side restarts at the offending
/// observation (only the most recent consistent stretch is conditioned on).
PosteriorTable leave_one_out_posterior(const StickyChainModel& model, const SequenceState& x);

/// Bound on S^D for brute-force enumeration.
inline constexpr std::size_t kMaxBruteForceStates = 1'000'000;

/// Enumerates every clean completion of the observed positions. Rows with a
/// zero-probability context are NaN.
PosteriorTable brute_force_posterior(const StickyChainModel& model, const SequenceState& x);

/// Fraction of adjacent pairs (x^d, x^{d+1}) with A[x^d][x^{d+1}] = 0.
double error_rate(std::span<const SequenceState> samples, const StickyChainModel& model);
/// Number of illegal adjacent pairs in one clean sequence.
std::size_t count_illegal_transitions(const SequenceState& x, const StickyChainModel& model);

}  // namespace icdiff
