#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "icdiff/chain.hpp"
#include "icdiff/rng.hpp"
#include "icdiff/sequence.hpp"

namespace icdiff {

/// D x S row-stochastic matrix; row d approximates p(x_0^d = . | M^d(x)).
/// Support is the S clean tokens only.
using DenoiserOutput = PosteriorTable;

/// True when every row is non-negative and sums to 1 within tol.
bool is_row_stochastic(const DenoiserOutput& out, double tol = 1e-9);

/// Lowest index among the maximal entries.
int argmax_first(std::span<const double> row);

/// Shared interface of predictor and corrector denoisers. `t` is part of the
/// contract, but the provided implementations do not depend on it: for the
/// absorbing process the exact posterior given the mask pattern is
/// time-independent.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual DenoiserOutput evaluate(const SequenceState& x, double t) const = 0;

  /// Row d never depends on x^d.
  virtual bool is_hollow() const noexcept { return false; }
};

/// Exact leave-one-out posterior of the sticky chain.
class OracleDenoiser final : public Denoiser {
 public:
  explicit OracleDenoiser(StickyChainModel model) : model_(std::move(model)) {}

  DenoiserOutput evaluate(const SequenceState& x, double t) const override;
  bool is_hollow() const noexcept override { return true; }

  const StickyChainModel& model() const noexcept { return model_; }

 private:
  StickyChainModel model_;
};

/// Lookup table keyed by M^d(x): row d of evaluate(x) is table[M^d(x)][d].
/// Hollow by construction. Intended for tiny (S+1)^D.
class TabularDenoiser final : public Denoiser {
 public:
  /// Uniform rows everywhere.
  static TabularDenoiser uniform(const SequenceSpec& spec);
  /// Rows drawn from a symmetric Dirichlet(concentration).
  static TabularDenoiser random(const SequenceSpec& spec, Rng& rng, double concentration = 1.0);

  DenoiserOutput evaluate(const SequenceState& x, double t) const override;
  bool is_hollow() const noexcept override { return true; }

  /// Mutable row for state index `state` (in dense indexing) and position d.
  std::span<double> row(std::size_t state, std::size_t d);

 private:
  explicit TabularDenoiser(const SequenceSpec& spec);

  SequenceSpec spec_;
  std::size_t n_states_;
  std::vector<double> table_;  // [state][d][s]
};

/// Counts evaluations and forwards to another denoiser.
class CountingDenoiser final : public Denoiser {
 public:
  explicit CountingDenoiser(const Denoiser& inner) : inner_(inner) {}

  DenoiserOutput evaluate(const SequenceState& x, double t) const override {
    ++count_;
    return inner_.evaluate(x, t);
  }
  bool is_hollow() const noexcept override { return inner_.is_hollow(); }

  std::size_t count() const noexcept { return count_; }

 private:
  const Denoiser& inner_;
  mutable std::size_t count_ = 0;
};

}  // namespace icdiff
