#include "icdiff/denoiser.hpp"

#include <cmath>

#include "icdiff/process.hpp"

namespace icdiff {

bool is_row_stochastic(const DenoiserOutput& out, double tol) {
  for (std::size_t d = 0; d < out.length(); ++d) {
    double sum = 0.0;
    for (double v : out.row(d)) {
      if (!(v >= 0.0)) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

int argmax_first(std::span<const double> row) {
  int best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

DenoiserOutput OracleDenoiser::evaluate(const SequenceState& x, double /*t*/) const {
  return leave_one_out_posterior(model_, x);
}

TabularDenoiser::TabularDenoiser(const SequenceSpec& spec)
    : spec_(spec),
      n_states_(dense_state_count(spec)),
      table_(n_states_ * static_cast<std::size_t>(spec.length) * static_cast<std::size_t>(spec.vocab), 0.0) {}

TabularDenoiser TabularDenoiser::uniform(const SequenceSpec& spec) {
  TabularDenoiser t(spec);
  for (double& v : t.table_) v = 1.0 / spec.vocab;
  return t;
}

TabularDenoiser TabularDenoiser::random(const SequenceSpec& spec, Rng& rng, double concentration) {
  TabularDenoiser t(spec);
  std::gamma_distribution<double> g(concentration, 1.0);
  const auto S = static_cast<std::size_t>(spec.vocab);
  for (std::size_t base = 0; base < t.table_.size(); base += S) {
    double z = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      // Keep entries away from zero so logs stay finite.
      t.table_[base + s] = g(rng) + 1e-3;
      z += t.table_[base + s];
    }
    for (std::size_t s = 0; s < S; ++s) t.table_[base + s] /= z;
  }
  return t;
}

std::span<double> TabularDenoiser::row(std::size_t state, std::size_t d) {
  const auto S = static_cast<std::size_t>(spec_.vocab);
  const auto D = static_cast<std::size_t>(spec_.length);
  return {table_.data() + (state * D + d) * S, S};
}

DenoiserOutput TabularDenoiser::evaluate(const SequenceState& x, double /*t*/) const {
  if (!(x.spec() == spec_)) throw Error(ErrorKind::shape, "input does not match the table's sequence spec");
  const auto S = static_cast<std::size_t>(spec_.vocab);
  const auto D = static_cast<std::size_t>(spec_.length);
  DenoiserOutput out(D, spec_.vocab);
  for (std::size_t d = 0; d < D; ++d) {
    const std::size_t key = state_index(x.with_masked(d));
    const double* src = table_.data() + (key * D + d) * S;
    std::copy(src, src + S, out.row(d).begin());
  }
  return out;
}

}  // namespace icdiff
