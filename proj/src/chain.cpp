#include "icdiff/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace icdiff {

double max_abs_diff(const PosteriorTable& a, const PosteriorTable& b) {
  if (a.length_ != b.length_ || a.vocab_ != b.vocab_) throw Error(ErrorKind::shape, "posterior shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.values_.size(); ++i) {
    const double diff = std::abs(a.values_[i] - b.values_[i]);
    if (std::isnan(diff)) return std::numeric_limits<double>::infinity();
    m = std::max(m, diff);
  }
  return m;
}

StickyChainModel::StickyChainModel(int vocab, double stickiness) : vocab_(vocab), p_(stickiness) {
  if (vocab < 2) throw Error(ErrorKind::config, "vocabulary size must be >= 2");
  if (!(stickiness >= 0.0 && stickiness <= 1.0)) throw Error(ErrorKind::config, "stickiness must lie in [0, 1]");
  const auto s = static_cast<std::size_t>(vocab);
  a_.assign(s * s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    a_[i * s + i] = p_;
    a_[i * s + (i + 1) % s] = 1.0 - p_;
  }
}

StickyChainModel default_chain() { return StickyChainModel(4, 0.9); }

double StickyChainModel::sequence_probability(std::span<const Token> tokens) const {
  if (tokens.empty()) return 1.0;
  double p = 1.0 / vocab_;
  for (std::size_t d = 1; d < tokens.size() && p != 0.0; ++d) p *= transition(tokens[d - 1], tokens[d]);
  return p;
}

SequenceState sample_chain(const StickyChainModel& model, int length, Rng& rng) {
  const SequenceSpec spec(model.vocab(), length);
  std::vector<Token> tokens(static_cast<std::size_t>(length));
  std::uniform_int_distribution<int> first(0, model.vocab() - 1);
  tokens[0] = first(rng);
  const auto a = model.transition_matrix();
  const auto s = static_cast<std::size_t>(model.vocab());
  for (std::size_t d = 1; d < tokens.size(); ++d) {
    const auto from = static_cast<std::size_t>(tokens[d - 1]);
    tokens[d] = sample_categorical(rng, a.subspan(from * s, s));
  }
  return SequenceState(spec, std::move(tokens));
}

namespace {

// Evidence vector e_d(i): all ones when masked, else the indicator of x^d.
inline double evidence(Token observed, Token mask, int i) {
  return observed == mask || observed == i ? 1.0 : 0.0;
}

// Normalise in place; returns false if the vector is identically zero.
inline bool normalise(std::span<double> v) {
  double z = 0.0;
  for (double x : v) z += x;
  if (!(z > 0.0)) return false;
  for (double& x : v) x /= z;
  return true;
}

}  // namespace

PosteriorTable leave_one_out_posterior(const StickyChainModel& model, const SequenceState& x) {
  const int S = model.vocab();
  if (x.spec().vocab != S) throw Error(ErrorKind::invalid_input, "sequence vocabulary does not match the chain");
  const std::size_t D = x.size();
  const Token mask = x.spec().mask();
  const auto su = static_cast<std::size_t>(S);
  const auto a = model.transition_matrix();

  // fwd[d] = P(x_0^d | e_{<d}), bwd[d] ∝ P(e_{>d} | x_0^d); both rescaled to sum 1.
  std::vector<double> fwd(D * su), bwd(D * su);
  std::vector<double> tmp(su);

  std::fill_n(fwd.begin(), su, 1.0 / S);
  for (std::size_t d = 0; d + 1 < D; ++d) {
    for (int i = 0; i < S; ++i) tmp[static_cast<std::size_t>(i)] = fwd[d * su + static_cast<std::size_t>(i)] * evidence(x[d], mask, i);
    if (!normalise(tmp)) {
      // Observation at d contradicts its left context: restart from it.
      for (int i = 0; i < S; ++i) tmp[static_cast<std::size_t>(i)] = evidence(x[d], mask, i);
      normalise(tmp);
    }
    double* next = fwd.data() + (d + 1) * su;
    for (std::size_t j = 0; j < su; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < su; ++i) acc += tmp[i] * a[i * su + j];
      next[j] = acc;
    }
    normalise({next, su});
  }

  std::fill_n(bwd.begin() + static_cast<std::ptrdiff_t>((D - 1) * su), su, 1.0 / S);
  for (std::size_t d = D - 1; d > 0; --d) {
    for (int j = 0; j < S; ++j) tmp[static_cast<std::size_t>(j)] = bwd[d * su + static_cast<std::size_t>(j)] * evidence(x[d], mask, j);
    if (!normalise(tmp)) {
      for (int j = 0; j < S; ++j) tmp[static_cast<std::size_t>(j)] = evidence(x[d], mask, j);
      normalise(tmp);
    }
    double* prev = bwd.data() + (d - 1) * su;
    for (std::size_t i = 0; i < su; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < su; ++j) acc += a[i * su + j] * tmp[j];
      prev[i] = acc;
    }
    if (!normalise({prev, su})) std::fill_n(prev, su, 1.0 / S);
  }

  PosteriorTable out(D, S);
  for (std::size_t d = 0; d < D; ++d) {
    auto row = out.row(d);
    for (std::size_t i = 0; i < su; ++i) row[i] = fwd[d * su + i] * bwd[d * su + i];
    if (!normalise(row)) {
      // Left and right contexts disagree about x^d: fall back to the left one.
      for (std::size_t i = 0; i < su; ++i) row[i] = fwd[d * su + i];
    }
  }
  return out;
}

PosteriorTable brute_force_posterior(const StickyChainModel& model, const SequenceState& x) {
  const int S = model.vocab();
  if (x.spec().vocab != S) throw Error(ErrorKind::invalid_input, "sequence vocabulary does not match the chain");
  const std::size_t D = x.size();
  std::size_t total = 1;
  for (std::size_t d = 0; d < D; ++d) {
    total *= static_cast<std::size_t>(S);
    if (total > kMaxBruteForceStates) throw Error(ErrorKind::capacity, "S^D exceeds brute-force bound");
  }
  const Token mask = x.spec().mask();

  PosteriorTable out(D, S);
  std::vector<Token> z(D, 0);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t d = D; d-- > 0;) {
      z[d] = static_cast<Token>(c % static_cast<std::size_t>(S));
      c /= static_cast<std::size_t>(S);
    }
    std::size_t mismatches = 0, mismatch_pos = 0;
    for (std::size_t d = 0; d < D; ++d) {
      if (x[d] != mask && x[d] != z[d]) {
        ++mismatches;
        mismatch_pos = d;
      }
    }
    if (mismatches > 1) continue;
    const double p = model.sequence_probability(z);
    if (p == 0.0) continue;
    if (mismatches == 1) {
      // z agrees with x everywhere except d, so it is a completion of x^{\d} only.
      out(mismatch_pos, z[mismatch_pos]) += p;
    } else {
      for (std::size_t d = 0; d < D; ++d) out(d, z[d]) += p;
    }
  }
  for (std::size_t d = 0; d < D; ++d) {
    auto row = out.row(d);
    double zsum = 0.0;
    for (double v : row) zsum += v;
    for (double& v : row) v = zsum > 0.0 ? v / zsum : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

std::size_t count_illegal_transitions(const SequenceState& x, const StickyChainModel& model) {
  if (x.has_mask()) throw Error(ErrorKind::invalid_input, "error rate requires fully unmasked samples");
  std::size_t n = 0;
  for (std::size_t d = 0; d + 1 < x.size(); ++d) n += !model.is_legal(x[d], x[d + 1]);
  return n;
}

double error_rate(std::span<const SequenceState> samples, const StickyChainModel& model) {
  std::size_t illegal = 0, pairs = 0;
  for (const SequenceState& x : samples) {
    illegal += count_illegal_transitions(x, model);
    pairs += x.size() - 1;
  }
  return pairs == 0 ? 0.0 : static_cast<double>(illegal) / static_cast<double>(pairs);
}

}  // namespace icdiff
