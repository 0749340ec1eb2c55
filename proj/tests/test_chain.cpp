#include "doctest.h"

#include <cmath>

#include "icdiff/chain.hpp"

using namespace icdiff;

namespace {

constexpr Token M = 4;  // mask for S = 4

SequenceState seq(std::vector<Token> t, int vocab = 4) {
  const int len = static_cast<int>(t.size());
  return SequenceState(SequenceSpec(vocab, len), std::move(t));
}

}  // namespace

TEST_CASE("sticky transition matrix") {
  const StickyChainModel m(4, 0.9);
  CHECK(m.transition(0, 0) == 0.9);
  CHECK(m.transition(0, 1) == doctest::Approx(0.1));
  CHECK(m.transition(3, 0) == doctest::Approx(0.1));
  CHECK(m.transition(1, 0) == 0.0);
  CHECK_FALSE(m.is_legal(2, 0));
  CHECK_THROWS_AS(StickyChainModel(1, 0.5), Error);
  CHECK_THROWS_AS(StickyChainModel(4, 1.5), Error);
}

TEST_CASE("sequence probability") {
  const StickyChainModel m(4, 0.9);
  const SequenceState x = seq({0, 0, 1});
  CHECK(m.sequence_probability(x.tokens()) == doctest::Approx(0.25 * 0.9 * 0.1));
  CHECK(m.sequence_probability(seq({0, 2}).tokens()) == 0.0);
}

TEST_CASE("sampled chains are legal and sticky") {
  const StickyChainModel m = default_chain();
  Rng rng(11);
  std::size_t stays = 0, pairs = 0;
  for (int i = 0; i < 50; ++i) {
    const SequenceState x = sample_chain(m, 200, rng);
    CHECK(count_illegal_transitions(x, m) == 0);
    for (std::size_t d = 0; d + 1 < x.size(); ++d, ++pairs) stays += x[d] == x[d + 1];
  }
  const double p = 0.9, n = static_cast<double>(pairs);
  CHECK(std::abs(static_cast<double>(stays) - n * p) < 4 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("posterior hand examples") {
  const StickyChainModel m(4, 0.9);
  SUBCASE("same token on both sides") {
    const PosteriorTable post = leave_one_out_posterior(m, seq({0, M, 0}));
    CHECK(post(1, 0) == doctest::Approx(1.0));
    CHECK(post(1, 1) == doctest::Approx(0.0));
  }
  SUBCASE("one increment between neighbours") {
    const PosteriorTable post = leave_one_out_posterior(m, seq({0, M, 1}));
    CHECK(post(1, 0) == doctest::Approx(0.5));
    CHECK(post(1, 1) == doctest::Approx(0.5));
  }
  SUBCASE("own token is excluded") {
    const PosteriorTable a = leave_one_out_posterior(m, seq({0, 1, 1}));
    const PosteriorTable b = leave_one_out_posterior(m, seq({0, 3, 1}));
    for (int s = 0; s < 4; ++s) CHECK(a(1, s) == b(1, s));
    CHECK(a(1, 0) == doctest::Approx(0.5));
  }
  SUBCASE("fully masked is the stationary law") {
    const PosteriorTable post = leave_one_out_posterior(m, seq({M, M, M}));
    for (std::size_t d = 0; d < 3; ++d)
      for (int s = 0; s < 4; ++s) CHECK(post(d, s) == doctest::Approx(0.25));
  }
  SUBCASE("left end sees only the right neighbour") {
    const PosteriorTable post = leave_one_out_posterior(m, seq({M, 2}));
    CHECK(post(0, 2) == doctest::Approx(0.9));
    CHECK(post(0, 1) == doctest::Approx(0.1));
  }
}

TEST_CASE("posterior matches brute force on random instances") {
  Rng rng(5);
  std::uniform_int_distribution<int> vocab(2, 4), length(1, 7);
  std::uniform_real_distribution<double> stick(0.05, 0.95);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const StickyChainModel m(vocab(rng), stick(rng));
    SequenceState x = sample_chain(m, length(rng), rng);
    for (std::size_t d = 0; d < x.size(); ++d)
      if (bernoulli(rng, 0.6)) x.set(d, x.spec().mask());
    worst = std::max(worst, max_abs_diff(leave_one_out_posterior(m, x), brute_force_posterior(m, x)));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("zero-probability contexts") {
  const StickyChainModel m(4, 0.9);
  const SequenceState x = seq({0, M, 3});
  const PosteriorTable brute = brute_force_posterior(m, x);
  CHECK(std::isnan(brute(1, 0)));
  CHECK(std::isinf(max_abs_diff(leave_one_out_posterior(m, x), brute)));
  // The message restart still yields a distribution.
  const PosteriorTable post = leave_one_out_posterior(m, x);
  double total = 0.0;
  for (double v : post.row(1)) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("deterministic chain p = 1") {
  const StickyChainModel m(3, 1.0);
  const PosteriorTable post = leave_one_out_posterior(m, seq({3, 2, 3, 3}, 3));
  CHECK(post(0, 2) == doctest::Approx(1.0));
  CHECK(post(3, 2) == doctest::Approx(1.0));
}

TEST_CASE("error rate") {
  const StickyChainModel m(4, 0.9);
  const std::vector<SequenceState> xs = {seq({0, 1, 3, 3})};
  CHECK(error_rate(xs, m) == doctest::Approx(1.0 / 3.0));
  const std::vector<SequenceState> two = {seq({0, 1, 3, 3}), seq({2, 2, 3, 0})};
  CHECK(error_rate(two, m) == doctest::Approx(1.0 / 6.0));
  const std::vector<SequenceState> masked = {seq({0, M, 1})};
  CHECK_THROWS_AS(error_rate(masked, m), Error);
}

TEST_CASE("brute force enumeration is bounded") {
  const StickyChainModel m(4, 0.9);
  CHECK_THROWS_AS(brute_force_posterior(m, SequenceState::all_masked(SequenceSpec(4, 11))), Error);
}
