#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <filesystem>

#include "icdiff/denoiser.hpp"
#include "icdiff/hollow.hpp"
#include "icdiff/process.hpp"

using namespace icdiff;

namespace {

HollowDims small_dims(int max_len = 16) {
  HollowDims d;
  d.layers = 3;
  d.mix_every = 2;
  d.embed = 8;
  d.heads = 2;
  d.vocab = 3;
  d.max_len = max_len;
  return d;
}

SequenceState random_state(const SequenceSpec& spec, Rng& rng) {
  std::uniform_int_distribution<int> tok(0, spec.vocab);
  std::vector<Token> t(static_cast<std::size_t>(spec.length));
  for (auto& v : t) v = tok(rng);
  return SequenceState(spec, t);
}

bool rows_equal(const DenoiserOutput& a, const DenoiserOutput& b, std::size_t d) {
  return std::ranges::equal(a.row(d), b.row(d));
}

}  // namespace

TEST_CASE("row stochastic check and argmax tie-break") {
  DenoiserOutput out(2, 3);
  out(0, 0) = 0.2, out(0, 1) = 0.5, out(0, 2) = 0.3;
  out(1, 0) = 1.0;
  CHECK(is_row_stochastic(out));
  out(1, 1) = 0.1;
  CHECK_FALSE(is_row_stochastic(out));
  const std::vector<double> tie = {0.4, 0.1, 0.4, 0.1};
  CHECK(argmax_first(tie) == 0);
  const std::vector<double> last = {0.1, 0.2, 0.7};
  CHECK(argmax_first(last) == 2);
}

TEST_CASE("oracle denoiser is hollow and row stochastic") {
  const OracleDenoiser oracle(default_chain());
  CHECK(oracle.is_hollow());
  Rng rng(2);
  const SequenceSpec spec(4, 20);
  for (int trial = 0; trial < 50; ++trial) {
    SequenceState x = sample_chain(oracle.model(), 20, rng);
    for (std::size_t d = 0; d < x.size(); ++d)
      if (bernoulli(rng, 0.5)) x.set(d, spec.mask());
    const DenoiserOutput fx = oracle.evaluate(x, 0.5);
    CHECK(is_row_stochastic(fx));
    const std::size_t d = std::uniform_int_distribution<std::size_t>(0, 19)(rng);
    SequenceState y = x;
    y.set(d, spec.mask());
    CHECK(rows_equal(fx, oracle.evaluate(y, 0.5), d));
  }
}

TEST_CASE("tabular denoiser is keyed by the masked context") {
  const SequenceSpec spec(2, 3);
  Rng rng(4);
  TabularDenoiser den = TabularDenoiser::random(spec, rng);
  CHECK(den.is_hollow());
  const SequenceState x(spec, {0, 1, 1});
  const SequenceState y(spec, {0, 0, 1});
  const SequenceState m(spec, {0, 2, 1});
  const DenoiserOutput fx = den.evaluate(x, 0.3);
  CHECK(is_row_stochastic(fx));
  CHECK(rows_equal(fx, den.evaluate(y, 0.3), 1));
  CHECK(rows_equal(fx, den.evaluate(m, 0.9), 1));

  auto row = den.row(state_index(m), 1);
  row[0] = 0.25;
  row[1] = 0.75;
  CHECK(den.evaluate(x, 0.3)(1, 1) == 0.75);

  const TabularDenoiser uni = TabularDenoiser::uniform(spec);
  const DenoiserOutput fu = uni.evaluate(x, 0.1);
  for (double v : fu.values()) CHECK(v == 0.5);
  CHECK_THROWS_AS(uni.evaluate(SequenceState(SequenceSpec(2, 4)), 0.1), Error);
}

TEST_CASE("counting denoiser counts") {
  const OracleDenoiser oracle(default_chain());
  const CountingDenoiser counter(oracle);
  const SequenceState x(SequenceSpec(4, 5));
  counter.evaluate(x, 0.5);
  counter.evaluate(x, 0.4);
  CHECK(counter.count() == 2);
  CHECK(counter.is_hollow());
}

TEST_CASE("hollow net: output row d ignores x^d") {
  const HollowDims dims = small_dims(16);
  const HollowNetParams params = init_hollow(9, dims);
  const SequenceSpec spec(dims.vocab, 12);
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const SequenceState x = random_state(spec, rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(0, 11)(rng);
    SequenceState y = x;
    y.set(d, static_cast<Token>((x[d] + 1 + trial % dims.vocab) % (dims.vocab + 1)));
    REQUIRE(y[d] != x[d]);
    CHECK(rows_equal(hollow_forward(params, x), hollow_forward(params, y), d));
  }
}

TEST_CASE("hollow net: content streams are causal in opposite directions") {
  const HollowDims dims = small_dims(16);
  const HollowNetParams params = init_hollow(1, dims);
  const SequenceSpec spec(dims.vocab, 10);
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const SequenceState x = random_state(spec, rng);
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, 9)(rng);
    SequenceState y = x;
    y.set(j, static_cast<Token>((x[j] + 1) % (dims.vocab + 1)));
    const ContentStreams a = hollow_content_streams(params, x);
    const ContentStreams b = hollow_content_streams(params, y);
    for (std::size_t d = 0; d < 10; ++d) {
      for (std::size_t e = 0; e < static_cast<std::size_t>(dims.embed); ++e) {
        // F^d sees x^{<d}; B^d sees x^{>d}.
        if (d <= j) CHECK(a.forward(d, e) == b.forward(d, e));
        if (d >= j) CHECK(a.backward(d, e) == b.backward(d, e));
      }
    }
  }
}

TEST_CASE("hollow net: outputs are distributions and depend on the context") {
  const HollowDims dims = small_dims(16);
  const HollowNetParams params = init_hollow(3, dims);
  const SequenceSpec spec(dims.vocab, 8);
  Rng rng(8);
  const SequenceState x = random_state(spec, rng);
  const DenoiserOutput fx = hollow_forward(params, x);
  CHECK(is_row_stochastic(fx, 1e-12));
  SequenceState y = x;
  y.set(0, static_cast<Token>((x[0] + 1) % (dims.vocab + 1)));
  CHECK_FALSE(rows_equal(fx, hollow_forward(params, y), 4));
}

TEST_CASE("hollow net: init is deterministic and parameters round-trip through disk") {
  const HollowDims dims = small_dims(16);
  const HollowNetParams a = init_hollow(42, dims);
  CHECK(a == init_hollow(42, dims));
  CHECK_FALSE(a == init_hollow(43, dims));
  CHECK(a.content.size() == 3);
  CHECK(a.mixing.size() == 2);

  const auto path = std::filesystem::temp_directory_path() / "icdiff_hollow_roundtrip.txt";
  save_hollow(a, path);
  const HollowNetParams b = load_hollow(path);
  CHECK(a == b);
  const SequenceState x(SequenceSpec(dims.vocab, 6), {0, 1, 2, 3, 1, 0});
  CHECK(std::ranges::equal(hollow_forward(a, x).values(), hollow_forward(b, x).values()));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_hollow(path), Error);
}

TEST_CASE("hollow net: shape errors") {
  const HollowNetParams p = init_hollow(0, small_dims(4));
  CHECK_THROWS_AS(hollow_forward(p, SequenceState(SequenceSpec(3, 5))), Error);
  CHECK_THROWS_AS(hollow_forward(p, SequenceState(SequenceSpec(4, 3))), Error);
  HollowDims bad = small_dims();
  bad.heads = 3;
  CHECK_THROWS_AS(init_hollow(0, bad), Error);
}

TEST_CASE("hollow net: D = 128 forward pass under one second") {
  HollowDims dims;  // defaults: L=4, m=2, E=32, H=4, S=4, D_max=128
  const HollowNetParams p = init_hollow(5, dims);
  const SequenceState x(SequenceSpec(4, 128));
  const auto start = std::chrono::steady_clock::now();
  const DenoiserOutput out = hollow_forward(p, x);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(out.length() == 128);
  CHECK(secs < 1.0);
}
