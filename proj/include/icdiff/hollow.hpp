#pragma once

// Toy-scale hollow transformer: two weight-tied causal content streams
// running in opposite directions over inputs shifted by one position, and a
// mixing (query) stream of width 2E that attends to F^{<=d} and B^{>=d}.
// Output row d is a function of x^{\d} only.
//
// Conventions not fixed elsewhere: pre-norm residual blocks, softmax
// attention, GELU feed-forward of width 4x, learned absolute position
// embeddings, and a dedicated PAD embedding row (index S+1) for the slots
// vacated by the one-position offset.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "icdiff/denoiser.hpp"

namespace icdiff {

struct HollowDims {
  int layers = 4;      // L content layers
  int mix_every = 2;   // m: a mixing layer after every m content layers
  int embed = 32;      // E
  int heads = 4;       // H
  int vocab = 4;       // S
  int max_len = 128;   // D_max

  int mixing_layers() const noexcept { return (layers + mix_every - 1) / mix_every; }
  void validate() const;
};

/// Row-major matrix; vectors are stored with rows == 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// One pre-norm transformer block of width w (attention + 4w feed-forward).
struct BlockParams {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, wk, wv, wo;
  Tensor ln2_gain, ln2_bias;
  Tensor ff1, ff1_bias, ff2, ff2_bias;

  friend bool operator==(const BlockParams&, const BlockParams&) = default;
};

struct MixingParams {
  BlockParams block;          // width 2E
  Tensor kv_ln_gain, kv_ln_bias;  // width E, applied to content tokens before projection

  friend bool operator==(const MixingParams&, const MixingParams&) = default;
};

struct HollowNetParams {
  HollowDims dims;
  Tensor token_embed;   // (S+2) x E; row S is MASK, row S+1 is PAD
  Tensor pos_embed;     // D_max x E
  /// Content layers; the forward and backward streams both run these same
  /// objects.
  std::vector<BlockParams> content;
  std::vector<MixingParams> mixing;
  Tensor out_ln_gain, out_ln_bias;  // 2E
  Tensor out_proj;                  // 2E x S
  Tensor out_bias;                  // S

  /// Visits every tensor with a stable dotted name.
  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;

  friend bool operator==(const HollowNetParams& a, const HollowNetParams& b);
};

HollowNetParams init_hollow(std::uint64_t seed, const HollowDims& dims);

/// Final content-stream states (D x E each).
struct ContentStreams {
  Tensor forward;
  Tensor backward;
};

ContentStreams hollow_content_streams(const HollowNetParams& params, const SequenceState& x);
DenoiserOutput hollow_forward(const HollowNetParams& params, const SequenceState& x);

/// Text container: a header line, then per tensor "name rows cols" followed
/// by its values in row-major order, one row per line, printed with 17
/// significant digits.
void save_hollow(const HollowNetParams& params, const std::filesystem::path& path);
HollowNetParams load_hollow(const std::filesystem::path& path);

class HollowDenoiser final : public Denoiser {
 public:
  explicit HollowDenoiser(HollowNetParams params) : params_(std::move(params)) {}

  DenoiserOutput evaluate(const SequenceState& x, double /*t*/) const override {
    return hollow_forward(params_, x);
  }
  bool is_hollow() const noexcept override { return true; }

  const HollowNetParams& params() const noexcept { return params_; }

 private:
  HollowNetParams params_;
};

}  // namespace icdiff
