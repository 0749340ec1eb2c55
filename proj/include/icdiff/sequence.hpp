#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "icdiff/error.hpp"

namespace icdiff {

using Token = std::int32_t;

/// Vocabulary size and sequence length. Clean tokens are 0..S-1, the
/// absorbing mask token is the extra index S.
struct SequenceSpec {
  int vocab = 2;
  int length = 1;

  SequenceSpec() = default;
  SequenceSpec(int vocab_size, int seq_length);

  Token mask() const noexcept { return static_cast<Token>(vocab); }
  bool is_valid(Token v) const noexcept { return v >= 0 && v <= vocab; }

  friend bool operator==(const SequenceSpec&, const SequenceSpec&) = default;
};

/// A length-D token array over {0..S-1} plus MASK.
class SequenceState {
 public:
  SequenceState() = default;
  /// All-mask sequence.
  explicit SequenceState(SequenceSpec spec);
  /// Throws invalid_input if a token is out of range.
  SequenceState(SequenceSpec spec, std::vector<Token> tokens);

  static SequenceState all_masked(SequenceSpec spec) { return SequenceState(spec); }

  const SequenceSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  std::span<const Token> tokens() const noexcept { return tokens_; }

  Token operator[](std::size_t d) const { return tokens_[d]; }
  void set(std::size_t d, Token v);

  bool is_masked(std::size_t d) const { return tokens_[d] == spec_.mask(); }
  bool has_mask() const noexcept;
  std::size_t mask_count() const noexcept;

  /// M(x), ascending.
  std::vector<std::size_t> masked_positions() const;
  /// Complement of M(x), ascending.
  std::vector<std::size_t> unmasked_positions() const;

  /// The mask operator M^d: a copy with only position d set to MASK.
  SequenceState with_masked(std::size_t d) const;

  std::string to_string() const;

  friend bool operator==(const SequenceState& a, const SequenceState& b) {
    return a.spec_ == b.spec_ && a.tokens_ == b.tokens_;
  }

 private:
  SequenceSpec spec_;
  std::vector<Token> tokens_;
};

std::size_t hamming_distance(const SequenceState& a, const SequenceState& b);

}  // namespace icdiff
