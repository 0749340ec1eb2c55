#include "icdiff/sequence.hpp"

#include <algorithm>
#include <sstream>

namespace icdiff {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain error";
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::capacity: return "capacity error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::singular: return "singular schedule";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::selection: return "selection error";
    case ErrorKind::contract: return "contract violation";
    case ErrorKind::io: return "I/O error";
  }
  return "error";
}

SequenceSpec::SequenceSpec(int vocab_size, int seq_length) : vocab(vocab_size), length(seq_length) {
  if (vocab < 2) throw Error(ErrorKind::config, "vocabulary size must be >= 2");
  if (length < 1) throw Error(ErrorKind::config, "sequence length must be >= 1");
}

SequenceState::SequenceState(SequenceSpec spec)
    : spec_(spec), tokens_(static_cast<std::size_t>(spec.length), spec.mask()) {}

SequenceState::SequenceState(SequenceSpec spec, std::vector<Token> tokens)
    : spec_(spec), tokens_(std::move(tokens)) {
  if (tokens_.size() != static_cast<std::size_t>(spec_.length)) {
    throw Error(ErrorKind::shape, "token array length does not match sequence length");
  }
  for (Token v : tokens_) {
    if (!spec_.is_valid(v)) throw Error(ErrorKind::invalid_input, "token outside vocabulary");
  }
}

void SequenceState::set(std::size_t d, Token v) {
  if (!spec_.is_valid(v)) throw Error(ErrorKind::invalid_input, "token outside vocabulary");
  tokens_.at(d) = v;
}

bool SequenceState::has_mask() const noexcept {
  return std::find(tokens_.begin(), tokens_.end(), spec_.mask()) != tokens_.end();
}

std::size_t SequenceState::mask_count() const noexcept {
  return static_cast<std::size_t>(std::count(tokens_.begin(), tokens_.end(), spec_.mask()));
}

std::vector<std::size_t> SequenceState::masked_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d < tokens_.size(); ++d)
    if (tokens_[d] == spec_.mask()) out.push_back(d);
  return out;
}

std::vector<std::size_t> SequenceState::unmasked_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d < tokens_.size(); ++d)
    if (tokens_[d] != spec_.mask()) out.push_back(d);
  return out;
}

SequenceState SequenceState::with_masked(std::size_t d) const {
  SequenceState y = *this;
  y.tokens_.at(d) = spec_.mask();
  return y;
}

std::string SequenceState::to_string() const {
  std::ostringstream os;
  for (Token v : tokens_) os << (v == spec_.mask() ? '_' : static_cast<char>('0' + (v % 10)));
  return os.str();
}

std::size_t hamming_distance(const SequenceState& a, const SequenceState& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::shape, "length mismatch");
  std::size_t n = 0;
  for (std::size_t d = 0; d < a.size(); ++d) n += a[d] != b[d];
  return n;
}

}  // namespace icdiff
