#pragma once

#include <stdexcept>
#include <string>

namespace icdiff {

enum class ErrorKind {
  domain,         // argument outside its mathematical domain
  invalid_input,  // malformed sequence / token
  capacity,       // dense enumeration would exceed a size bound
  shape,          // dimension mismatch
  singular,       // schedule or ratio degenerates (alpha in {0,1})
  config,         // invalid configuration
  selection,      // top-k asks for more candidates than exist
  contract,       // a denoiser does not satisfy a required contract
  io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace icdiff
