#pragma once

#include <stdexcept>
#include <string>

namespace haepo {

enum class ErrorCode {
  InvalidArgument = 1,
  ShapeMismatch = 2,
  NonFinite = 3,
  Config = 4,
  Io = 5,
  Runtime = 6,
};

// Every failure raised by the core library carries one of the codes above so
// the C layer can map it onto a status value without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace haepo
