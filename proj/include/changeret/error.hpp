#pragma once

#include <stdexcept>
#include <string>

namespace changeret {

enum class Errc {
  kParse,
  kEmptyCloud,
  kIo,
  kPrecondition,
  kDegenerate,
  kMismatch,
  kOutOfRange,
  kDuplicateId,
  kInsufficientData,
  kConfig,
};

const char* to_string(Errc code);

/// Data error raised by every module. The CLI maps these to exit status 2.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace changeret
