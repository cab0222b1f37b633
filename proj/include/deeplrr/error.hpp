#pragma once

#include <stdexcept>
#include <string>

namespace deeplrr {

enum class ErrorCode {
  kMalformedHeader,
  kDimensionMismatch,
  kNonNumeric,
  kNonFinite,
  kEmptyDimension,
  kIo,
  kInvalidArgument,
  kNumeric,
  kNotFound,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedHeader: return "malformed header";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kNonNumeric: return "non-numeric token";
    case ErrorCode::kNonFinite: return "non-finite entry";
    case ErrorCode::kEmptyDimension: return "empty dimension";
    case ErrorCode::kIo: return "i/o failure";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kNumeric: return "numerical failure";
    case ErrorCode::kNotFound: return "not found";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it to a distinct exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace deeplrr
