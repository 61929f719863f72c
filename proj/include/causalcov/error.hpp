#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace causalcov {

enum class ErrorKind {
  InvalidInput,
  HorizonTooShort,
  DegenerateDirection,
  SingularDecoupledCovariance,
  InsufficientExcitation,
  BurninUnsatisfied,
  SingularGram,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::HorizonTooShort: return "HorizonTooShort";
    case ErrorKind::DegenerateDirection: return "DegenerateDirection";
    case ErrorKind::SingularDecoupledCovariance: return "SingularDecoupledCovariance";
    case ErrorKind::InsufficientExcitation: return "InsufficientExcitation";
    case ErrorKind::BurninUnsatisfied: return "BurninUnsatisfied";
    case ErrorKind::SingularGram: return "SingularGram";
  }
  return "Unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace causalcov
