#pragma once

#include <stdexcept>
#include <string>

namespace taskforge {

// All library failures carry a stable machine-readable code alongside the
// human-readable message. Codes in use include: TypeMismatch, ShapeMismatch,
// DimMismatch, CycleError, LinearityError, UnknownFn, UnknownParamSpace,
// UnknownDist, NotApplicable, NonPositiveWeight, StochasticBox, DomainError,
// BadMagic, TruncatedFile, NonFiniteLoss, BadConfig, IoError.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

[[noreturn]] inline void fail(const char* code, const std::string& msg) {
  throw Error(code, msg);
}

} // namespace taskforge
