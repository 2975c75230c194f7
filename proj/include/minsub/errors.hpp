#pragma once

#include <stdexcept>
#include <string>

namespace minsub {

enum class ErrorCode {
  DomainError = 1,
  DegenerateMetric,
  UnknownModel,
  InvalidParams,
  LeftDomain,
  NoConvergence,
  RadiusTooLarge,
  DegenerateElement,
  FrameFailure,
  StructureMismatch,
  SingularJacobian,
  DomainEscape,
  CollapseDetected,
  SeedOutsideBall,
  ConfigError,
  IoError,
  InvalidArgument,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace minsub
