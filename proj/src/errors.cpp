#include "minsub/errors.hpp"

#include <cstdio>

#include "minsub/types.hpp"

namespace minsub {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::DegenerateMetric: return "DegenerateMetric";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::LeftDomain: return "LeftDomain";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::RadiusTooLarge: return "RadiusTooLarge";
    case ErrorCode::DegenerateElement: return "DegenerateElement";
    case ErrorCode::FrameFailure: return "FrameFailure";
    case ErrorCode::StructureMismatch: return "StructureMismatch";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::DomainEscape: return "DomainEscape";
    case ErrorCode::CollapseDetected: return "CollapseDetected";
    case ErrorCode::SeedOutsideBall: return "SeedOutsideBall";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, std::string(error_code_name(code)) + ": " + message);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_point(const Vec& p) {
  std::string out = "(";
  for (int i = 0; i < p.size(); ++i) {
    if (i) out += ", ";
    out += format_double(p[i]);
  }
  return out + ")";
}

}  // namespace minsub
