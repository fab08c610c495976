#pragma once

#include <stdexcept>
#include <string>

namespace ddm {

enum class ErrorCode {
  InvalidVertex,
  InvalidParameter,
  Capacity,
  Parse,
  NoPath,
  NotApplicable,
  InvalidAction,
  DatabaseIntegrity,
  ResourceBudget,
  Stall,
  Validation,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidVertex: return "invalid-vertex";
    case ErrorCode::InvalidParameter: return "invalid-parameter";
    case ErrorCode::Capacity: return "capacity";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::NoPath: return "no-path";
    case ErrorCode::NotApplicable: return "not-applicable";
    case ErrorCode::InvalidAction: return "invalid-action";
    case ErrorCode::DatabaseIntegrity: return "database-integrity";
    case ErrorCode::ResourceBudget: return "resource-budget";
    case ErrorCode::Stall: return "stall";
    case ErrorCode::Validation: return "validation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace ddm
