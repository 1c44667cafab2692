#pragma once

#include <stdexcept>
#include <string>

namespace sqgrasp {

enum class ErrorCode {
  EmptyCloud,
  DegenerateCloud,
  DegenerateGeometry,
  PoleSingularity,
  NoFeasibleGrasp,
  EmptyCandidates,
  PlacementFailure,
  IoFailure,
  ParseError,
  IdMismatch,
  NoConvergence,
  Usage,
};

const char* to_string(ErrorCode code);

// Every failure in the library is reported through this exception; callers
// switch on code() when they need to map failures to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sqgrasp
