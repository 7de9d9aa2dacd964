// common/error.hpp
//
// Error taxonomy shared by the whole pipeline.  Every failure is one of
// three kinds, and each kind maps onto a stable process exit code so the
// CLI and the C API agree about what went wrong.

#pragma once

#include <stdexcept>
#include <string>

namespace sea {

// Exit codes as seen by callers of the CLI and the C API.
enum class Status : int {
  kOk = 0,
  kValidation = 1,  // bad arguments, malformed inputs, contract violations
  kNumeric = 2,     // NaN/Inf, divergence, failed numeric postconditions
  kIo = 3,          // filesystem and format errors
};

class Error : public std::runtime_error {
 public:
  Error(Status status, const std::string& msg)
      : std::runtime_error(msg), status_(status) {}
  Status status() const { return status_; }

 private:
  Status status_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& msg)
      : Error(Status::kValidation, msg) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& msg)
      : Error(Status::kNumeric, msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(Status::kIo, msg) {}
};

inline void check_arg(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

inline void check_numeric(bool ok, const std::string& msg) {
  if (!ok) throw NumericError(msg);
}

inline void check_io(bool ok, const std::string& msg) {
  if (!ok) throw IoError(msg);
}

}  // namespace sea
