#pragma once

#include <stdexcept>
#include <string>

namespace protohead {

/// Coarse classification of failures. The CLI maps these onto exit codes:
/// I/O and format problems exit 2, everything else exits 1.
enum class ErrorKind {
  kDimension,
  kNumeric,
  kConfig,
  kIndex,
  kValidation,
  kFormat,
  kIo,
  kProjection,
  kConsistency,
  kUndefinedConfidence,
  kDiagnostic,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_kind_name(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace protohead
