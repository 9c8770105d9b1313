#include "protohead/errors.hpp"

namespace protohead {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIndex: return "index";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kProjection: return "projection";
    case ErrorKind::kConsistency: return "consistency";
    case ErrorKind::kUndefinedConfidence: return "undefined-confidence";
    case ErrorKind::kDiagnostic: return "diagnostic";
  }
  return "unknown";
}

}  // namespace protohead
