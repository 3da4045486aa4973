#include "flowsync/error.hpp"

namespace flowsync {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kGeometry: return "geometry";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace flowsync
