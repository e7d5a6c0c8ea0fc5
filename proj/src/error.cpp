#include "psyosr/error.hpp"

namespace psyosr {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kStructural: return "structural";
    case ErrorKind::kDegenerateBinning: return "degenerate_binning";
    case ErrorKind::kOutOfRange: return "out_of_range";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kCalibration: return "calibration";
    case ErrorKind::kSequencing: return "sequencing";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kExhausted: return "exhausted";
    case ErrorKind::kGeneration: return "generation";
    case ErrorKind::kLookup: return "lookup";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kUndefined: return "undefined";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kManifest: return "manifest";
    case ErrorKind::kSplit: return "split";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kParse: return "parse";
  }
  return "unknown";
}

}  // namespace psyosr
