#include "geosynth/error.hpp"

namespace geosynth {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kData: return "data";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kStaleTape: return "stale-tape";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kTooFewSamples: return "too-few-samples";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kRegionMismatch: return "region-mismatch";
    case ErrorCode::kNoNeighbors: return "no-neighbors";
    case ErrorCode::kNoOverlap: return "no-overlap";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kEvaluation: return "evaluation";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace geosynth
