#pragma once

#include <stdexcept>
#include <string>

namespace geosynth {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorCode {
  kUsage,       // bad flags, bad config, unknown names
  kSchema,      // CSV header or schema disagreement
  kData,        // rows that cannot be used (empty, out of bounds, ...)
  kShape,       // matrix dimension mismatch
  kStaleTape,   // backward on a tape recorded before a parameter update
  kNumeric,     // non-finite loss or activations
  kTooFewSamples,
  kConfig,
  kDegenerate,  // zero-area polygons, zero-variance inputs
  kRegionMismatch,
  kNoNeighbors,
  kNoOverlap,
  kDomain,
  kEvaluation,
  kIo,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace geosynth
