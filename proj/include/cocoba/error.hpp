#pragma once

#include <stdexcept>
#include <string>

namespace cocoba {

// Numeric values are mirrored by the C API status codes in cocoba.h.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kMissingTerm = 2,
  kInsufficientData = 3,
  kFormatError = 4,
  kDimMismatch = 5,
  kDuplicateId = 6,
  kCoverageError = 7,
  kDegenerateSet = 8,
  kEmptySet = 9,
  kNonPositiveBandwidth = 10,
  kUndefinedBandwidth = 11,
  kEmptyLabeledPool = 12,
  kEmptyUnlabeledPool = 13,
  kNoContention = 14,
  kUnknownId = 15,
  kAlreadyLabeled = 16,
  kIdMismatch = 17,
  kInsufficientSeeds = 18,
  kOracleMiss = 19,
  kIoError = 20,
  kStaleQuery = 21,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cocoba
