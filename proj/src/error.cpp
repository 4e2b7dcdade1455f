#include "cocoba/error.hpp"

namespace cocoba {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMissingTerm: return "MissingTerm";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kCoverageError: return "CoverageError";
    case ErrorCode::kDegenerateSet: return "DegenerateSet";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kNonPositiveBandwidth: return "NonPositiveBandwidth";
    case ErrorCode::kUndefinedBandwidth: return "UndefinedBandwidth";
    case ErrorCode::kEmptyLabeledPool: return "EmptyLabeledPool";
    case ErrorCode::kEmptyUnlabeledPool: return "EmptyUnlabeledPool";
    case ErrorCode::kNoContention: return "NoContention";
    case ErrorCode::kUnknownId: return "UnknownId";
    case ErrorCode::kAlreadyLabeled: return "AlreadyLabeled";
    case ErrorCode::kIdMismatch: return "IdMismatch";
    case ErrorCode::kInsufficientSeeds: return "InsufficientSeeds";
    case ErrorCode::kOracleMiss: return "OracleMiss";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kStaleQuery: return "StaleQuery";
  }
  return "Unknown";
}

}  // namespace cocoba
