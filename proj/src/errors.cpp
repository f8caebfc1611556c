#include "xview/errors.hpp"

namespace xview {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kUnknownPathKind: return "UnknownPathKind";
    case ErrorCode::kObjectNotVisible: return "ObjectNotVisible";
    case ErrorCode::kInvalidOrder: return "InvalidOrder";
    case ErrorCode::kEmptyKeys: return "EmptyKeys";
    case ErrorCode::kUnsortedKeys: return "UnsortedKeys";
    case ErrorCode::kKeyOutOfRange: return "KeyOutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kNotScalarLoss: return "NotScalarLoss";
    case ErrorCode::kConfigMismatch: return "ConfigMismatch";
    case ErrorCode::kUnknownStream: return "UnknownStream";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kDepthLookupOutOfRange: return "DepthLookupOutOfRange";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kTooFewScenes: return "TooFewScenes";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kFormat: return "Format";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace xview
