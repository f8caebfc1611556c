#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xview {

enum class ErrorCode {
  kNonPositiveDepth,
  kUnknownPathKind,
  kObjectNotVisible,
  kInvalidOrder,
  kEmptyKeys,
  kUnsortedKeys,
  kKeyOutOfRange,
  kShapeMismatch,
  kNonFiniteValue,
  kNotScalarLoss,
  kConfigMismatch,
  kUnknownStream,
  kEmptyDataset,
  kDepthLookupOutOfRange,
  kLengthMismatch,
  kTooFewScenes,
  kInvalidArgument,
  kIo,
  kFormat,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& what);

}  // namespace xview
