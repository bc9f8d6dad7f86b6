#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace xtr {

enum class ErrorCode {
  kIo,
  kMalformedHeader,
  kTruncatedPayload,
  kNonFinite,
  kNotNormalized,
  kDimensionMismatch,
  kInvalidArgument,
  kManifest,
  kDuplicateId,
  kEmptyDocument,
  kTokenCountMismatch,
  kNotCandidate,
  kMissingData,
  kUndefined,
};

const char* to_string(ErrorCode code) noexcept;

// Every data-level failure in the library is reported as xtr::Error. `row()`
// carries the offending row (or token) index when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> row = std::nullopt)
      : std::runtime_error(message), code_(code), row_(row) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> row_;
};

}  // namespace xtr
