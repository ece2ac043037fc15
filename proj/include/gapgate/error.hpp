#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gapgate {

enum class ErrorCode {
  MalformedCorpus,
  DuplicatePassageId,
  EmptyQuery,
  MalformedDataset,
  InvariantViolation,
  ProviderError,
  SchemaViolation,
  Timeout,
  UnknownScriptKey,
  EmptyChecklist,
  CoverageGap,
  InvalidLabel,
  IdMismatch,
  EmptyResults,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library is an Error carrying a stable code.
// `raw_output` holds the last model output for SchemaViolation and friends so
// traces can record exactly what was rejected.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string raw_output = {})
      : std::runtime_error(message), code_(code), raw_output_(std::move(raw_output)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& raw_output() const noexcept { return raw_output_; }

 private:
  ErrorCode code_;
  std::string raw_output_;
};

}  // namespace gapgate
