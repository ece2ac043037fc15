#include "gapgate/error.hpp"

namespace gapgate {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedCorpus: return "malformed_corpus";
    case ErrorCode::DuplicatePassageId: return "duplicate_passage_id";
    case ErrorCode::EmptyQuery: return "empty_query";
    case ErrorCode::MalformedDataset: return "malformed_dataset";
    case ErrorCode::InvariantViolation: return "invariant_violation";
    case ErrorCode::ProviderError: return "provider_error";
    case ErrorCode::SchemaViolation: return "schema_violation";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::UnknownScriptKey: return "unknown_script_key";
    case ErrorCode::EmptyChecklist: return "empty_checklist";
    case ErrorCode::CoverageGap: return "coverage_gap";
    case ErrorCode::InvalidLabel: return "invalid_label";
    case ErrorCode::IdMismatch: return "id_mismatch";
    case ErrorCode::EmptyResults: return "empty_results";
    case ErrorCode::InvalidConfig: return "invalid_config";
    case ErrorCode::Io: return "io_error";
  }
  return "unknown";
}

}  // namespace gapgate
