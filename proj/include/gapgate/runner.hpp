#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gapgate/casefile.hpp"
#include "gapgate/config.hpp"
#include "gapgate/corpus.hpp"
#include "gapgate/evalharness.hpp"
#include "gapgate/pipeline.hpp"

namespace gapgate {

inline constexpr int kExitDetermination = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPartialFailure = 2;
inline constexpr int kExitInconclusive = 10;

// Loaded inputs shared by every command.
struct Workspace {
  RunConfig config;
  Corpus corpus;
  std::optional<Dataset> dataset;
  std::string dataset_hash;  // first 12 hex digits of the dataset file's SHA-256
  std::shared_ptr<Backend> backend;
};

Workspace open_workspace(const RunConfig& config, bool require_dataset);

// "<mode>__<backend>__<dataset hash>"
std::string run_stem(PipelineMode mode, const std::string& backend, const std::string& dataset_hash);

struct EvaluationRun {
  PipelineMode mode = PipelineMode::Full;
  std::vector<PipelineResult> runs;  // dataset order
  std::vector<ScoredResult> results;
  MetricsReport report;
  std::size_t aborted = 0;
};

// Runs every dataset case with `workers` threads. Results come back in
// dataset order whatever the scheduling.
EvaluationRun evaluate_dataset(const Workspace& ws, PipelineMode mode, std::size_t workers);

struct EvaluationFiles {
  std::filesystem::path results;
  std::filesystem::path report_json;
  std::filesystem::path report_markdown;
  std::filesystem::path report_csv;
  std::filesystem::path trace_dir;
};

EvaluationFiles write_evaluation(const Workspace& ws, const EvaluationRun& run);

struct AdjudicateRequest {
  std::optional<std::string> case_id;
  std::optional<std::string> narrative;
  QuestionType question_type = QuestionType::EligibilityDetermination;
};

int cli_adjudicate(const RunConfig& config, const AdjudicateRequest& request, std::ostream& out,
                   std::ostream& err);
int cli_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cli_ablate(const RunConfig& config, std::ostream& out, std::ostream& err);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace gapgate
