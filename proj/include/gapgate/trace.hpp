#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapgate/backend.hpp"
#include "gapgate/corpus.hpp"
#include "gapgate/schemas.hpp"

namespace gapgate {

inline constexpr int kTraceSchemaVersion = 1;

struct GapItem {
  std::string item_id;
  std::string requirement_text;
  std::string needed_information;

  bool operator==(const GapItem&) const = default;
};

struct GapSet {
  std::vector<GapItem> gaps;

  bool empty() const { return gaps.empty(); }
  bool operator==(const GapSet&) const = default;
};

struct Determination {
  std::optional<Label> label;  // absent when a free-text answer names no label
  std::string reasoning;
  std::vector<std::string> cited_passage_ids;
  std::vector<std::string> missing_information;
  std::string trace_id;
};

// One backend call as issued and answered.
struct StageRecord {
  Stage stage = Stage::Planner;
  SchemaId schema = SchemaId::FreeText;
  std::string template_hash;
  std::string system_prompt;
  std::string user_prompt;
  std::vector<AttemptRecord> attempts;
  std::optional<nlohmann::json> parsed;
  std::string raw_text;
  std::int64_t latency_ms = 0;
};

struct AbortInfo {
  std::string stage;
  ErrorCode code = ErrorCode::SchemaViolation;
  std::string message;
  std::string raw_output;
};

// Everything a run did, append-only while the run is in progress. Retrieved
// passages are copied in full so a trace can be replayed without the corpus.
struct PipelineTrace {
  std::string trace_id;
  std::string case_id;
  std::string mode;
  std::string backend;
  std::string narrative;
  QuestionType question_type = QuestionType::EligibilityDetermination;
  std::vector<RetrievalResult> retrieved;
  std::vector<Passage> passages;
  std::optional<PlannerOutput> planner_output;
  std::vector<StageRecord> stages;
  std::optional<Checklist> checklist;
  std::optional<std::vector<Assessment>> assessments;
  std::optional<SupervisorVerdict> verdict;
  std::optional<GapSet> gap_set;
  std::optional<Determination> determination;
  std::optional<AbortInfo> abort;
  std::vector<std::string> notes;
  std::map<std::string, std::int64_t> timing_ms;

  std::size_t backend_calls() const { return stages.size(); }
  const StageRecord* find_stage(Stage stage) const;
};

nlohmann::json to_json(const GapSet& g);
nlohmann::json to_json(const Determination& d);
nlohmann::json to_json(const PipelineTrace& t);

// Drops latency and timing fields so traces can be compared byte for byte.
nlohmann::json strip_timing(nlohmann::json trace_json);

}  // namespace gapgate
