#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gapgate/casefile.hpp"
#include "gapgate/error.hpp"

namespace gapgate {

// Structured outputs the backends must produce, one per pipeline stage. The
// merged ids back the ablation modes that fold several agents into one call.
enum class SchemaId {
  PlannerOutput,
  ChecklistOutput,
  AssessmentOutput,
  SupervisorOutput,
  DeterminationOutput,
  ChecklistAssessmentOutput,
  CombinedReviewOutput,
  FreeText,
};

enum class Stage {
  Planner,
  Extract,
  Verify,
  Supervise,
  ExtractVerify,
  VerifySupervise,
  Combined,
  Decide,
  Baseline,
  Enhanced,
};

std::string_view to_string(SchemaId id);
std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view s);
SchemaId schema_for(Stage stage);

// Raised by the parsers below. The completion loop turns it into a re-prompt
// and, once retries run out, into an Error with the same code.
class ValidationFailure : public std::runtime_error {
 public:
  explicit ValidationFailure(const std::string& message,
                             ErrorCode code = ErrorCode::SchemaViolation)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class ItemCategory { RequiredElement, Consideration, CaseLawRequirement };

struct ChecklistItem {
  std::string item_id;
  ItemCategory category = ItemCategory::RequiredElement;
  std::string text;
  std::string statute_citation;
  std::string case_name;
  std::string principle;

  bool operator==(const ChecklistItem&) const = default;
};

struct Checklist {
  std::vector<ChecklistItem> items;
  std::vector<std::string> source_passage_ids;

  bool operator==(const Checklist&) const = default;
};

enum class AssessmentStatus { Satisfied, Unaddressed };
enum class Criticality { CriticalGap, NotRelevant };

struct Assessment {
  std::string item_id;
  AssessmentStatus status = AssessmentStatus::Unaddressed;
  std::string supporting_quote;
  std::optional<Criticality> criticality;
  std::string rationale;

  bool operator==(const Assessment&) const = default;
};

// Collapsed view of status and criticality, used for override bookkeeping.
enum class AssessmentState { Satisfied, CriticalGap, NotRelevant };
AssessmentState state_of(const Assessment& a);

// A claimant/employer contradiction the verifier noticed; every listed item
// has to come back as a critical gap.
struct ConflictFlag {
  std::vector<std::string> item_ids;
  std::string description;

  bool operator==(const ConflictFlag&) const = default;
};

struct VerificationOutput {
  std::vector<Assessment> assessments;
  std::vector<ConflictFlag> conflicts;
};

struct Override {
  std::string item_id;
  AssessmentState from = AssessmentState::Satisfied;
  AssessmentState to = AssessmentState::CriticalGap;
  std::string reason;
  bool implicit = false;  // inferred from a changed assessment with no stated override

  bool operator==(const Override&) const = default;
};

enum class Recommendation { Proceed, Abstain };

struct SupervisorVerdict {
  std::vector<Assessment> final_assessments;
  std::vector<Override> overrides;
  Recommendation recommendation = Recommendation::Abstain;
  // What the model said, when it differs from the mechanical rule.
  std::optional<Recommendation> model_recommendation;
};

struct StageInstruction {
  Stage stage = Stage::Extract;
  std::string instructions;
};

struct PlannerOutput {
  std::string analysis;
  std::vector<StageInstruction> stage_instructions;

  const StageInstruction* find(Stage stage) const;
};

struct DeterminationOutput {
  Label label = Label::Inconclusive;
  std::string reasoning;
  std::vector<std::string> cited_passage_ids;
};

struct ChecklistAssessmentOutput {
  Checklist checklist;
  VerificationOutput verification;
};

struct CombinedReviewOutput {
  Checklist checklist;
  SupervisorVerdict verdict;
};

std::string_view to_string(ItemCategory c);
std::string_view to_string(AssessmentStatus s);
std::string_view to_string(Criticality c);
std::string_view to_string(AssessmentState s);
std::string_view to_string(Recommendation r);

// Parsers validate structure (types, required fields, enum values, per-item
// invariants, unique ids). Cross-stage checks live in the pipeline.
Checklist parse_checklist(const nlohmann::json& j);
std::vector<Assessment> parse_assessments(const nlohmann::json& j);
VerificationOutput parse_verification(const nlohmann::json& j);
SupervisorVerdict parse_verdict(const nlohmann::json& j);
PlannerOutput parse_planner(const nlohmann::json& j);
DeterminationOutput parse_determination_output(const nlohmann::json& j);
ChecklistAssessmentOutput parse_checklist_assessment(const nlohmann::json& j);
CombinedReviewOutput parse_combined_review(const nlohmann::json& j);

// Dispatches to the parser for `id`; FreeText accepts anything.
void validate_schema(SchemaId id, const nlohmann::json& j);

nlohmann::json to_json(const ChecklistItem& item);
nlohmann::json to_json(const Checklist& checklist);
nlohmann::json to_json(const Assessment& a);
nlohmann::json to_json(const std::vector<Assessment>& as);
nlohmann::json to_json(const VerificationOutput& v);
nlohmann::json to_json(const Override& o);
nlohmann::json to_json(const SupervisorVerdict& v);
nlohmann::json to_json(const PlannerOutput& p);
nlohmann::json to_json(const DeterminationOutput& d);

// Short human-readable description of each schema, embedded in prompts.
std::string_view schema_description(SchemaId id);

}  // namespace gapgate
