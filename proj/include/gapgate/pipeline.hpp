#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gapgate/backend.hpp"
#include "gapgate/casefile.hpp"
#include "gapgate/corpus.hpp"
#include "gapgate/prompts.hpp"
#include "gapgate/schemas.hpp"
#include "gapgate/trace.hpp"

namespace gapgate {

enum class PipelineMode {
  Full,             // planner, requirements, verification, supervision, decision
  NoExtractor,      // requirements and verification merged
  NoSupervisor,     // verification and supervision merged
  SingleAgent,      // all three agents merged
  StaticPrompting,  // Full with fixed templates instead of the planner
  Baseline,         // one free-text call with the standard prompt
  Enhanced,         // one free-text call with the adjudication-instruction prompt
};

std::string_view to_string(PipelineMode mode);
std::optional<PipelineMode> parse_mode(std::string_view s);
const std::vector<PipelineMode>& all_modes();

bool uses_planner(PipelineMode mode);
bool is_single_pass(PipelineMode mode);

// Stages after the planner, in execution order. Gated modes end with Decide.
std::vector<Stage> stage_plan(PipelineMode mode);

// Expected backend calls for a run, given whether the gap set came out empty.
std::size_t expected_backend_calls(PipelineMode mode, bool gap_empty);

inline constexpr std::string_view kNeededInformationPrefix = "Provide facts establishing: ";

struct StagePrompt {
  Stage stage = Stage::Extract;
  std::string system_template;
  std::string user_template;

  std::string hash() const;
};

struct StagePrompts {
  PipelineMode mode = PipelineMode::Full;
  std::vector<StagePrompt> stages;
  std::optional<PlannerOutput> planner_output;

  bool has(Stage stage) const;
  const StagePrompt& at(Stage stage) const;
  // Hash over every stage template; constant across cases in static mode.
  std::string hash() const;
};

// Slot values shared by every stage prompt for one case.
std::string format_passages(std::span<const Passage> passages);
std::string allowed_labels(QuestionType q);
prompts::Slots case_slots(const CaseView& c, std::span<const Passage> passages);

// Issues backend calls for one run and appends them to the trace.
class StageRunner {
 public:
  StageRunner(Backend& backend, PipelineTrace& trace, RequestContext base, int max_parse_retries);

  ChatResponse call(Stage stage, const StagePrompt& prompt, const prompts::Slots& slots,
                    const Validator& validator = {});

  Stage current_stage() const { return current_; }
  PipelineTrace& trace() { return trace_; }

 private:
  Backend& backend_;
  PipelineTrace& trace_;
  RequestContext base_;
  int max_parse_retries_;
  Stage current_ = Stage::Planner;
};

// Semantic checks run inside the re-prompt loop. Each throws
// ValidationFailure on the first problem found.
void check_checklist(const Checklist& checklist, std::span<const Passage> passages);
void check_assessments(const std::vector<Assessment>& assessments, const Checklist& checklist,
                       std::string_view narrative);
void check_conflicts(const std::vector<ConflictFlag>& conflicts,
                     const std::vector<Assessment>& assessments);
void check_overrides(const SupervisorVerdict& verdict, const Checklist& checklist);

// Planner call: tailored instructions for every active stage. Dynamic modes only.
StagePrompts plan_prompts(const CaseView& c, std::span<const Passage> passages, PipelineMode mode,
                          StageRunner& runner);

// Fixed templates, identical for every case. Accepts any gated mode so the
// merged-stage layouts can be inspected; the pipeline uses it for StaticPrompting.
StagePrompts static_prompts(PipelineMode mode);

Checklist extract_checklist(const CaseView& c, std::span<const Passage> passages,
                            const StagePrompts& prompts, StageRunner& runner);

VerificationOutput verify_facts(const CaseView& c, const Checklist& checklist,
                                std::span<const Passage> passages, const StagePrompts& prompts,
                                StageRunner& runner);

SupervisorVerdict supervise(const CaseView& c, const Checklist& checklist,
                            const std::vector<Assessment>& assessments,
                            std::span<const Passage> passages, const StagePrompts& prompts,
                            StageRunner& runner);

// Applies the mechanical rules to a model verdict: recommendation recomputed
// from the final assessments, unexplained changes against `prior` recorded as
// implicit overrides.
SupervisorVerdict finalize_verdict(SupervisorVerdict verdict, const std::vector<Assessment>* prior,
                                   std::vector<std::string>& notes);

// Gap set: the checklist items whose final assessment is unaddressed and
// critical. Pure; throws CoverageGap when the assessments do not cover the
// checklist exactly.
GapSet compute_gap(const Checklist& checklist, std::span<const Assessment> final_assessments);

// The gate. A non-empty gap yields Inconclusive without calling the backend;
// otherwise the backend writes the determination.
Determination decide(const CaseView& c, const Checklist& checklist,
                     const SupervisorVerdict& verdict, const GapSet& gap,
                     std::span<const Passage> passages, const StagePrompts& prompts,
                     StageRunner& runner);

// Label named last in a free-text answer, restricted to the labels valid for
// the question type plus "inconclusive".
std::optional<Label> extract_label(std::string_view answer, QuestionType q);

struct PipelineOptions {
  PipelineMode mode = PipelineMode::Full;
  std::size_t retrieval_k = kDefaultRetrievalK;
  int max_parse_retries = 2;
  std::string trace_id;  // derived from case id, mode and narrative when empty
};

struct PipelineResult {
  std::optional<Determination> determination;  // absent when the run aborted
  PipelineTrace trace;
};

std::string default_trace_id(const CaseView& c, PipelineMode mode);

PipelineResult run_pipeline(const CaseView& c, const Corpus& corpus, const PipelineOptions& options,
                            Backend& backend);

}  // namespace gapgate
