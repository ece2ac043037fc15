#include "gapgate/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>

#include "gapgate/error.hpp"
#include "gapgate/text.hpp"

namespace gapgate {

using nlohmann::json;

std::string_view to_string(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::Full: return "full";
    case PipelineMode::NoExtractor: return "no-extractor";
    case PipelineMode::NoSupervisor: return "no-supervisor";
    case PipelineMode::SingleAgent: return "single-agent";
    case PipelineMode::StaticPrompting: return "static";
    case PipelineMode::Baseline: return "baseline";
    case PipelineMode::Enhanced: return "enhanced";
  }
  return "full";
}

std::optional<PipelineMode> parse_mode(std::string_view s) {
  for (PipelineMode m : all_modes()) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

const std::vector<PipelineMode>& all_modes() {
  static const std::vector<PipelineMode> kModes = {
      PipelineMode::Full,        PipelineMode::NoExtractor,     PipelineMode::NoSupervisor,
      PipelineMode::SingleAgent, PipelineMode::StaticPrompting, PipelineMode::Baseline,
      PipelineMode::Enhanced};
  return kModes;
}

bool uses_planner(PipelineMode mode) {
  return mode == PipelineMode::Full || mode == PipelineMode::NoExtractor ||
         mode == PipelineMode::NoSupervisor || mode == PipelineMode::SingleAgent;
}

bool is_single_pass(PipelineMode mode) {
  return mode == PipelineMode::Baseline || mode == PipelineMode::Enhanced;
}

std::vector<Stage> stage_plan(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::Full:
    case PipelineMode::StaticPrompting:
      return {Stage::Extract, Stage::Verify, Stage::Supervise, Stage::Decide};
    case PipelineMode::NoExtractor: return {Stage::ExtractVerify, Stage::Supervise, Stage::Decide};
    case PipelineMode::NoSupervisor: return {Stage::Extract, Stage::VerifySupervise, Stage::Decide};
    case PipelineMode::SingleAgent: return {Stage::Combined, Stage::Decide};
    case PipelineMode::Baseline: return {Stage::Baseline};
    case PipelineMode::Enhanced: return {Stage::Enhanced};
  }
  return {};
}

std::size_t expected_backend_calls(PipelineMode mode, bool gap_empty) {
  if (is_single_pass(mode)) return 1;
  std::size_t calls = stage_plan(mode).size() + (uses_planner(mode) ? 1 : 0);
  if (!gap_empty) --calls;  // the decision stage is skipped
  return calls;
}

std::string StagePrompt::hash() const {
  return text::sha256_hex(system_template + '\x1f' + user_template);
}

bool StagePrompts::has(Stage stage) const {
  return std::any_of(stages.begin(), stages.end(),
                     [&](const StagePrompt& p) { return p.stage == stage; });
}

const StagePrompt& StagePrompts::at(Stage stage) const {
  for (const auto& p : stages) {
    if (p.stage == stage) return p;
  }
  throw Error(ErrorCode::InvalidConfig,
              "no prompt for stage '" + std::string(to_string(stage)) + "' in mode '" +
                  std::string(to_string(mode)) + "'");
}

std::string StagePrompts::hash() const {
  std::string all;
  for (const auto& p : stages) all += p.hash();
  return text::sha256_hex(all);
}

std::string format_passages(std::span<const Passage> passages) {
  std::string out;
  for (const auto& p : passages) {
    out += "[" + p.id + "] (" + std::string(to_string(p.kind)) + ") " + p.citation + ": " +
           p.title + "\n" + p.text + "\n\n";
  }
  return out;
}

namespace {

std::string question_type_name(QuestionType q) {
  return q == QuestionType::EligibilityDetermination ? "eligibility determination"
                                                     : "direct question";
}

}  // namespace

std::string allowed_labels(QuestionType q) {
  return q == QuestionType::EligibilityDetermination ? "eligible, ineligible" : "yes, no";
}

prompts::Slots case_slots(const CaseView& c, std::span<const Passage> passages) {
  return {{"question", c.narrative},
          {"question_type", question_type_name(c.question_type)},
          {"passages", format_passages(passages)},
          {"allowed_labels", allowed_labels(c.question_type)}};
}


// ---------------------------------------------------------------------------
// Prompt layout

namespace {

std::string_view role_name(Stage stage) {
  switch (stage) {
    case Stage::Extract: return "requirements checklist";
    case Stage::Verify: return "fact verification";
    case Stage::Supervise: return "supervisory review";
    case Stage::ExtractVerify: return "requirements checklist and fact verification (merged)";
    case Stage::VerifySupervise: return "fact verification and supervisory review (merged)";
    case Stage::Combined:
      return "requirements checklist, fact verification and supervisory review (single agent)";
    case Stage::Decide: return "determination";
    default: return "planner";
  }
}

std::vector<std::string_view> agent_assets(Stage stage) {
  switch (stage) {
    case Stage::Extract: return {"agent_extract"};
    case Stage::Verify: return {"agent_verify"};
    case Stage::Supervise: return {"agent_supervise"};
    case Stage::ExtractVerify: return {"agent_extract", "agent_verify"};
    case Stage::VerifySupervise: return {"agent_verify", "agent_supervise"};
    case Stage::Combined: return {"agent_extract", "agent_verify", "agent_supervise"};
    case Stage::Decide: return {"agent_decide"};
    default: return {};
  }
}

std::vector<SchemaId> component_schemas(Stage stage) {
  switch (stage) {
    case Stage::ExtractVerify: return {SchemaId::ChecklistOutput, SchemaId::AssessmentOutput};
    case Stage::Supervise:
    case Stage::VerifySupervise: return {SchemaId::AssessmentOutput};
    case Stage::Combined:
      return {SchemaId::ChecklistOutput, SchemaId::AssessmentOutput, SchemaId::SupervisorOutput};
    default: return {};
  }
}

bool has_separate_verify(PipelineMode mode) {
  const auto plan = stage_plan(mode);
  return std::find(plan.begin(), plan.end(), Stage::Verify) != plan.end() ||
         std::find(plan.begin(), plan.end(), Stage::ExtractVerify) != plan.end();
}

std::string inputs_for(Stage stage, PipelineMode mode) {
  switch (stage) {
    case Stage::Extract:
    case Stage::ExtractVerify:
    case Stage::Combined: return "the question and the retrieved passages";
    case Stage::Verify:
    case Stage::VerifySupervise:
      return "the question, the retrieved passages, and the checklist from the requirements stage";
    case Stage::Supervise:
      return "the question, the retrieved passages, the checklist, and the assessments from the "
             "fact-verification stage";
    case Stage::Decide:
      return has_separate_verify(mode)
                 ? "the question, the retrieved passages, the checklist, the assessments, and "
                   "the final supervisory verdict"
                 : "the question, the retrieved passages, the checklist, and the final "
                   "supervisory verdict";
    default: return "the question and the retrieved passages";
  }
}

std::string pipeline_overview(PipelineMode mode) {
  std::string out = "Pipeline stages:";
  const auto plan = stage_plan(mode);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    out += "\n" + std::to_string(i + 1) + ". " + std::string(to_string(plan[i])) + ": " +
           std::string(role_name(plan[i]));
  }
  out += "\nThe determination stage runs only when the review leaves no critical gap; "
         "otherwise the case is deferred with the list of missing information.";
  return out;
}

const std::string kQuestionBlock =
    "Question (exact text, do not rephrase):\n\"\"\"\n{{question}}\n\"\"\"\n"
    "Question type: {{question_type}}\n\n"
    "Retrieved passages:\n{{passages}}";

std::string user_template(Stage stage, PipelineMode mode) {
  std::string out = kQuestionBlock;
  const std::string checklist = "\n\nChecklist from the requirements stage (JSON):\n{{checklist}}";
  const std::string assessments =
      "\n\nAssessments from the fact-verification stage (JSON):\n{{assessments}}";
  switch (stage) {
    case Stage::Verify:
    case Stage::VerifySupervise: out += checklist; break;
    case Stage::Supervise: out += checklist + assessments; break;
    case Stage::Decide:
      out += checklist;
      if (has_separate_verify(mode)) out += assessments;
      out += "\n\nFinal verdict of the supervisory review (JSON):\n{{verdict}}"
             "\n\nAllowed labels: {{allowed_labels}}";
      break;
    default: break;
  }
  return out;
}

std::string system_template(Stage stage, PipelineMode mode, std::string_view strategy) {
  const auto plan = stage_plan(mode);
  const auto pos = std::find(plan.begin(), plan.end(), stage) - plan.begin();
  std::string out(prompts::asset("common_rules"));
  out += "\n" + pipeline_overview(mode);
  out += "\n\nYour position: stage " + std::to_string(pos + 1) + " of " +
         std::to_string(plan.size()) + " (" + std::string(role_name(stage)) +
         "). You receive " + inputs_for(stage, mode) + ".\n";
  for (auto name : agent_assets(stage)) out += "\n" + std::string(prompts::asset(name));
  out += "\nStrategy for this case:\n" + std::string(strategy) + "\n";
  out += "\nOutput schema:\n";
  for (SchemaId part : component_schemas(stage)) {
    out += std::string(to_string(part)) + ": " + std::string(schema_description(part)) + "\n";
  }
  out += std::string(schema_description(schema_for(stage))) + "\n";
  return out;
}

StagePrompts build_prompts(PipelineMode mode, const std::map<Stage, std::string>& strategies) {
  StagePrompts out;
  out.mode = mode;
  for (Stage stage : stage_plan(mode)) {
    out.stages.push_back(
        StagePrompt{stage, system_template(stage, mode, strategies.at(stage)), user_template(stage, mode)});
  }
  return out;
}

StagePrompt planner_prompt(PipelineMode mode) {
  std::string system(prompts::asset("planner_system"));
  system += "\n" + pipeline_overview(mode) + "\n\nWrite instructions for these stages (use these names):";
  for (Stage s : stage_plan(mode)) system += " " + std::string(to_string(s));
  system += "\n\nOutput schema:\n" + std::string(schema_description(SchemaId::PlannerOutput)) + "\n";
  return StagePrompt{Stage::Planner, system, kQuestionBlock};
}

StagePrompt single_pass_prompt(PipelineMode mode) {
  const std::string_view asset = mode == PipelineMode::Baseline ? "baseline_system" : "enhanced_system";
  const Stage stage = mode == PipelineMode::Baseline ? Stage::Baseline : Stage::Enhanced;
  return StagePrompt{stage, std::string(prompts::asset(asset)),
                     "Documents:\n{{passages}}\nQuestion:\n{{question}}"};
}

}  // namespace

// ---------------------------------------------------------------------------
// Stage runner

StageRunner::StageRunner(Backend& backend, PipelineTrace& trace, RequestContext base,
                         int max_parse_retries)
    : backend_(backend), trace_(trace), base_(std::move(base)), max_parse_retries_(max_parse_retries) {}

ChatResponse StageRunner::call(Stage stage, const StagePrompt& prompt, const prompts::Slots& slots,
                               const Validator& validator) {
  current_ = stage;
  ChatRequest request;
  request.system_prompt = prompts::render(prompt.system_template, slots);
  request.user_prompt = prompts::render(prompt.user_template, slots);
  request.response_schema = schema_for(stage);
  request.temperature = 0.0;
  request.context = base_;
  request.context.stage = stage;

  StageRecord record;
  record.stage = stage;
  record.schema = request.response_schema;
  record.template_hash = prompt.hash();
  record.system_prompt = request.system_prompt;
  record.user_prompt = request.user_prompt;
  try {
    ChatResponse response = complete(backend_, request, max_parse_retries_, validator);
    record.attempts = response.attempt_log;
    record.parsed = response.parsed;
    record.raw_text = response.raw_text;
    record.latency_ms = response.latency_ms;
    trace_.timing_ms[std::string(to_string(stage))] = response.latency_ms;
    trace_.stages.push_back(std::move(record));
    return response;
  } catch (const CompletionError& e) {
    record.attempts = e.attempts();
    record.raw_text = e.raw_output();
    trace_.stages.push_back(std::move(record));
    throw;
  } catch (const Error& e) {
    record.raw_text = e.raw_output();
    trace_.stages.push_back(std::move(record));
    throw;
  }
}

// ---------------------------------------------------------------------------
// Validators

namespace {

const std::vector<std::string>& status_vocabulary() {
  static const std::vector<std::string> kWords = {"satisfied", "met", "unaddressed", "missing"};
  return kWords;
}

bool quoted_from_passages(const std::string& item_text, std::span<const Passage> passages) {
  return std::any_of(passages.begin(), passages.end(), [&](const Passage& p) {
    return text::contains_normalized(p.text, item_text);
  });
}

std::map<std::string, const Assessment*> by_item(std::span<const Assessment> assessments) {
  std::map<std::string, const Assessment*> out;
  for (const auto& a : assessments) out[a.item_id] = &a;
  return out;
}

}  // namespace

void check_checklist(const Checklist& checklist, std::span<const Passage> passages) {
  std::set<std::string> retrieved;
  for (const auto& p : passages) retrieved.insert(p.id);
  for (const auto& id : checklist.source_passage_ids) {
    if (!retrieved.contains(id)) {
      throw ValidationFailure("checklist cites passage '" + id + "' which was not retrieved");
    }
  }
  for (const auto& item : checklist.items) {
    if (quoted_from_passages(item.text, passages)) continue;
    for (const auto& word : status_vocabulary()) {
      if (text::contains_word(item.text, word)) {
        throw ValidationFailure("checklist item '" + item.item_id + "' contains assessment word '" +
                                word + "'; the checklist must only list requirements");
      }
    }
  }
}

void check_assessments(const std::vector<Assessment>& assessments, const Checklist& checklist,
                       std::string_view narrative) {
  std::set<std::string> expected;
  for (const auto& item : checklist.items) expected.insert(item.item_id);
  std::set<std::string> seen;
  for (const auto& a : assessments) {
    if (!expected.contains(a.item_id)) {
      throw ValidationFailure("assessment for unknown checklist item '" + a.item_id + "'",
                              ErrorCode::CoverageGap);
    }
    seen.insert(a.item_id);
  }
  for (const auto& id : expected) {
    if (!seen.contains(id)) {
      throw ValidationFailure("no assessment for checklist item '" + id + "'", ErrorCode::CoverageGap);
    }
  }
  for (const auto& a : assessments) {
    if (a.status == AssessmentStatus::Satisfied &&
        !text::contains_normalized(narrative, a.supporting_quote)) {
      throw ValidationFailure("supporting_quote for '" + a.item_id +
                              "' does not occur in the question text: \"" + a.supporting_quote + "\"");
    }
  }
}

void check_conflicts(const std::vector<ConflictFlag>& conflicts,
                     const std::vector<Assessment>& assessments) {
  const auto index = by_item(assessments);
  for (const auto& c : conflicts) {
    for (const auto& id : c.item_ids) {
      const auto it = index.find(id);
      if (it == index.end()) {
        throw ValidationFailure("conflict references unknown checklist item '" + id + "'");
      }
      if (state_of(*it->second) != AssessmentState::CriticalGap) {
        throw ValidationFailure("item '" + id +
                                "' is flagged as a conflicting account and must be unaddressed "
                                "with criticality critical_gap");
      }
    }
  }
}

void check_overrides(const SupervisorVerdict& verdict, const Checklist& checklist) {
  const auto index = by_item(verdict.final_assessments);
  for (const auto& o : verdict.overrides) {
    const auto it = index.find(o.item_id);
    if (it == index.end()) {
      throw ValidationFailure("override references unknown checklist item '" + o.item_id + "'");
    }
    if (state_of(*it->second) != o.to) {
      throw ValidationFailure("override for '" + o.item_id + "' says '" +
                              std::string(to_string(o.to)) + "' but the final assessment is '" +
                              std::string(to_string(state_of(*it->second))) + "'");
    }
  }
  (void)checklist;
}

// ---------------------------------------------------------------------------
// Stages

StagePrompts plan_prompts(const CaseView& c, std::span<const Passage> passages, PipelineMode mode,
                          StageRunner& runner) {
  if (!uses_planner(mode)) {
    throw Error(ErrorCode::InvalidConfig,
                "mode '" + std::string(to_string(mode)) + "' does not use the planner");
  }
  const auto plan = stage_plan(mode);
  const StagePrompt prompt = planner_prompt(mode);
  const ChatResponse response =
      runner.call(Stage::Planner, prompt, case_slots(c, passages), [&](const json& j) {
        const PlannerOutput p = parse_planner(j);
        for (Stage s : plan) {
          if (p.find(s) == nullptr) {
            throw ValidationFailure("planner gave no instructions for stage '" +
                                    std::string(to_string(s)) + "'");
          }
        }
      });
  PlannerOutput planner = parse_planner(*response.parsed);
  std::map<Stage, std::string> strategies;
  for (Stage s : plan) strategies[s] = planner.find(s)->instructions;
  StagePrompts out = build_prompts(mode, strategies);
  out.planner_output = std::move(planner);
  return out;
}

StagePrompts static_prompts(PipelineMode mode) {
  if (is_single_pass(mode)) {
    StagePrompts out;
    out.mode = mode;
    out.stages.push_back(single_pass_prompt(mode));
    return out;
  }
  const std::string strategy(prompts::asset("static_strategy"));
  std::map<Stage, std::string> strategies;
  for (Stage s : stage_plan(mode)) strategies[s] = strategy;
  return build_prompts(mode, strategies);
}

namespace {

void require_items(const Checklist& checklist) {
  if (checklist.items.empty()) {
    throw Error(ErrorCode::EmptyChecklist,
                "requirements stage produced no checklist items; retrieval or extraction failed");
  }
}

prompts::Slots with(prompts::Slots slots, std::initializer_list<std::pair<const std::string, std::string>> extra) {
  for (const auto& [k, v] : extra) slots[k] = v;
  return slots;
}

}  // namespace

Checklist extract_checklist(const CaseView& c, std::span<const Passage> passages,
                            const StagePrompts& prompts, StageRunner& runner) {
  if (passages.empty()) {
    throw Error(ErrorCode::EmptyChecklist, "no passages were retrieved for the requirements stage");
  }
  const auto response = runner.call(Stage::Extract, prompts.at(Stage::Extract), case_slots(c, passages),
                                    [&](const json& j) { check_checklist(parse_checklist(j), passages); });
  Checklist checklist = parse_checklist(*response.parsed);
  require_items(checklist);
  return checklist;
}

VerificationOutput verify_facts(const CaseView& c, const Checklist& checklist,
                                std::span<const Passage> passages, const StagePrompts& prompts,
                                StageRunner& runner) {
  require_items(checklist);
  const auto slots = with(case_slots(c, passages), {{"checklist", to_json(checklist).dump(2)}});
  const auto response =
      runner.call(Stage::Verify, prompts.at(Stage::Verify), slots, [&](const json& j) {
        const VerificationOutput v = parse_verification(j);
        check_assessments(v.assessments, checklist, c.narrative);
        check_conflicts(v.conflicts, v.assessments);
      });
  return parse_verification(*response.parsed);
}

SupervisorVerdict finalize_verdict(SupervisorVerdict verdict, const std::vector<Assessment>* prior,
                                   std::vector<std::string>& notes) {
  if (prior != nullptr) {
    const auto before = by_item(*prior);
    for (const auto& a : verdict.final_assessments) {
      const auto it = before.find(a.item_id);
      if (it == before.end()) continue;
      const AssessmentState from = state_of(*it->second);
      const AssessmentState to = state_of(a);
      if (from == to) continue;
      const bool stated = std::any_of(verdict.overrides.begin(), verdict.overrides.end(),
                                      [&](const Override& o) { return o.item_id == a.item_id; });
      if (!stated) {
        verdict.overrides.push_back(
            Override{a.item_id, from, to, "changed in the final assessments without a stated override", true});
        notes.push_back("implicit override recorded for '" + a.item_id + "'");
      }
    }
  }
  const bool critical = std::any_of(
      verdict.final_assessments.begin(), verdict.final_assessments.end(),
      [](const Assessment& a) { return state_of(a) == AssessmentState::CriticalGap; });
  const Recommendation mechanical = critical ? Recommendation::Abstain : Recommendation::Proceed;
  if (verdict.recommendation != mechanical) {
    verdict.model_recommendation = verdict.recommendation;
    notes.push_back("supervisor recommended '" + std::string(to_string(verdict.recommendation)) +
                    "' but the final assessments give '" + std::string(to_string(mechanical)) +
                    "'; the mechanical rule applies");
  }
  verdict.recommendation = mechanical;
  return verdict;
}

SupervisorVerdict supervise(const CaseView& c, const Checklist& checklist,
                            const std::vector<Assessment>& assessments,
                            std::span<const Passage> passages, const StagePrompts& prompts,
                            StageRunner& runner) {
  compute_gap(checklist, assessments);  // coverage precondition
  const auto slots = with(case_slots(c, passages), {{"checklist", to_json(checklist).dump(2)},
                                                    {"assessments", to_json(assessments).dump(2)}});
  const auto response =
      runner.call(Stage::Supervise, prompts.at(Stage::Supervise), slots, [&](const json& j) {
        const SupervisorVerdict v = parse_verdict(j);
        check_assessments(v.final_assessments, checklist, c.narrative);
        check_overrides(v, checklist);
      });
  return finalize_verdict(parse_verdict(*response.parsed), &assessments, runner.trace().notes);
}

GapSet compute_gap(const Checklist& checklist, std::span<const Assessment> final_assessments) {
  const auto index = by_item(final_assessments);
  if (index.size() != final_assessments.size()) {
    throw Error(ErrorCode::CoverageGap, "assessments contain duplicate item ids");
  }
  std::set<std::string> ids;
  for (const auto& item : checklist.items) ids.insert(item.item_id);
  for (const auto& [id, _] : index) {
    if (!ids.contains(id)) throw Error(ErrorCode::CoverageGap, "assessment for unknown item '" + id + "'");
  }
  GapSet gap;
  for (const auto& item : checklist.items) {
    const auto it = index.find(item.item_id);
    if (it == index.end()) {
      throw Error(ErrorCode::CoverageGap, "no assessment for checklist item '" + item.item_id + "'");
    }
    if (state_of(*it->second) == AssessmentState::CriticalGap) {
      gap.gaps.push_back(
          GapItem{item.item_id, item.text, std::string(kNeededInformationPrefix) + item.text});
    }
  }
  return gap;
}

Determination decide(const CaseView& c, const Checklist& checklist,
                     const SupervisorVerdict& verdict, const GapSet& gap,
                     std::span<const Passage> passages, const StagePrompts& prompts,
                     StageRunner& runner) {
  Determination d;
  d.trace_id = runner.trace().trace_id;
  if (!gap.empty()) {
    d.label = Label::Inconclusive;
    std::string ids;
    for (const auto& g : gap.gaps) {
      d.missing_information.push_back(g.needed_information);
      ids += (ids.empty() ? "" : ", ") + g.item_id;
    }
    d.cited_passage_ids = checklist.source_passage_ids;
    d.reasoning = "Determination deferred: " + std::to_string(gap.gaps.size()) +
                  " critical requirement(s) lack support in the stated facts (" + ids + ").";
    return d;
  }

  std::set<std::string> retrieved;
  for (const auto& p : passages) retrieved.insert(p.id);
  auto slots = with(case_slots(c, passages), {{"checklist", to_json(checklist).dump(2)},
                                              {"verdict", to_json(verdict).dump(2)}});
  if (runner.trace().assessments) slots["assessments"] = to_json(*runner.trace().assessments).dump(2);
  const auto response =
      runner.call(Stage::Decide, prompts.at(Stage::Decide), slots, [&](const json& j) {
        const DeterminationOutput out = parse_determination_output(j);
        if (out.label == Label::Inconclusive || !label_compatible(out.label, c.question_type)) {
          throw ValidationFailure("label '" + std::string(to_string(out.label)) +
                                      "' is not allowed here; use one of: " +
                                      allowed_labels(c.question_type),
                                  ErrorCode::InvalidLabel);
        }
        if (out.cited_passage_ids.empty()) {
          throw ValidationFailure("determination must cite at least one passage id");
        }
        for (const auto& id : out.cited_passage_ids) {
          if (!retrieved.contains(id)) {
            throw ValidationFailure("determination cites passage '" + id + "' which was not retrieved");
          }
        }
      });
  const DeterminationOutput out = parse_determination_output(*response.parsed);
  d.label = out.label;
  d.reasoning = out.reasoning;
  d.cited_passage_ids = out.cited_passage_ids;
  return d;
}

std::optional<Label> extract_label(std::string_view answer, QuestionType q) {
  std::vector<Label> candidates{Label::Inconclusive};
  if (q == QuestionType::EligibilityDetermination) {
    candidates.insert(candidates.end(), {Label::Eligible, Label::Ineligible});
  } else {
    candidates.insert(candidates.end(), {Label::Yes, Label::No});
  }
  const std::string lower = text::to_lower_ascii(answer);
  std::optional<Label> found;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    for (Label l : candidates) {
      if (word == to_string(l)) found = l;
    }
    word.clear();
  };
  for (char ch : lower) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      word.push_back(ch);
    } else {
      flush();
    }
  }
  flush();
  return found;
}

// ---------------------------------------------------------------------------
// Orchestration

std::string default_trace_id(const CaseView& c, PipelineMode mode) {
  return c.id + "-" + std::string(to_string(mode)) + "-" + text::sha256_hex(c.narrative).substr(0, 12);
}

namespace {

void run_gated(const CaseView& c, std::span<const Passage> passages, PipelineMode mode,
               StageRunner& runner, PipelineTrace& trace, Determination& out) {
  const StagePrompts prompts =
      uses_planner(mode) ? plan_prompts(c, passages, mode, runner) : static_prompts(mode);
  trace.planner_output = prompts.planner_output;

  Checklist checklist;
  SupervisorVerdict verdict;
  switch (mode) {
    case PipelineMode::Full:
    case PipelineMode::StaticPrompting: {
      checklist = extract_checklist(c, passages, prompts, runner);
      trace.checklist = checklist;
      const VerificationOutput v = verify_facts(c, checklist, passages, prompts, runner);
      trace.assessments = v.assessments;
      verdict = supervise(c, checklist, v.assessments, passages, prompts, runner);
      break;
    }
    case PipelineMode::NoExtractor: {
      const auto response = runner.call(
          Stage::ExtractVerify, prompts.at(Stage::ExtractVerify), case_slots(c, passages),
          [&](const json& j) {
            const ChecklistAssessmentOutput o = parse_checklist_assessment(j);
            check_checklist(o.checklist, passages);
            check_assessments(o.verification.assessments, o.checklist, c.narrative);
            check_conflicts(o.verification.conflicts, o.verification.assessments);
          });
      ChecklistAssessmentOutput merged = parse_checklist_assessment(*response.parsed);
      require_items(merged.checklist);
      checklist = std::move(merged.checklist);
      trace.checklist = checklist;
      trace.assessments = merged.verification.assessments;
      verdict = supervise(c, checklist, merged.verification.assessments, passages, prompts, runner);
      break;
    }
    case PipelineMode::NoSupervisor: {
      checklist = extract_checklist(c, passages, prompts, runner);
      trace.checklist = checklist;
      const auto slots = with(case_slots(c, passages), {{"checklist", to_json(checklist).dump(2)}});
      const auto response = runner.call(
          Stage::VerifySupervise, prompts.at(Stage::VerifySupervise), slots, [&](const json& j) {
            const SupervisorVerdict v = parse_verdict(j);
            check_assessments(v.final_assessments, checklist, c.narrative);
            check_overrides(v, checklist);
          });
      verdict = finalize_verdict(parse_verdict(*response.parsed), nullptr, trace.notes);
      break;
    }
    case PipelineMode::SingleAgent: {
      const auto response = runner.call(
          Stage::Combined, prompts.at(Stage::Combined), case_slots(c, passages), [&](const json& j) {
            const CombinedReviewOutput o = parse_combined_review(j);
            check_checklist(o.checklist, passages);
            check_assessments(o.verdict.final_assessments, o.checklist, c.narrative);
            check_overrides(o.verdict, o.checklist);
          });
      CombinedReviewOutput merged = parse_combined_review(*response.parsed);
      require_items(merged.checklist);
      checklist = std::move(merged.checklist);
      trace.checklist = checklist;
      verdict = finalize_verdict(std::move(merged.verdict), nullptr, trace.notes);
      break;
    }
    default:
      throw Error(ErrorCode::InvalidConfig, "mode is not a gated pipeline mode");
  }
  trace.verdict = verdict;

  const GapSet gap = compute_gap(checklist, verdict.final_assessments);
  trace.gap_set = gap;
  out = decide(c, checklist, verdict, gap, passages, prompts, runner);
  if ((out.label == Label::Inconclusive) != !gap.empty()) {
    throw Error(ErrorCode::InvariantViolation, "determination gate violated");
  }
}

void run_single_pass(const CaseView& c, std::span<const Passage> passages, PipelineMode mode,
                     StageRunner& runner, Determination& out) {
  const StagePrompts prompts = static_prompts(mode);
  const StagePrompt& prompt = prompts.stages.front();
  const ChatResponse response = runner.call(prompt.stage, prompt, case_slots(c, passages));
  out.label = extract_label(response.raw_text, c.question_type);
  out.reasoning = response.raw_text;
}

}  // namespace

PipelineResult run_pipeline(const CaseView& c, const Corpus& corpus, const PipelineOptions& options,
                            Backend& backend) {
  const auto started = std::chrono::steady_clock::now();
  PipelineResult result;
  PipelineTrace& trace = result.trace;
  trace.trace_id = options.trace_id.empty() ? default_trace_id(c, options.mode) : options.trace_id;
  trace.case_id = c.id;
  trace.mode = std::string(to_string(options.mode));
  trace.backend = backend.name();
  trace.narrative = c.narrative;
  trace.question_type = c.question_type;

  RequestContext base;
  base.mode = trace.mode;
  base.case_id = c.id;
  base.narrative = c.narrative;
  base.question_type = c.question_type;
  base.active_stages = stage_plan(options.mode);

  std::string failed_stage = "retrieve";
  try {
    const auto t0 = std::chrono::steady_clock::now();
    trace.retrieved = retrieve(c.narrative, corpus, options.retrieval_k);
    for (const auto& r : trace.retrieved) {
      trace.passages.push_back(*corpus.find(r.passage_id));
      base.passage_ids.push_back(r.passage_id);
    }
    trace.timing_ms["retrieve"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count();
    StageRunner runner(backend, trace, base, options.max_parse_retries);
    Determination determination;
    try {
      if (is_single_pass(options.mode)) {
        run_single_pass(c, trace.passages, options.mode, runner, determination);
      } else {
        run_gated(c, trace.passages, options.mode, runner, trace, determination);
      }
    } catch (const Error&) {
      failed_stage = std::string(to_string(runner.current_stage()));
      throw;
    }
    determination.trace_id = trace.trace_id;
    trace.determination = determination;
    result.determination = determination;
  } catch (const Error& e) {
    trace.abort = AbortInfo{failed_stage, e.code(), e.what(), e.raw_output()};
  }
  trace.timing_ms["total"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();
  return result;
}

}  // namespace gapgate
