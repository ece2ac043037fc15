#include "gapgate/schemas.hpp"

#include <set>

namespace gapgate {

using nlohmann::json;

std::string_view to_string(SchemaId id) {
  switch (id) {
    case SchemaId::PlannerOutput: return "planner_output";
    case SchemaId::ChecklistOutput: return "checklist_output";
    case SchemaId::AssessmentOutput: return "assessment_output";
    case SchemaId::SupervisorOutput: return "supervisor_output";
    case SchemaId::DeterminationOutput: return "determination_output";
    case SchemaId::ChecklistAssessmentOutput: return "checklist_assessment_output";
    case SchemaId::CombinedReviewOutput: return "combined_review_output";
    case SchemaId::FreeText: return "free_text";
  }
  return "free_text";
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Planner: return "planner";
    case Stage::Extract: return "extract";
    case Stage::Verify: return "verify";
    case Stage::Supervise: return "supervise";
    case Stage::ExtractVerify: return "extract_verify";
    case Stage::VerifySupervise: return "verify_supervise";
    case Stage::Combined: return "combined";
    case Stage::Decide: return "decide";
    case Stage::Baseline: return "baseline";
    case Stage::Enhanced: return "enhanced";
  }
  return "planner";
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (Stage st : {Stage::Planner, Stage::Extract, Stage::Verify, Stage::Supervise,
                   Stage::ExtractVerify, Stage::VerifySupervise, Stage::Combined, Stage::Decide,
                   Stage::Baseline, Stage::Enhanced}) {
    if (s == to_string(st)) return st;
  }
  return std::nullopt;
}

SchemaId schema_for(Stage stage) {
  switch (stage) {
    case Stage::Planner: return SchemaId::PlannerOutput;
    case Stage::Extract: return SchemaId::ChecklistOutput;
    case Stage::Verify: return SchemaId::AssessmentOutput;
    case Stage::Supervise:
    case Stage::VerifySupervise: return SchemaId::SupervisorOutput;
    case Stage::ExtractVerify: return SchemaId::ChecklistAssessmentOutput;
    case Stage::Combined: return SchemaId::CombinedReviewOutput;
    case Stage::Decide: return SchemaId::DeterminationOutput;
    case Stage::Baseline:
    case Stage::Enhanced: return SchemaId::FreeText;
  }
  return SchemaId::FreeText;
}

std::string_view to_string(ItemCategory c) {
  switch (c) {
    case ItemCategory::RequiredElement: return "required_element";
    case ItemCategory::Consideration: return "consideration";
    case ItemCategory::CaseLawRequirement: return "case_law_requirement";
  }
  return "required_element";
}

std::string_view to_string(AssessmentStatus s) {
  return s == AssessmentStatus::Satisfied ? "satisfied" : "unaddressed";
}

std::string_view to_string(Criticality c) {
  return c == Criticality::CriticalGap ? "critical_gap" : "not_relevant";
}

std::string_view to_string(AssessmentState s) {
  switch (s) {
    case AssessmentState::Satisfied: return "satisfied";
    case AssessmentState::CriticalGap: return "critical_gap";
    case AssessmentState::NotRelevant: return "not_relevant";
  }
  return "satisfied";
}

std::string_view to_string(Recommendation r) {
  return r == Recommendation::Proceed ? "proceed" : "abstain";
}

AssessmentState state_of(const Assessment& a) {
  if (a.status == AssessmentStatus::Satisfied) return AssessmentState::Satisfied;
  return a.criticality == Criticality::NotRelevant ? AssessmentState::NotRelevant
                                                   : AssessmentState::CriticalGap;
}

const StageInstruction* PlannerOutput::find(Stage stage) const {
  for (const auto& s : stage_instructions) {
    if (s.stage == stage) return &s;
  }
  return nullptr;
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ValidationFailure(msg); }

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) fail(where + " must be a JSON object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(where + " is missing field '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) fail(where + "." + key + " must be a string");
  return v.get<std::string>();
}

std::string optional_string(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) fail(where + "." + key + " must be a string");
  return it->get<std::string>();
}

const json& require_array(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_array()) fail(where + "." + key + " must be an array");
  return v;
}

std::vector<std::string> string_array(const json& arr, const std::string& where) {
  std::vector<std::string> out;
  for (const auto& v : arr) {
    if (!v.is_string()) fail(where + " must contain only strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

AssessmentState parse_state(const std::string& s, const std::string& where) {
  if (s == "satisfied") return AssessmentState::Satisfied;
  if (s == "critical_gap") return AssessmentState::CriticalGap;
  if (s == "not_relevant") return AssessmentState::NotRelevant;
  fail(where + ": unknown state '" + s + "' (expected satisfied, critical_gap, not_relevant)");
}

Recommendation parse_recommendation(const std::string& s, const std::string& where) {
  if (s == "proceed") return Recommendation::Proceed;
  if (s == "abstain") return Recommendation::Abstain;
  fail(where + ": unknown recommendation '" + s + "' (expected proceed or abstain)");
}

Assessment parse_assessment(const json& j, const std::string& where) {
  Assessment a;
  a.item_id = require_string(j, "item_id", where);
  if (a.item_id.empty()) fail(where + ".item_id is empty");
  const std::string status = require_string(j, "status", where);
  if (status == "satisfied") {
    a.status = AssessmentStatus::Satisfied;
  } else if (status == "unaddressed") {
    a.status = AssessmentStatus::Unaddressed;
  } else {
    fail(where + ": unknown status '" + status + "' (expected satisfied or unaddressed)");
  }
  a.supporting_quote = optional_string(j, "supporting_quote", where);
  a.rationale = optional_string(j, "rationale", where);
  const std::string crit = optional_string(j, "criticality", where);
  if (a.status == AssessmentStatus::Satisfied) {
    if (a.supporting_quote.empty()) {
      fail(where + " (" + a.item_id + "): satisfied assessment needs a supporting_quote");
    }
    if (!crit.empty()) fail(where + " (" + a.item_id + "): criticality applies only to unaddressed items");
  } else {
    if (crit == "critical_gap") {
      a.criticality = Criticality::CriticalGap;
    } else if (crit == "not_relevant") {
      a.criticality = Criticality::NotRelevant;
    } else {
      fail(where + " (" + a.item_id +
           "): unaddressed assessment needs criticality critical_gap or not_relevant");
    }
    a.supporting_quote.clear();
  }
  return a;
}

std::vector<Assessment> parse_assessment_array(const json& arr, const std::string& where) {
  std::vector<Assessment> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    auto a = parse_assessment(arr[i], where + "[" + std::to_string(i) + "]");
    if (!ids.insert(a.item_id).second) fail(where + ": duplicate assessment for '" + a.item_id + "'");
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<ConflictFlag> parse_conflicts(const json& obj, const std::string& where) {
  std::vector<ConflictFlag> out;
  const auto it = obj.find("conflicts");
  if (it == obj.end() || it->is_null()) return out;
  if (!it->is_array()) fail(where + ".conflicts must be an array");
  for (std::size_t i = 0; i < it->size(); ++i) {
    const std::string w = where + ".conflicts[" + std::to_string(i) + "]";
    ConflictFlag c;
    c.item_ids = string_array(require_array((*it)[i], "item_ids", w), w + ".item_ids");
    if (c.item_ids.empty()) fail(w + ".item_ids is empty");
    c.description = optional_string((*it)[i], "description", w);
    out.push_back(std::move(c));
  }
  return out;
}

std::string state_json(AssessmentState s) { return std::string(to_string(s)); }

SupervisorVerdict parse_verdict_fields(const json& j, const std::string& where) {
  SupervisorVerdict v;
  v.final_assessments =
      parse_assessment_array(require_array(j, "final_assessments", where), where + ".final_assessments");
  const auto& overrides = require_array(j, "overrides", where);
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    const std::string w = where + ".overrides[" + std::to_string(i) + "]";
    Override o;
    o.item_id = require_string(overrides[i], "item_id", w);
    o.from = parse_state(require_string(overrides[i], "from", w), w + ".from");
    o.to = parse_state(require_string(overrides[i], "to", w), w + ".to");
    o.reason = require_string(overrides[i], "reason", w);
    if (o.reason.empty()) fail(w + ": every override needs a reason");
    v.overrides.push_back(std::move(o));
  }
  v.recommendation =
      parse_recommendation(require_string(j, "recommendation", where), where + ".recommendation");
  return v;
}

}  // namespace

Checklist parse_checklist(const json& j) {
  const std::string where = "checklist";
  Checklist c;
  const auto& items = require_array(j, "items", where);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string w = where + ".items[" + std::to_string(i) + "]";
    ChecklistItem item;
    item.item_id = require_string(items[i], "item_id", w);
    if (item.item_id.empty()) fail(w + ".item_id is empty");
    if (!ids.insert(item.item_id).second) fail(where + ": duplicate item_id '" + item.item_id + "'");
    const std::string cat = require_string(items[i], "category", w);
    if (cat == "required_element") {
      item.category = ItemCategory::RequiredElement;
    } else if (cat == "consideration") {
      item.category = ItemCategory::Consideration;
    } else if (cat == "case_law_requirement") {
      item.category = ItemCategory::CaseLawRequirement;
    } else {
      fail(w + ": unknown category '" + cat + "'");
    }
    item.text = require_string(items[i], "text", w);
    if (item.text.empty()) fail(w + ".text is empty");
    item.statute_citation = optional_string(items[i], "statute_citation", w);
    item.case_name = optional_string(items[i], "case_name", w);
    item.principle = optional_string(items[i], "principle", w);
    if (item.category == ItemCategory::RequiredElement && item.statute_citation.empty()) {
      fail(w + ": required_element needs a statute_citation");
    }
    if (item.category == ItemCategory::CaseLawRequirement &&
        (item.case_name.empty() || item.principle.empty())) {
      fail(w + ": case_law_requirement needs case_name and principle");
    }
    c.items.push_back(std::move(item));
  }
  c.source_passage_ids =
      string_array(require_array(j, "source_passage_ids", where), where + ".source_passage_ids");
  return c;
}

std::vector<Assessment> parse_assessments(const json& j) {
  return parse_assessment_array(require_array(j, "assessments", "assessment_output"),
                                "assessments");
}

VerificationOutput parse_verification(const json& j) {
  VerificationOutput v;
  v.assessments = parse_assessments(j);
  v.conflicts = parse_conflicts(j, "assessment_output");
  return v;
}

SupervisorVerdict parse_verdict(const json& j) { return parse_verdict_fields(j, "supervisor_output"); }

PlannerOutput parse_planner(const json& j) {
  const std::string where = "planner_output";
  PlannerOutput p;
  p.analysis = require_string(j, "analysis", where);
  const auto& stages = require_array(j, "stage_instructions", where);
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string w = where + ".stage_instructions[" + std::to_string(i) + "]";
    const std::string name = require_string(stages[i], "stage", w);
    const auto stage = parse_stage(name);
    if (!stage || *stage == Stage::Planner || *stage == Stage::Baseline ||
        *stage == Stage::Enhanced) {
      fail(w + ": unknown stage '" + name + "'");
    }
    if (p.find(*stage) != nullptr) fail(w + ": duplicate instructions for '" + name + "'");
    StageInstruction si{*stage, require_string(stages[i], "instructions", w)};
    if (si.instructions.empty()) fail(w + ".instructions is empty");
    p.stage_instructions.push_back(std::move(si));
  }
  return p;
}

DeterminationOutput parse_determination_output(const json& j) {
  const std::string where = "determination_output";
  DeterminationOutput d;
  const std::string label = require_string(j, "label", where);
  const auto parsed = parse_label(label);
  if (!parsed) throw ValidationFailure(where + ": unknown label '" + label + "'", ErrorCode::InvalidLabel);
  d.label = *parsed;
  d.reasoning = require_string(j, "reasoning", where);
  if (d.reasoning.empty()) fail(where + ".reasoning is empty");
  d.cited_passage_ids =
      string_array(require_array(j, "cited_passage_ids", where), where + ".cited_passage_ids");
  return d;
}

ChecklistAssessmentOutput parse_checklist_assessment(const json& j) {
  ChecklistAssessmentOutput out;
  out.checklist = parse_checklist(require(j, "checklist", "checklist_assessment_output"));
  out.verification = parse_verification(j);
  return out;
}

CombinedReviewOutput parse_combined_review(const json& j) {
  CombinedReviewOutput out;
  out.checklist = parse_checklist(require(j, "checklist", "combined_review_output"));
  out.verdict = parse_verdict_fields(j, "combined_review_output");
  return out;
}

void validate_schema(SchemaId id, const json& j) {
  switch (id) {
    case SchemaId::PlannerOutput: parse_planner(j); return;
    case SchemaId::ChecklistOutput: parse_checklist(j); return;
    case SchemaId::AssessmentOutput: parse_verification(j); return;
    case SchemaId::SupervisorOutput: parse_verdict(j); return;
    case SchemaId::DeterminationOutput: parse_determination_output(j); return;
    case SchemaId::ChecklistAssessmentOutput: parse_checklist_assessment(j); return;
    case SchemaId::CombinedReviewOutput: parse_combined_review(j); return;
    case SchemaId::FreeText: return;
  }
}

json to_json(const ChecklistItem& item) {
  json j{{"item_id", item.item_id}, {"category", to_string(item.category)}, {"text", item.text}};
  if (!item.statute_citation.empty()) j["statute_citation"] = item.statute_citation;
  if (!item.case_name.empty()) j["case_name"] = item.case_name;
  if (!item.principle.empty()) j["principle"] = item.principle;
  return j;
}

json to_json(const Checklist& checklist) {
  json items = json::array();
  for (const auto& i : checklist.items) items.push_back(to_json(i));
  return json{{"items", items}, {"source_passage_ids", checklist.source_passage_ids}};
}

json to_json(const Assessment& a) {
  json j{{"item_id", a.item_id}, {"status", to_string(a.status)}};
  if (a.status == AssessmentStatus::Satisfied) j["supporting_quote"] = a.supporting_quote;
  if (a.criticality) j["criticality"] = to_string(*a.criticality);
  j["rationale"] = a.rationale;
  return j;
}

json to_json(const std::vector<Assessment>& as) {
  json arr = json::array();
  for (const auto& a : as) arr.push_back(to_json(a));
  return arr;
}

json to_json(const VerificationOutput& v) {
  json conflicts = json::array();
  for (const auto& c : v.conflicts) {
    conflicts.push_back(json{{"item_ids", c.item_ids}, {"description", c.description}});
  }
  return json{{"assessments", to_json(v.assessments)}, {"conflicts", conflicts}};
}

json to_json(const Override& o) {
  json j{{"item_id", o.item_id},
         {"from", state_json(o.from)},
         {"to", state_json(o.to)},
         {"reason", o.reason}};
  if (o.implicit) j["implicit"] = true;
  return j;
}

json to_json(const SupervisorVerdict& v) {
  json overrides = json::array();
  for (const auto& o : v.overrides) overrides.push_back(to_json(o));
  json j{{"final_assessments", to_json(v.final_assessments)},
         {"overrides", overrides},
         {"recommendation", to_string(v.recommendation)}};
  if (v.model_recommendation) j["model_recommendation"] = to_string(*v.model_recommendation);
  return j;
}

json to_json(const PlannerOutput& p) {
  json stages = json::array();
  for (const auto& s : p.stage_instructions) {
    stages.push_back(json{{"stage", to_string(s.stage)}, {"instructions", s.instructions}});
  }
  return json{{"analysis", p.analysis}, {"stage_instructions", stages}};
}

json to_json(const DeterminationOutput& d) {
  return json{{"label", to_string(d.label)},
              {"reasoning", d.reasoning},
              {"cited_passage_ids", d.cited_passage_ids}};
}

std::string_view schema_description(SchemaId id) {
  switch (id) {
    case SchemaId::PlannerOutput:
      return R"({"analysis": string, "stage_instructions": [{"stage": one of the stage names listed above, "instructions": string}]})";
    case SchemaId::ChecklistOutput:
      return R"({"items": [{"item_id": string, "category": "required_element" | "consideration" | "case_law_requirement", "text": exact requirement wording, "statute_citation": string (required for required_element), "case_name": string (case_law_requirement only), "principle": string (case_law_requirement only)}], "source_passage_ids": [passage id]})";
    case SchemaId::AssessmentOutput:
      return R"({"assessments": [{"item_id": string, "status": "satisfied" | "unaddressed", "supporting_quote": exact text copied from the question (satisfied only), "criticality": "critical_gap" | "not_relevant" (unaddressed only), "rationale": string}], "conflicts": [{"item_ids": [string], "description": string}]})";
    case SchemaId::SupervisorOutput:
      return R"({"final_assessments": [assessment objects as above, one per checklist item], "overrides": [{"item_id": string, "from": "satisfied" | "critical_gap" | "not_relevant", "to": same values, "reason": string}], "recommendation": "proceed" | "abstain"})";
    case SchemaId::DeterminationOutput:
      return R"({"label": string, "reasoning": string citing passage ids, "cited_passage_ids": [passage id]})";
    case SchemaId::ChecklistAssessmentOutput:
      return R"({"checklist": checklist object as above, "assessments": [assessment objects], "conflicts": [conflict objects]})";
    case SchemaId::CombinedReviewOutput:
      return R"({"checklist": checklist object as above, "final_assessments": [assessment objects], "overrides": [override objects], "recommendation": "proceed" | "abstain"})";
    case SchemaId::FreeText:
      return "plain text";
  }
  return "plain text";
}

}  // namespace gapgate
