#include "gapgate/trace.hpp"

#include "gapgate/prompts.hpp"

namespace gapgate {

using nlohmann::json;

const StageRecord* PipelineTrace::find_stage(Stage stage) const {
  for (const auto& s : stages) {
    if (s.stage == stage) return &s;
  }
  return nullptr;
}

json to_json(const GapSet& g) {
  json gaps = json::array();
  for (const auto& item : g.gaps) {
    gaps.push_back({{"item_id", item.item_id},
                    {"requirement_text", item.requirement_text},
                    {"needed_information", item.needed_information}});
  }
  return json{{"gaps", gaps}};
}

json to_json(const Determination& d) {
  return json{{"label", d.label ? json(to_string(*d.label)) : json("unparseable")},
              {"reasoning", d.reasoning},
              {"cited_passage_ids", d.cited_passage_ids},
              {"missing_information", d.missing_information},
              {"trace_id", d.trace_id}};
}

json to_json(const PipelineTrace& t) {
  json retrieved = json::array();
  for (const auto& r : t.retrieved) {
    retrieved.push_back({{"passage_id", r.passage_id}, {"score", r.score}, {"rank", r.rank}});
  }
  json passages = json::array();
  for (const auto& p : t.passages) passages.push_back(to_json(p));

  json stages = json::array();
  for (const auto& s : t.stages) {
    json attempts = json::array();
    for (const auto& a : s.attempts) {
      json rec{{"raw_text", a.raw_text}, {"latency_ms", a.latency_ms}};
      if (!a.rejection.empty()) rec["rejection"] = a.rejection;
      attempts.push_back(std::move(rec));
    }
    stages.push_back({{"stage", to_string(s.stage)},
                      {"schema", to_string(s.schema)},
                      {"template_hash", s.template_hash},
                      {"system_prompt", s.system_prompt},
                      {"user_prompt", s.user_prompt},
                      {"attempts", attempts},
                      {"raw_text", s.raw_text},
                      {"parsed", s.parsed ? *s.parsed : json(nullptr)},
                      {"latency_ms", s.latency_ms}});
  }

  json out{{"schema_version", kTraceSchemaVersion},
           {"prompt_asset_version", prompts::kAssetVersion},
           {"prompt_asset_hashes", prompts::asset_hashes()},
           {"trace_id", t.trace_id},
           {"case_id", t.case_id},
           {"mode", t.mode},
           {"backend", t.backend},
           {"narrative", t.narrative},
           {"question_type", to_string(t.question_type)},
           {"retrieved", retrieved},
           {"passages", passages},
           {"planner_output", t.planner_output ? to_json(*t.planner_output) : json(nullptr)},
           {"stages", stages},
           {"backend_calls", t.backend_calls()},
           {"checklist", t.checklist ? to_json(*t.checklist) : json(nullptr)},
           {"assessments", t.assessments ? to_json(*t.assessments) : json(nullptr)},
           {"verdict", t.verdict ? to_json(*t.verdict) : json(nullptr)},
           {"overrides", t.verdict ? to_json(*t.verdict)["overrides"] : json::array()},
           {"gap_set", t.gap_set ? to_json(*t.gap_set) : json(nullptr)},
           {"determination", t.determination ? to_json(*t.determination) : json(nullptr)},
           {"notes", t.notes},
           {"timing_ms", t.timing_ms}};
  if (t.abort) {
    out["abort"] = {{"stage", t.abort->stage},
                    {"code", to_string(t.abort->code)},
                    {"message", t.abort->message},
                    {"raw_output", t.abort->raw_output}};
  } else {
    out["abort"] = nullptr;
  }
  return out;
}

json strip_timing(json trace_json) {
  trace_json.erase("timing_ms");
  if (trace_json.contains("stages")) {
    for (auto& s : trace_json["stages"]) {
      s.erase("latency_ms");
      for (auto& a : s["attempts"]) a.erase("latency_ms");
    }
  }
  return trace_json;
}

}  // namespace gapgate
