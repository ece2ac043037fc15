#include "gapgate/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>

#include "gapgate/error.hpp"
#include "gapgate/text.hpp"

namespace gapgate {

using nlohmann::json;

Script parse_script(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "script must be a JSON object");
  Script script;
  auto to_raw = [](const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_object()) return v.dump();
    throw Error(ErrorCode::InvalidConfig, "script values must be objects or strings");
  };
  for (const auto& [key, value] : doc.items()) {
    std::vector<std::string> seq;
    if (value.is_array()) {
      for (const auto& v : value) seq.push_back(to_raw(v));
      if (seq.empty()) throw Error(ErrorCode::InvalidConfig, "script key '" + key + "' is empty");
    } else {
      seq.push_back(to_raw(value));
    }
    script.emplace(key, std::move(seq));
  }
  return script;
}

Script load_script(const std::filesystem::path& path) {
  try {
    return parse_script(json::parse(text::read_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

std::string script_key(Stage stage, const std::string& case_id) {
  return std::string(to_string(stage)) + "/" + case_id;
}

std::vector<std::string> enumerated_requirements(const std::string& passage_text) {
  static const std::regex kClause(R"(^\s*\(([0-9]+|[a-z]+|[IVXL]+)\)\s+(.+?)\s*$)");
  std::vector<std::string> out;
  std::istringstream in(passage_text);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_match(line, m, kClause)) continue;
    std::string clause = m[2].str();
    for (std::string_view tail : {" and", " or"}) {
      if (clause.ends_with(tail)) clause.resize(clause.size() - tail.size());
    }
    while (!clause.empty() && (clause.back() == ';' || clause.back() == ',' || clause.back() == '.')) {
      clause.pop_back();
    }
    out.push_back(std::move(clause));
  }
  if (out.empty()) out.push_back(text::normalize_whitespace(passage_text));
  return out;
}

namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> kWords = {
      "the",  "and",  "for",  "was",  "were", "that", "this", "with", "from", "had",
      "has",  "have", "her",  "his",  "their", "they", "she", "him", "not", "any",
      "all",  "are",  "but",  "been", "being", "which", "who", "whom", "when", "where",
      "shall", "may", "must", "such", "its", "into", "under", "than", "then", "there",
      "individual", "claimant", "employer", "work", "worker", "employee"};
  return kWords;
}

std::set<std::string> content_tokens(const std::string& s) {
  std::set<std::string> out;
  for (auto& t : text::tokenize(s)) {
    if (t.size() >= 3 && !stopwords().contains(t)) out.insert(std::move(t));
  }
  return out;
}

std::size_t overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t n = 0;
  for (const auto& t : a) n += b.contains(t) ? 1 : 0;
  return n;
}

}  // namespace

RuleEngine::RuleEngine(Corpus corpus, std::vector<CaseFile> cases,
                       std::map<std::string, IssueRule> issues)
    : corpus_(std::move(corpus)), cases_(std::move(cases)), issues_(std::move(issues)) {
  for (const auto& [tag, rule] : issues_) {
    for (const auto& id : rule.passage_ids) {
      if (corpus_.find(id) == nullptr) {
        throw Error(ErrorCode::InvalidConfig,
                    "oracle rule '" + tag + "' references unknown passage '" + id + "'");
      }
    }
  }
}

std::map<std::string, IssueRule> RuleEngine::parse_rules(const json& doc) {
  std::map<std::string, IssueRule> out;
  const auto issues = doc.find("issues");
  if (!doc.is_object() || issues == doc.end() || !issues->is_object()) {
    throw Error(ErrorCode::InvalidConfig, "oracle rules need an 'issues' object");
  }
  for (const auto& [tag, value] : issues->items()) {
    IssueRule rule;
    try {
      rule.passage_ids = value.at("passages").get<std::vector<std::string>>();
      if (value.contains("outcome")) {
        const auto label = parse_label(value.at("outcome").get<std::string>());
        if (!label) throw Error(ErrorCode::InvalidConfig, "issue '" + tag + "': unknown outcome");
        rule.outcome = *label;
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, "issue '" + tag + "': " + e.what());
    }
    out.emplace(tag, std::move(rule));
  }
  return out;
}

std::shared_ptr<const RuleEngine> RuleEngine::load(const Corpus& corpus, std::vector<CaseFile> cases,
                                                   const std::filesystem::path& rules_path) {
  json doc;
  try {
    doc = json::parse(text::read_file(rules_path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, rules_path.string() + ": " + e.what());
  }
  return std::make_shared<const RuleEngine>(corpus, std::move(cases), parse_rules(doc));
}

const CaseFile* RuleEngine::identify(const RequestContext& ctx) const {
  for (const auto& c : cases_) {
    if (c.id == ctx.case_id) return &c;
  }
  const std::string narrative = text::normalize_whitespace(ctx.narrative);
  const CaseFile* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& c : cases_) {
    const std::string base = text::normalize_whitespace(c.narrative);
    if (!base.empty() && narrative.starts_with(base) && base.size() > best_len) {
      best = &c;
      best_len = base.size();
    }
  }
  return best;
}

std::vector<std::string> RuleEngine::issue_passages(const CaseFile& c) const {
  std::vector<std::string> ids;
  for (const auto& tag : c.issue_tags) {
    const auto it = issues_.find(tag);
    if (it == issues_.end()) continue;
    for (const auto& id : it->second.passage_ids) {
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
  }
  return ids;
}

Checklist RuleEngine::checklist_for(const CaseFile& c, const std::vector<std::string>& retrieved) const {
  Checklist checklist;
  for (const auto& id : issue_passages(c)) {
    if (std::find(retrieved.begin(), retrieved.end(), id) == retrieved.end()) continue;
    const Passage* p = corpus_.find(id);
    checklist.source_passage_ids.push_back(id);
    const auto requirements = enumerated_requirements(p->text);
    for (std::size_t i = 0; i < requirements.size(); ++i) {
      ChecklistItem item;
      item.item_id = id + "#" + std::to_string(i + 1);
      item.text = requirements[i];
      switch (p->kind) {
        case PassageKind::Statute:
        case PassageKind::Regulation:
          item.category = ItemCategory::RequiredElement;
          item.statute_citation = p->citation;
          break;
        case PassageKind::CaseLaw:
          item.category = ItemCategory::CaseLawRequirement;
          item.case_name = p->title;
          item.principle = requirements[i];
          item.statute_citation = p->citation;
          break;
        case PassageKind::Consideration:
        case PassageKind::Example:
          item.category = ItemCategory::Consideration;
          item.statute_citation = p->citation;
          break;
      }
      checklist.items.push_back(std::move(item));
    }
  }
  return checklist;
}

std::size_t RuleEngine::requirement_for_fact(const std::string& fact, const Checklist& checklist) const {
  const auto fact_tokens = content_tokens(fact);
  std::size_t best = 0;
  std::size_t best_score = 0;
  for (std::size_t i = 0; i < checklist.items.size(); ++i) {
    const std::size_t score = overlap(fact_tokens, content_tokens(checklist.items[i].text));
    if (score > best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

std::vector<Assessment> RuleEngine::assess(const CaseFile& c, const std::string& narrative,
                                           const Checklist& checklist) const {
  // Requirement index -> withheld facts that speak to it and are still absent.
  std::map<std::size_t, std::vector<std::string>> missing;
  std::map<std::size_t, std::string> restored;
  if (!checklist.items.empty()) {
    for (const auto& fact : c.withheld_facts) {
      const std::size_t idx = requirement_for_fact(fact, checklist);
      if (text::contains_normalized(narrative, fact)) {
        restored.emplace(idx, fact);
      } else {
        missing[idx].push_back(fact);
      }
    }
  }
  const auto sentences = text::split_sentences(narrative);

  std::vector<Assessment> out;
  for (std::size_t i = 0; i < checklist.items.size(); ++i) {
    const ChecklistItem& item = checklist.items[i];
    Assessment a;
    a.item_id = item.item_id;
    if (missing.contains(i)) {
      a.status = AssessmentStatus::Unaddressed;
      a.criticality = Criticality::CriticalGap;
      a.rationale = "The question states no facts establishing this requirement.";
    } else if (item.category == ItemCategory::Consideration && !restored.contains(i)) {
      a.status = AssessmentStatus::Unaddressed;
      a.criticality = Criticality::NotRelevant;
      a.rationale = "This consideration does not bear on the facts presented.";
    } else {
      a.status = AssessmentStatus::Satisfied;
      if (const auto it = restored.find(i); it != restored.end()) {
        a.supporting_quote = it->second;
      } else {
        const auto item_tokens = content_tokens(item.text);
        std::size_t best_score = 0;
        a.supporting_quote = sentences.empty() ? narrative : sentences.front();
        for (const auto& s : sentences) {
          const std::size_t score = overlap(item_tokens, content_tokens(s));
          if (score > best_score) {
            best_score = score;
            a.supporting_quote = s;
          }
        }
      }
      a.rationale = "The quoted statement establishes this requirement.";
    }
    out.push_back(std::move(a));
  }
  return out;
}

Label RuleEngine::outcome_for(const CaseFile& c) const {
  if (c.gold_label != Label::Inconclusive) return c.gold_label;
  for (const auto& tag : c.issue_tags) {
    const auto it = issues_.find(tag);
    if (it != issues_.end() && it->second.outcome) return *it->second.outcome;
  }
  throw Error(ErrorCode::UnknownScriptKey,
              "no outcome rule for the issues of case '" + c.id + "'");
}

namespace {

bool any_critical(const std::vector<Assessment>& as) {
  return std::any_of(as.begin(), as.end(), [](const Assessment& a) {
    return state_of(a) == AssessmentState::CriticalGap;
  });
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::string stage_strategy(Stage stage, const std::string& citations) {
  switch (stage) {
    case Stage::Extract:
      return "List every enumerated element of " + citations +
             " as a separate required element with its citation, copying the wording exactly. "
             "List each consideration from the guide and any case-law principle with its case name.";
    case Stage::Verify:
      return "For each element of " + citations +
             ", quote the sentence of the question that establishes it, or mark it unaddressed "
             "and decide whether the gap is critical.";
    case Stage::Supervise:
      return "Re-check every satisfied element of " + citations +
             " against the statutory wording and overturn any that rest on inference; confirm "
             "which gaps are outcome-determinative.";
    case Stage::ExtractVerify:
    case Stage::VerifySupervise:
    case Stage::Combined:
      return "Work through every element of " + citations +
             " in order: extract it verbatim, test it against the question, and review the result.";
    case Stage::Decide:
      return "Apply " + citations + " to the verified facts and cite the passages relied on.";
    default:
      return "Follow the stage instructions for " + citations + ".";
  }
}

}  // namespace

std::string RuleEngine::respond(const ChatRequest& request) const {
  const RequestContext& ctx = request.context;
  const CaseFile* c = identify(ctx);
  if (c == nullptr) {
    throw Error(ErrorCode::UnknownScriptKey,
                "rule oracle has no ground truth for case '" + ctx.case_id + "'");
  }
  const Checklist checklist = checklist_for(*c, ctx.passage_ids);
  std::vector<std::string> citations;
  for (const auto& id : checklist.source_passage_ids) citations.push_back(corpus_.find(id)->citation);
  const std::string cited = citations.empty() ? "the retrieved provisions" : join(citations, ", ");

  switch (ctx.stage) {
    case Stage::Planner: {
      PlannerOutput plan;
      plan.analysis = "The question turns on " + cited + ".";
      for (Stage s : ctx.active_stages) plan.stage_instructions.push_back({s, stage_strategy(s, cited)});
      return to_json(plan).dump();
    }
    case Stage::Extract:
      return to_json(checklist).dump();
    case Stage::Verify:
      return to_json(VerificationOutput{assess(*c, ctx.narrative, checklist), {}}).dump();
    case Stage::Supervise:
    case Stage::VerifySupervise: {
      SupervisorVerdict v;
      v.final_assessments = assess(*c, ctx.narrative, checklist);
      v.recommendation = any_critical(v.final_assessments) ? Recommendation::Abstain
                                                           : Recommendation::Proceed;
      return to_json(v).dump();
    }
    case Stage::ExtractVerify: {
      json out = to_json(VerificationOutput{assess(*c, ctx.narrative, checklist), {}});
      out["checklist"] = to_json(checklist);
      return out.dump();
    }
    case Stage::Combined: {
      SupervisorVerdict v;
      v.final_assessments = assess(*c, ctx.narrative, checklist);
      v.recommendation = any_critical(v.final_assessments) ? Recommendation::Abstain
                                                           : Recommendation::Proceed;
      json out = to_json(v);
      out["checklist"] = to_json(checklist);
      return out.dump();
    }
    case Stage::Decide: {
      DeterminationOutput d;
      d.label = outcome_for(*c);
      d.cited_passage_ids = checklist.source_passage_ids;
      d.reasoning = "Every requirement of " + cited + " is established by the stated facts (" +
                    join(checklist.source_passage_ids, ", ") + ").";
      return to_json(d).dump();
    }
    case Stage::Baseline:
    case Stage::Enhanced: {
      const auto assessments = assess(*c, ctx.narrative, checklist);
      if (any_critical(assessments)) {
        return "The facts provided do not establish every requirement of " + cited +
               "; additional fact-finding is needed. Determination: Inconclusive.";
      }
      std::string label(to_string(outcome_for(*c)));
      label[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
      return "Applying " + cited + " to the stated facts. Determination: " + label + ".";
    }
  }
  throw Error(ErrorCode::UnknownScriptKey, "rule oracle cannot answer this stage");
}

namespace {

class ScriptedOracle final : public Backend {
 public:
  ScriptedOracle(Script script, std::shared_ptr<const RuleEngine> rules)
      : script_(std::move(script)), rules_(std::move(rules)) {
    for (const auto& [key, seq] : script_) {
      const auto slash = key.find('/');
      const auto stage = parse_stage(key.substr(0, slash));
      if (slash == std::string::npos || !stage) {
        throw Error(ErrorCode::InvalidConfig, "script key '" + key + "' is not <stage>/<case id>");
      }
      // Single object entries are canned structured outputs and must be
      // valid; sequences may deliberately contain malformed answers.
      if (seq.size() == 1 && schema_for(*stage) != SchemaId::FreeText) {
        try {
          validate_schema(schema_for(*stage), json::parse(seq.front()));
        } catch (const json::parse_error& e) {
          throw Error(ErrorCode::InvalidConfig, "script key '" + key + "': " + e.what());
        } catch (const ValidationFailure& e) {
          throw Error(ErrorCode::InvalidConfig, "script key '" + key + "': " + e.what());
        }
      }
      cursors_.emplace(key, 0);
    }
  }

  std::string name() const override { return rules_ ? "rule-oracle" : "scripted-oracle"; }

  std::string send(const ChatRequest& request, std::span<const Message>) override {
    const std::string exact = script_key(request.context.stage, request.context.case_id);
    const std::string wildcard = script_key(request.context.stage, "*");
    for (const std::string& key : {exact, wildcard}) {
      const auto it = script_.find(key);
      if (it == script_.end()) continue;
      std::lock_guard lock(mutex_);
      std::size_t& cursor = cursors_.at(key);
      const std::string& answer = it->second[std::min(cursor, it->second.size() - 1)];
      ++cursor;
      return answer;
    }
    if (rules_) return rules_->respond(request);
    throw Error(ErrorCode::UnknownScriptKey, "no scripted answer for '" + exact + "'");
  }

 private:
  Script script_;
  std::shared_ptr<const RuleEngine> rules_;
  std::map<std::string, std::size_t> cursors_;
  std::mutex mutex_;
};

}  // namespace

std::shared_ptr<Backend> scripted_oracle(Script script, std::shared_ptr<const RuleEngine> rules) {
  return std::make_shared<ScriptedOracle>(std::move(script), std::move(rules));
}

}  // namespace gapgate
