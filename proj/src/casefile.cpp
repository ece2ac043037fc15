#include "gapgate/casefile.hpp"

#include <set>

#include "gapgate/error.hpp"
#include "gapgate/text.hpp"

namespace gapgate {

using nlohmann::json;

std::string_view to_string(QuestionType q) {
  return q == QuestionType::EligibilityDetermination ? "eligibility" : "direct";
}

std::string_view to_string(Label l) {
  switch (l) {
    case Label::Eligible: return "eligible";
    case Label::Ineligible: return "ineligible";
    case Label::Yes: return "yes";
    case Label::No: return "no";
    case Label::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

std::string_view to_string(Completeness c) {
  switch (c) {
    case Completeness::Complete: return "complete";
    case Completeness::Missing1: return "missing-1";
    case Completeness::Missing2: return "missing-2";
    case Completeness::Missing3: return "missing-3";
    case Completeness::Missing4: return "missing-4";
  }
  return "complete";
}

std::optional<QuestionType> parse_question_type(std::string_view s) {
  if (s == "eligibility") return QuestionType::EligibilityDetermination;
  if (s == "direct") return QuestionType::DirectQuestion;
  return std::nullopt;
}

std::optional<Label> parse_label(std::string_view s) {
  const std::string lower = text::to_lower_ascii(s);
  for (Label l : {Label::Eligible, Label::Ineligible, Label::Yes, Label::No, Label::Inconclusive}) {
    if (lower == to_string(l)) return l;
  }
  return std::nullopt;
}

std::optional<Completeness> parse_completeness(std::string_view s) {
  for (Completeness c : {Completeness::Complete, Completeness::Missing1, Completeness::Missing2,
                         Completeness::Missing3, Completeness::Missing4}) {
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

int missing_count(Completeness c) { return static_cast<int>(c); }

bool label_compatible(Label label, QuestionType question_type) {
  switch (label) {
    case Label::Inconclusive: return true;
    case Label::Eligible:
    case Label::Ineligible: return question_type == QuestionType::EligibilityDetermination;
    case Label::Yes:
    case Label::No: return question_type == QuestionType::DirectQuestion;
  }
  return false;
}

CaseView redact(const CaseFile& c) { return CaseView{c.id, c.narrative, c.question_type}; }

void validate_case(const CaseFile& c) {
  auto fail = [&](const std::string& rule) {
    throw Error(ErrorCode::InvariantViolation, "case '" + c.id + "': " + rule);
  };
  if (c.id.empty()) fail("id is empty");
  if (c.narrative.empty()) fail("narrative is empty");
  if (!label_compatible(c.gold_label, c.question_type)) {
    fail("gold label '" + std::string(to_string(c.gold_label)) +
         "' is not valid for question type '" + std::string(to_string(c.question_type)) + "'");
  }
  const bool complete = c.completeness == Completeness::Complete;
  if (complete && c.gold_label == Label::Inconclusive) {
    fail("complete case must not have gold label inconclusive");
  }
  if (!complete && c.gold_label != Label::Inconclusive) {
    fail("incomplete case must have gold label inconclusive");
  }
  if (static_cast<int>(c.withheld_facts.size()) != missing_count(c.completeness)) {
    fail(std::string(to_string(c.completeness)) + " case must list exactly " +
         std::to_string(missing_count(c.completeness)) + " withheld facts, found " +
         std::to_string(c.withheld_facts.size()));
  }
  for (const auto& f : c.withheld_facts) {
    if (f.empty()) fail("withheld fact is empty");
  }
}

Manifest compute_manifest(const std::vector<CaseFile>& cases) {
  Manifest m;
  for (const auto& c : cases) {
    ++m.by_completeness[c.completeness];
    ++m.by_label[c.gold_label];
  }
  return m;
}

const CaseFile* Dataset::find(std::string_view id) const {
  for (const auto& c : cases) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

json to_json(const CaseFile& c) {
  return json{{"id", c.id},
              {"narrative", c.narrative},
              {"question_type", to_string(c.question_type)},
              {"issue_tags", c.issue_tags},
              {"_meta",
               {{"gold_label", to_string(c.gold_label)},
                {"completeness", to_string(c.completeness)},
                {"withheld_facts", c.withheld_facts}}}};
}

json to_json(const Dataset& d) {
  json arr = json::array();
  for (const auto& c : d.cases) arr.push_back(to_json(c));
  return arr;
}

json to_json(const Manifest& m) {
  json out{{"by_completeness", json::object()}, {"by_label", json::object()}};
  for (const auto& [c, n] : m.by_completeness) out["by_completeness"][std::string(to_string(c))] = n;
  for (const auto& [l, n] : m.by_label) out["by_label"][std::string(to_string(l))] = n;
  return out;
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) {
      throw Error(ErrorCode::MalformedDataset, where + ": unknown field '" + key + "'");
    }
  }
}

std::string string_field(const json& obj, const char* name, const std::string& where) {
  const auto it = obj.find(name);
  if (it == obj.end() || !it->is_string()) {
    throw Error(ErrorCode::MalformedDataset, where + ": missing or non-string field '" + name + "'");
  }
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& obj, const char* name, const std::string& where) {
  const auto it = obj.find(name);
  if (it == obj.end() || !it->is_array()) {
    throw Error(ErrorCode::MalformedDataset, where + ": missing or non-array field '" + name + "'");
  }
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) {
      throw Error(ErrorCode::MalformedDataset, where + ": '" + name + "' must hold strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

Dataset parse_dataset(const json& doc, const std::string& source) {
  if (!doc.is_array()) {
    throw Error(ErrorCode::MalformedDataset, source + ": expected a JSON array of cases");
  }
  Dataset ds;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& item = doc[i];
    const std::string where = source + " case #" + std::to_string(i);
    if (!item.is_object()) throw Error(ErrorCode::MalformedDataset, where + ": not an object");
    reject_unknown(item, {"id", "narrative", "question_type", "issue_tags", "_meta"}, where);
    CaseFile c;
    c.id = string_field(item, "id", where);
    c.narrative = string_field(item, "narrative", where);
    const std::string qt = string_field(item, "question_type", where);
    const auto q = parse_question_type(qt);
    if (!q) throw Error(ErrorCode::MalformedDataset, where + ": unknown question_type '" + qt + "'");
    c.question_type = *q;
    c.issue_tags = string_list(item, "issue_tags", where);

    const auto meta = item.find("_meta");
    if (meta == item.end() || !meta->is_object()) {
      throw Error(ErrorCode::MalformedDataset, where + ": missing '_meta' object");
    }
    reject_unknown(*meta, {"gold_label", "completeness", "withheld_facts"}, where + " _meta");
    const std::string gl = string_field(*meta, "gold_label", where);
    const auto label = parse_label(gl);
    if (!label) throw Error(ErrorCode::MalformedDataset, where + ": unknown gold_label '" + gl + "'");
    c.gold_label = *label;
    const std::string comp = string_field(*meta, "completeness", where);
    const auto completeness = parse_completeness(comp);
    if (!completeness) {
      throw Error(ErrorCode::MalformedDataset, where + ": unknown completeness '" + comp + "'");
    }
    c.completeness = *completeness;
    c.withheld_facts = string_list(*meta, "withheld_facts", where);

    validate_case(c);
    if (!seen.insert(c.id).second) {
      throw Error(ErrorCode::InvariantViolation, "case '" + c.id + "': duplicate case id");
    }
    ds.cases.push_back(std::move(c));
  }
  ds.manifest = compute_manifest(ds.cases);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string content = text::read_file(path);
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedDataset, path.string() + ": " + e.what());
  }
  return parse_dataset(doc, path.string());
}

std::map<Completeness, std::vector<CaseFile>> split_by_completeness(const Dataset& dataset) {
  std::map<Completeness, std::vector<CaseFile>> buckets;
  for (const auto& c : dataset.cases) buckets[c.completeness].push_back(c);
  return buckets;
}

}  // namespace gapgate
