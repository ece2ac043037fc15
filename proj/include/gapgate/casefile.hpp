#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gapgate {

enum class QuestionType { EligibilityDetermination, DirectQuestion };
enum class Label { Eligible, Ineligible, Yes, No, Inconclusive };
enum class Completeness { Complete, Missing1, Missing2, Missing3, Missing4 };

std::string_view to_string(QuestionType q);
std::string_view to_string(Label l);
std::string_view to_string(Completeness c);
std::optional<QuestionType> parse_question_type(std::string_view s);
std::optional<Label> parse_label(std::string_view s);  // case-insensitive
std::optional<Completeness> parse_completeness(std::string_view s);

// Number of withheld facts implied by a completeness level (0 for Complete).
int missing_count(Completeness c);

// Yes/No only for direct questions, Eligible/Ineligible only for eligibility
// determinations; Inconclusive is valid for both.
bool label_compatible(Label label, QuestionType question_type);

struct CaseFile {
  std::string id;
  std::string narrative;
  QuestionType question_type = QuestionType::EligibilityDetermination;
  Label gold_label = Label::Inconclusive;
  Completeness completeness = Completeness::Complete;
  std::vector<std::string> withheld_facts;
  std::vector<std::string> issue_tags;

  bool operator==(const CaseFile&) const = default;
};

// What the pipeline is allowed to see. Gold fields never leave the harness.
struct CaseView {
  std::string id;
  std::string narrative;
  QuestionType question_type = QuestionType::EligibilityDetermination;
};

CaseView redact(const CaseFile& c);

// Throws InvariantViolation naming the case and the rule.
void validate_case(const CaseFile& c);

struct Manifest {
  std::map<Completeness, std::size_t> by_completeness;
  std::map<Label, std::size_t> by_label;

  bool operator==(const Manifest&) const = default;
};

Manifest compute_manifest(const std::vector<CaseFile>& cases);

struct Dataset {
  std::vector<CaseFile> cases;
  Manifest manifest;

  const CaseFile* find(std::string_view id) const;
};

nlohmann::json to_json(const CaseFile& c);
nlohmann::json to_json(const Dataset& d);
nlohmann::json to_json(const Manifest& m);

Dataset parse_dataset(const nlohmann::json& doc, const std::string& source);
Dataset load_dataset(const std::filesystem::path& path);

// Every case lands in exactly one bucket; empty buckets are omitted.
std::map<Completeness, std::vector<CaseFile>> split_by_completeness(const Dataset& dataset);

}  // namespace gapgate
