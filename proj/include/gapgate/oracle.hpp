#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapgate/backend.hpp"
#include "gapgate/casefile.hpp"
#include "gapgate/corpus.hpp"
#include "gapgate/schemas.hpp"

namespace gapgate {

// Canned outputs keyed "<stage>/<case id>" (or "<stage>/*" for any case).
// Each key holds the sequence of raw answers returned on successive calls;
// the last one repeats once the sequence is exhausted.
using Script = std::map<std::string, std::vector<std::string>>;

// JSON form: {"<key>": value}, where value is an object (one structured
// answer), a string (one raw answer), or an array mixing both (a sequence).
Script parse_script(const nlohmann::json& doc);
Script load_script(const std::filesystem::path& path);

std::string script_key(Stage stage, const std::string& case_id);

// Splits a statute or guide passage into its enumerated requirements: lines
// of the form "(1) ...", "(a) ...", "(IX) ...". A passage without enumerated
// lines is one requirement (its whole text). Trailing list punctuation and a
// trailing "and"/"or" are dropped from each clause.
std::vector<std::string> enumerated_requirements(const std::string& passage_text);

struct IssueRule {
  std::vector<std::string> passage_ids;
  std::optional<Label> outcome;  // determination when every requirement is met
};

// Mechanical stage outputs computed from fixture ground truth: one checklist
// item per enumerated requirement of the case's issue passages, assessments
// that leave exactly the withheld facts' requirements unaddressed, and the
// gold (or issue) outcome when nothing is missing.
class RuleEngine {
 public:
  RuleEngine(Corpus corpus, std::vector<CaseFile> cases, std::map<std::string, IssueRule> issues);

  static std::map<std::string, IssueRule> parse_rules(const nlohmann::json& doc);
  static std::shared_ptr<const RuleEngine> load(const Corpus& corpus, std::vector<CaseFile> cases,
                                                const std::filesystem::path& rules_path);

  // Case for a request: exact id match, otherwise the dataset case whose
  // narrative is the longest prefix of the request narrative (sessions append
  // facts to a dataset narrative).
  const CaseFile* identify(const RequestContext& ctx) const;

  Checklist checklist_for(const CaseFile& c, const std::vector<std::string>& retrieved) const;
  std::vector<Assessment> assess(const CaseFile& c, const std::string& narrative,
                                 const Checklist& checklist) const;
  // Index into `checklist.items` that a withheld fact speaks to.
  std::size_t requirement_for_fact(const std::string& fact, const Checklist& checklist) const;
  Label outcome_for(const CaseFile& c) const;

  // Answer for one request, as the JSON (or text) a model would return.
  std::string respond(const ChatRequest& request) const;

  const std::vector<CaseFile>& cases() const { return cases_; }
  const std::map<std::string, IssueRule>& issues() const { return issues_; }

 private:
  std::vector<std::string> issue_passages(const CaseFile& c) const;

  Corpus corpus_;
  std::vector<CaseFile> cases_;
  std::map<std::string, IssueRule> issues_;
};

// Backend answering from a script, falling back to the rule engine when one
// is given. Unknown keys without a fallback raise UnknownScriptKey. Object
// entries are validated against their stage schema up front.
std::shared_ptr<Backend> scripted_oracle(Script script,
                                         std::shared_ptr<const RuleEngine> rules = nullptr);

}  // namespace gapgate
