// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapgate/casefile.hpp"
#include "gapgate/config.hpp"
#include "gapgate/corpus.hpp"
#include "gapgate/error.hpp"
#include "gapgate/evalharness.hpp"
#include "gapgate/oracle.hpp"
#include "gapgate/pipeline.hpp"
#include "gapgate/runner.hpp"
#include "gapgate/text.hpp"

namespace fs = std::filesystem;
using namespace gapgate;
using nlohmann::json;

namespace {

const fs::path kFixtures = GAPGATE_FIXTURES;

// Collects failures; a criterion passes when none were recorded.
struct Outcome {
  std::vector<std::string> failures;
  std::string summary;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
};

struct Context {
  Corpus corpus = load_corpus(kFixtures / "corpus");
  Dataset dataset = load_dataset(kFixtures / "dataset.json");
  std::shared_ptr<const RuleEngine> rules =
      RuleEngine::load(corpus, dataset.cases, kFixtures / "oracle_rules.json");
};

PipelineResult run_case(const Context& ctx, const CaseFile& c, PipelineMode mode, Backend& backend) {
  PipelineOptions o;
  o.mode = mode;
  return run_pipeline(redact(c), ctx.corpus, o, backend);
}

std::string joined(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
  return out;
}

// Criterion 1
Outcome gate_soundness(const Context& ctx) {
  Outcome o;
  auto backend = scripted_oracle({}, ctx.rules);
  std::size_t inconclusive = 0;
  for (const auto& c : ctx.dataset.cases) {
    const PipelineResult r = run_case(ctx, c, PipelineMode::Full, *backend);
    o.expect(!r.trace.abort, c.id + ": run aborted");
    if (r.trace.abort || !r.trace.gap_set || !r.determination) continue;
    const bool incon = r.determination->label == Label::Inconclusive;
    o.expect(incon == !r.trace.gap_set->empty(), c.id + ": determination disagrees with gap set");
    inconclusive += incon ? 1 : 0;
  }
  o.summary = std::to_string(ctx.dataset.cases.size()) + " cases, " + std::to_string(inconclusive) +
              " inconclusive, 0 violations allowed";
  return o;
}

// Criterion 2
Outcome gap_oracle(const Context&) {
  Outcome o;
  // state 0 satisfied, 1 not relevant, 2 critical gap
  auto make = [](const std::vector<int>& states, Checklist& checklist, std::vector<Assessment>& as,
                 std::vector<std::string>& expected) {
    checklist = {};
    as.clear();
    expected.clear();
    for (std::size_t i = 0; i < states.size(); ++i) {
      const std::string id = "r" + std::to_string(i);
      checklist.items.push_back({id, ItemCategory::RequiredElement, "requirement " + id, "Act", "", ""});
      Assessment a;
      a.item_id = id;
      if (states[i] == 0) {
        a.status = AssessmentStatus::Satisfied;
        a.supporting_quote = "q";
      } else {
        a.status = AssessmentStatus::Unaddressed;
        a.criticality = states[i] == 2 ? Criticality::CriticalGap : Criticality::NotRelevant;
        expected.push_back(states[i] == 2 ? id : std::string());
      }
      as.push_back(a);
    }
    expected.erase(std::remove(expected.begin(), expected.end(), std::string()), expected.end());
  };
  auto ids = [](const GapSet& g) {
    std::vector<std::string> out;
    for (const auto& item : g.gaps) out.push_back(item.item_id);
    return out;
  };

  std::size_t exhaustive = 0;
  Checklist checklist;
  std::vector<Assessment> as;
  std::vector<std::string> expected;
  for (std::size_t n = 0; n <= 6; ++n) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<int> states(n);
      std::size_t rest = code;
      for (auto& s : states) {
        s = static_cast<int>(rest % 3);
        rest /= 3;
      }
      make(states, checklist, as, expected);
      o.expect(ids(compute_gap(checklist, as)) == expected, "exhaustive mismatch at n=" + std::to_string(n));
      std::reverse(as.begin(), as.end());
      o.expect(ids(compute_gap(checklist, as)) == expected, "order-dependent result at n=" + std::to_string(n));
      ++exhaustive;
    }
  }
  std::mt19937_64 rng(20240501);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<int> states(7 + rng() % 34);
    for (auto& s : states) s = static_cast<int>(rng() % 3);
    make(states, checklist, as, expected);
    std::shuffle(as.begin(), as.end(), rng);
    o.expect(ids(compute_gap(checklist, as)) == expected, "random mismatch in trial " + std::to_string(trial));
  }
  o.summary = std::to_string(exhaustive) + " exhaustive assignments (n <= 6), 10000 random instances";
  return o;
}

// Criterion 3
Outcome five_requirement_scenario(const Context& ctx) {
  Outcome o;
  const Dataset fig = load_dataset(kFixtures / "fig1_cases.json");
  auto rules = RuleEngine::load(ctx.corpus, fig.cases, kFixtures / "oracle_rules.json");
  auto backend = scripted_oracle({}, rules);
  const std::map<std::string, std::string> removed_requirement{
      {"five-minus-1",
       "the claimant used or was under the influence of a controlled substance on the employer's "
       "premises or during working hours"},
      {"five-minus-2", "the substance was not prescribed to the claimant by a licensed practitioner"},
      {"five-minus-3",
       "the employer maintained a written drug and alcohol policy communicated to the claimant before "
       "the incident"},
      {"five-minus-4", "a confirmatory test was performed by a certified laboratory"},
      {"five-minus-5", "the claimant was discharged as a result of the test result"}};
  int complete_ok = 0, removal_ok = 0;
  for (const auto& c : fig.cases) {
    const PipelineResult r = run_case(ctx, c, PipelineMode::Full, *backend);
    if (!r.determination) {
      o.expect(false, c.id + ": run aborted");
      continue;
    }
    if (c.withheld_facts.empty()) {
      const bool ok = r.determination->label == Label::Ineligible && r.determination->missing_information.empty();
      o.expect(ok, c.id + ": expected Ineligible");
      complete_ok += ok;
    } else {
      const std::vector<std::string> want{std::string(kNeededInformationPrefix) + removed_requirement.at(c.id)};
      const bool ok = r.determination->label == Label::Inconclusive && r.determination->missing_information == want;
      o.expect(ok, c.id + ": expected Inconclusive naming only the removed requirement, got [" +
                       joined(r.determination->missing_information) + "]");
      removal_ok += ok;
    }
  }
  o.expect(fig.cases.size() == 6 && removal_ok + complete_ok == 6, "fixture must hold one complete case and five removals");
  o.summary = "complete " + std::to_string(complete_ok) + "/1, single removals " +
              std::to_string(removal_ok) + "/5";
  return o;
}

// Criterion 4
Outcome missing_k_recovery(const Context& ctx) {
  Outcome o;
  auto backend = scripted_oracle({}, ctx.rules);
  const json expected = json::parse(text::read_file(kFixtures / "withheld_requirements.json"));
  std::size_t checked = 0, matched = 0;
  for (const auto& c : ctx.dataset.cases) {
    if (c.completeness == Completeness::Complete) continue;
    ++checked;
    const PipelineResult r = run_case(ctx, c, PipelineMode::Full, *backend);
    if (!r.determination) {
      o.expect(false, c.id + ": run aborted");
      continue;
    }
    std::multiset<std::string> got(r.determination->missing_information.begin(),
                                   r.determination->missing_information.end());
    std::multiset<std::string> want;
    for (const auto& t : expected.at(c.id)) want.insert(std::string(kNeededInformationPrefix) + t.get<std::string>());
    const bool ok = r.determination->label == Label::Inconclusive &&
                    got.size() == static_cast<std::size_t>(missing_count(c.completeness)) && got == want &&
                    want.size() == c.withheld_facts.size();
    o.expect(ok, c.id + ": missing information does not match the withheld facts");
    matched += ok;
  }
  o.summary = std::to_string(matched) + "/" + std::to_string(checked) + " Missing-k cases matched";
  return o;
}

// Criterion 5
Outcome ablation_structure(const Context& ctx) {
  Outcome o;
  std::size_t runs = 0;
  std::set<std::string> static_hashes_complete, static_hashes_gap;
  for (PipelineMode mode : all_modes()) {
    auto backend = scripted_oracle({}, ctx.rules);
    for (const auto& c : ctx.dataset.cases) {
      const PipelineResult r = run_case(ctx, c, mode, *backend);
      ++runs;
      const std::string tag = c.id + "/" + std::string(to_string(mode));
      if (r.trace.abort) {
        o.expect(false, tag + ": run aborted");
        continue;
      }
      const bool gap_empty = !r.trace.gap_set || r.trace.gap_set->empty();
      o.expect(r.trace.backend_calls() == expected_backend_calls(mode, gap_empty),
               tag + ": " + std::to_string(r.trace.backend_calls()) + " backend calls");
      if (mode == PipelineMode::StaticPrompting) {
        std::string hashes;
        for (const auto& s : r.trace.stages) hashes += std::string(to_string(s.stage)) + "=" + s.template_hash + ";";
        (gap_empty ? static_hashes_complete : static_hashes_gap).insert(hashes);
        o.expect(!r.trace.find_stage(Stage::Planner), tag + ": static mode called the planner");
      }
      if (mode == PipelineMode::SingleAgent) {
        std::size_t combined = 0, separate = 0;
        for (const auto& s : r.trace.stages) {
          combined += s.stage == Stage::Combined;
          separate += s.stage == Stage::Extract || s.stage == Stage::Verify || s.stage == Stage::Supervise ||
                      s.stage == Stage::ExtractVerify || s.stage == Stage::VerifySupervise;
        }
        o.expect(combined == 1 && separate == 0, tag + ": expected exactly one merged stage");
      }
    }
  }
  o.expect(static_hashes_complete.size() == 1 && static_hashes_gap.size() == 1,
           "static templates differ between cases");
  o.summary = std::to_string(runs) + " runs over " + std::to_string(all_modes().size()) +
              " modes, static template hash sets: " + std::to_string(static_hashes_complete.size()) + "+" +
              std::to_string(static_hashes_gap.size());
  return o;
}

std::vector<ScoredResult> synthetic(std::size_t n_complete, std::size_t correct_complete, std::size_t n_incon,
                                    std::size_t correct_incon, std::optional<Label> wrong_incon = Label::Ineligible) {
  std::vector<ScoredResult> out;
  for (std::size_t i = 0; i < n_complete; ++i) {
    CaseFile c;
    c.id = "c" + std::to_string(i);
    c.gold_label = Label::Eligible;
    out.push_back(score_case({c.id, i < correct_complete ? Label::Eligible : Label::Ineligible}, c));
  }
  for (std::size_t i = 0; i < n_incon; ++i) {
    CaseFile c;
    c.id = "m" + std::to_string(i);
    c.completeness = static_cast<Completeness>(1 + i % 4);
    c.withheld_facts.resize(static_cast<std::size_t>(missing_count(c.completeness)), "f");
    out.push_back(score_case({c.id, i < correct_incon ? std::optional(Label::Inconclusive) : wrong_incon}, c));
  }
  return out;
}

// Criterion 6
Outcome metrics_arithmetic(const Context&) {
  Outcome o;
  const double tol = 1e-9;
  const MetricsReport ten = aggregate_metrics(synthetic(9, 9, 1, 0), {false});
  o.expect(std::abs(ten.accuracy_all - 0.9) < tol && ten.accuracy_complete == 1.0 && ten.accuracy_inconclusive == 0.0,
           "9+1 fixture");
  const MetricsReport ones = aggregate_metrics(synthetic(7, 7, 5, 5), {false});
  o.expect(ones.accuracy_all == 1.0 && ones.accuracy_complete == 1.0 && ones.accuracy_inconclusive == 1.0,
           "all-correct fixture");

  const MetricsReport t = aggregate_metrics(synthetic(44, 39, 56, 50), {false});
  o.expect(std::abs(t.accuracy_all - 0.89) < tol, "accuracy_all != 0.89");
  o.expect(std::abs(*t.accuracy_complete - 39.0 / 44.0) < tol, "accuracy_complete != 39/44");
  o.expect(std::abs(*t.accuracy_inconclusive - 50.0 / 56.0) < tol, "accuracy_inconclusive != 50/56");
  o.expect(std::round(*t.accuracy_complete * 1000) == 886 && std::round(*t.accuracy_inconclusive * 1000) == 893,
           "three-decimal echo 0.886/0.893");
  for (double v : {t.accuracy_all, *t.accuracy_complete, *t.accuracy_inconclusive}) {
    o.expect(std::round(v * 100) == 89, "two-decimal echo 0.89");
  }

  const ErrorAnalysis e = error_analysis(synthetic(0, 0, 139, 45));
  const double rate = e.rates.count("false_denial") ? e.rates.at("false_denial") : -1.0;
  o.expect(e.false_denial == 94 && std::abs(rate - 94.0 / 139.0) < tol, "false denial rate != 94/139");
  o.expect(std::round(rate * 1000) == 676, "three-decimal echo 0.676");

  char buf[160];
  std::snprintf(buf, sizeof buf, "all %.3f, complete %.3f, inconclusive %.3f; false denial %zu/139 = %.3f",
                t.accuracy_all, *t.accuracy_complete, *t.accuracy_inconclusive, e.false_denial, rate);
  o.summary = buf;
  return o;
}

// Independent resampler: same generator, different arithmetic for the index.
Interval reference_ci(const std::vector<ScoredResult>& rs, std::size_t n, std::uint64_t seed) {
  std::uint64_t state = seed;
  auto next = [&] {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  auto high_product = [](std::uint64_t a, std::uint64_t b) {
    const std::uint64_t a0 = a & 0xFFFFFFFFULL, a1 = a >> 32, b0 = b & 0xFFFFFFFFULL, b1 = b >> 32;
    const std::uint64_t p00 = a0 * b0, p01 = a0 * b1, p10 = a1 * b0, p11 = a1 * b1;
    const std::uint64_t mid = (p00 >> 32) + (p10 & 0xFFFFFFFFULL) + (p01 & 0xFFFFFFFFULL);
    return p11 + (p10 >> 32) + (p01 >> 32) + (mid >> 32);
  };
  std::vector<double> values;
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rs.size(); ++i) hits += rs[high_product(next(), rs.size())].correct ? 1 : 0;
    values.push_back(static_cast<double>(hits) / static_cast<double>(rs.size()));
  }
  std::sort(values.begin(), values.end());
  auto pct = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
  };
  return {pct(0.025), pct(0.975)};
}

// Criterion 7
Outcome bootstrap_determinism(const Context&) {
  Outcome o;
  const std::vector<std::vector<ScoredResult>> sets{synthetic(20, 15, 0, 0), synthetic(44, 39, 56, 50),
                                                    synthetic(3, 1, 8, 2)};
  std::string detail;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const Interval got = bootstrap_ci(sets[i], accuracy_all, 1000, 42);
    const Interval want = reference_ci(sets[i], 1000, 42);
    o.expect(got.first == want.first && got.second == want.second,
             "set " + std::to_string(i + 1) + " differs from the reference resampler");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s[%.4f, %.4f]", i ? " " : "", got.first, got.second);
    detail += buf;
  }
  const Interval degenerate = bootstrap_ci(synthetic(12, 12, 0, 0), accuracy_all, 1000, 42);
  o.expect(degenerate == Interval{1.0, 1.0}, "all-correct set must give (1.0, 1.0)");
  o.summary = "3 sets bit-identical " + detail + "; degenerate (1.0, 1.0)";
  return o;
}

// Criterion 8
Outcome quote_verifiability(const Context& ctx) {
  Outcome o;
  std::size_t quotes = 0;
  for (PipelineMode mode : all_modes()) {
    if (is_single_pass(mode)) continue;
    auto backend = scripted_oracle({}, ctx.rules);
    for (const auto& c : ctx.dataset.cases) {
      const PipelineResult r = run_case(ctx, c, mode, *backend);
      std::vector<const std::vector<Assessment>*> sets;
      if (r.trace.assessments) sets.push_back(&*r.trace.assessments);
      if (r.trace.verdict) sets.push_back(&r.trace.verdict->final_assessments);
      for (const auto* as : sets) {
        for (const auto& a : *as) {
          if (a.status != AssessmentStatus::Satisfied) continue;
          ++quotes;
          o.expect(text::contains_normalized(c.narrative, a.supporting_quote),
                   c.id + ": quote not found for " + a.item_id);
        }
      }
    }
  }

  const CaseFile& target = *ctx.dataset.find("c01");
  auto clean = scripted_oracle({}, ctx.rules);
  const PipelineResult ok = run_case(ctx, target, PipelineMode::Full, *clean);
  json poisoned = json::parse(ok.trace.find_stage(Stage::Verify)->raw_text);
  for (auto& a : poisoned["assessments"]) {
    if (a["status"] == "satisfied") {
      a["supporting_quote"] = "The claimant produced a valid prescription at the hearing.";
      break;
    }
  }
  const std::string bad = poisoned.dump();
  auto poisoned_backend = scripted_oracle({{script_key(Stage::Verify, "c01"), {bad, bad, bad}}}, ctx.rules);
  const PipelineResult r = run_case(ctx, target, PipelineMode::Full, *poisoned_backend);
  const StageRecord* verify = r.trace.find_stage(Stage::Verify);
  const bool rejected = r.trace.abort && r.trace.abort->code == ErrorCode::SchemaViolation &&
                        r.trace.abort->stage == "verify" && verify != nullptr && verify->attempts.size() == 3;
  o.expect(rejected, "fabricated quote was not re-prompted and rejected with schema_violation");
  o.summary = std::to_string(quotes) + " satisfied quotes verified; fabricated quote rejected after " +
              std::to_string(verify ? verify->attempts.size() : 0) + " attempts";
  return o;
}

// Criterion 9
Outcome no_leakage(const Context& ctx) {
  Outcome o;
  std::size_t prompts = 0;
  for (PipelineMode mode : all_modes()) {
    auto backend = scripted_oracle({}, ctx.rules);
    for (const auto& c : ctx.dataset.cases) {
      const PipelineResult r = run_case(ctx, c, mode, *backend);
      const std::string gold_field = "\"label\": \"" + std::string(to_string(c.gold_label)) + "\"";
      for (const auto& s : r.trace.stages) {
        for (const std::string* p : {&s.system_prompt, &s.user_prompt}) {
          ++prompts;
          const std::string lower = text::to_lower_ascii(*p);
          for (const auto& f : c.withheld_facts) {
            o.expect(!text::contains_normalized(*p, f), c.id + ": withheld fact in a " +
                                                            std::string(to_string(s.stage)) + " prompt");
          }
          for (const char* field : {"_meta", "gold_label", "withheld_facts"}) {
            o.expect(p->find(field) == std::string::npos, c.id + ": field '" + field + "' in a prompt");
          }
          o.expect(lower.find(gold_field) == std::string::npos, c.id + ": gold label value in a prompt");
        }
      }
    }
  }
  o.summary = std::to_string(prompts) + " prompts scanned across all modes";
  return o;
}

// Criterion 10
Outcome parallel_determinism(const Context&) {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / ("gapgate-acceptance-" + std::to_string(::getpid()));
  std::map<std::size_t, std::string> reports;
  for (std::size_t workers : {std::size_t{1}, std::size_t{4}}) {
    RunConfig c = load_config(kFixtures / "config.toml");
    c.workers = workers;
    c.output_dir = root / ("w" + std::to_string(workers));
    std::ostringstream out, err;
    const int code = cli_evaluate(c, out, err);
    o.expect(code == kExitDetermination, "cli_evaluate exited " + std::to_string(code) + ": " + err.str());
    for (const auto& entry : fs::directory_iterator(c.output_dir)) {
      if (entry.path().string().ends_with(".report.json")) {
        reports[workers] = strip_timing(json::parse(text::read_file(entry.path()))).dump();
      }
    }
  }
  o.expect(reports.size() == 2 && !reports[1].empty() && reports[1] == reports[4],
           "report JSON differs between 1 and 4 workers");
  fs::remove_all(root);
  o.summary = "report JSON identical for workers = 1 and 4 (" + std::to_string(reports[1].size()) + " bytes)";
  return o;
}

struct Criterion {
  int number;
  const char* name;
  double limit_ms;  // 0 when no runtime bound applies
  std::function<Outcome(const Context&)> run;
};

}  // namespace

int main() {
  Context ctx;
  const std::vector<Criterion> criteria{
      {1, "gate soundness", 10000, gate_soundness},
      {2, "gap oracle equivalence", 5000, gap_oracle},
      {3, "five-requirement scenario", 5000, five_requirement_scenario},
      {4, "missing-k recovery", 0, missing_k_recovery},
      {5, "ablation structure", 0, ablation_structure},
      {6, "metrics arithmetic", 0, metrics_arithmetic},
      {7, "bootstrap determinism", 0, bootstrap_determinism},
      {8, "quote verifiability", 0, quote_verifiability},
      {9, "no-leakage scan", 0, no_leakage},
      {10, "parallel determinism", 0, parallel_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o.failures.push_back(std::string("exception: ") + e.what());
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_ms > 0 && ms >= c.limit_ms) {
      o.failures.push_back("runtime " + std::to_string(ms) + " ms exceeds " + std::to_string(c.limit_ms) + " ms");
    }
    const bool pass = o.failures.empty();
    failed += pass ? 0 : 1;
    std::printf("%s criterion %2d %-26s %8.1f ms  %s\n", pass ? "PASS" : "FAIL", c.number, c.name, ms,
                pass ? o.summary.c_str() : joined(o.failures).c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
