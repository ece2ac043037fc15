#include <doctest.h>

#include <fstream>
#include <sstream>

#include "gapgate/error.hpp"
#include "gapgate/runner.hpp"
#include "helpers.hpp"

using namespace gapgate;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunConfig fixture_config(const fs::path& out, const std::string& file = "config.toml") {
  RunConfig c = load_config(testing::fixtures() / file);
  c.output_dir = out;
  c.bootstrap_resamples = 100;
  return c;
}

}  // namespace

TEST_CASE("run stems embed mode, backend and dataset hash") {
  CHECK(run_stem(PipelineMode::NoExtractor, "rule-oracle", "abc123") == "no-extractor__rule-oracle__abc123");
  const Workspace ws = open_workspace(fixture_config(testing::temp_dir("ws")), true);
  CHECK(ws.dataset_hash.size() == 12);
  CHECK(ws.dataset_hash == text::sha256_hex(text::read_file(testing::fixtures() / "dataset.json")).substr(0, 12));
  CHECK(ws.corpus.size() == 12);
  CHECK(ws.dataset->cases.size() == 20);
}

TEST_CASE("adjudicate exit codes and output") {
  const fs::path out = testing::temp_dir("adj");
  const RunConfig c = fixture_config(out);
  std::ostringstream o, e;
  CHECK(cli_adjudicate(c, {std::string("c01"), {}, {}}, o, e) == kExitDetermination);
  CHECK(o.str().find("Determination: Ineligible") != std::string::npos);
  CHECK(o.str().find("stat-substance") != std::string::npos);
  CHECK(o.str().find("Needed:") == std::string::npos);
  CHECK(fs::exists(out / "traces" / "adjudicate"));

  std::ostringstream o2, e2;
  CHECK(cli_adjudicate(c, {std::string("m2-02"), {}, {}}, o2, e2) == kExitInconclusive);
  CHECK(o2.str().find("Determination: Inconclusive") != std::string::npos);
  std::size_t needed = 0;
  for (std::size_t p = o2.str().find("Needed: Provide facts establishing: "); p != std::string::npos;
       p = o2.str().find("Needed: ", p + 1)) {
    ++needed;
  }
  CHECK(needed == 2);

  std::ostringstream o3, e3;
  CHECK(cli_adjudicate(c, {std::string("nope"), {}, {}}, o3, e3) == kExitError);
  CHECK(e3.str().find("nope") != std::string::npos);

  std::ostringstream o4, e4;
  CHECK(cli_adjudicate(c, {{}, {}, {}}, o4, e4) == kExitError);

  // Narrative not in the dataset: the rule oracle has no ground truth.
  std::ostringstream o5, e5;
  CHECK(cli_adjudicate(c, {{}, std::string("A claimant was laid off when the plant closed."),
                           QuestionType::EligibilityDetermination},
                       o5, e5) == kExitError);
  CHECK(e5.str().find("unknown_script_key") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("evaluate writes results, reports and traces") {
  const fs::path out = testing::temp_dir("eval");
  const RunConfig c = fixture_config(out);
  std::ostringstream o, e;
  REQUIRE(cli_evaluate(c, o, e) == kExitDetermination);
  const Workspace ws = open_workspace(c, true);
  const std::string stem = run_stem(PipelineMode::Full, "rule-oracle", ws.dataset_hash);
  for (const char* ext : {".results.json", ".report.json", ".report.md", ".report.csv"}) {
    CHECK(fs::exists(out / (stem + ext)));
  }
  std::size_t traces = 0;
  for (const auto& entry : fs::directory_iterator(out / "traces" / stem)) traces += entry.is_regular_file();
  CHECK(traces == 20);
  const MetricsReport report = report_from_json(testing::read_json(out / (stem + ".report.json")));
  CHECK(report.accuracy_all == 1.0);
  CHECK(report.n_total == 20);
  CHECK(results_from_json(testing::read_json(out / (stem + ".results.json"))).size() == 20);
  CHECK(o.str().find("All Cases") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("worker count does not change results") {
  const Workspace ws = open_workspace(fixture_config(testing::temp_dir("workers")), true);
  const EvaluationRun one = evaluate_dataset(ws, PipelineMode::Full, 1);
  const EvaluationRun four = evaluate_dataset(ws, PipelineMode::Full, 4);
  CHECK(one.results == four.results);
  CHECK(one.report == four.report);
  REQUIRE(one.runs.size() == four.runs.size());
  for (std::size_t i = 0; i < one.runs.size(); ++i) {
    CHECK(one.runs[i].trace.case_id == ws.dataset->cases[i].id);
    CHECK(strip_timing(to_json(one.runs[i].trace)).dump() == strip_timing(to_json(four.runs[i].trace)).dump());
  }
}

TEST_CASE("always-eligible baseline fails every inconclusive case") {
  const fs::path out = testing::temp_dir("always");
  const RunConfig c = fixture_config(out, "config_always_eligible.toml");
  const Workspace ws = open_workspace(c, true);
  const EvaluationRun run = evaluate_dataset(ws, PipelineMode::Baseline, 2);
  CHECK(run.aborted == 0);
  CHECK(run.report.accuracy_inconclusive == 0.0);
  CHECK(run.report.error_breakdown.at(ErrorKind::FalseApproval) == 11);
  fs::remove_all(out);
}

TEST_CASE("more than ten percent aborted cases exits 2") {
  const fs::path out = testing::temp_dir("partial");
  std::ofstream(out / "script.json") << R"({"baseline/c01": "Determination: Ineligible."})";
  RunConfig c = fixture_config(out, "config_always_eligible.toml");
  c.backend.script_path = (out / "script.json").string();
  std::ostringstream o, e;
  CHECK(cli_evaluate(c, o, e) == kExitPartialFailure);
  CHECK(e.str().find("19 of 20") != std::string::npos);

  const Workspace ws = open_workspace(c, true);
  const EvaluationRun run = evaluate_dataset(ws, PipelineMode::Baseline, 1);
  CHECK(run.aborted == 19);
  CHECK(run.report.error_breakdown.at(ErrorKind::Unparseable) == 19);
  fs::remove_all(out);
}

TEST_CASE("evaluate without a usable config exits 1") {
  RunConfig c = fixture_config(testing::temp_dir("bad"));
  c.dataset_path = "/nonexistent.json";
  std::ostringstream o, e;
  CHECK(cli_evaluate(c, o, e) == kExitError);
}

TEST_CASE("ablate compares every mode") {
  const fs::path out = testing::temp_dir("ablate");
  const RunConfig c = fixture_config(out);
  std::ostringstream o, e;
  REQUIRE(cli_ablate(c, o, e) == kExitDetermination);
  std::size_t rows = 0;
  std::istringstream in(o.str());
  for (std::string line; std::getline(in, line);) rows += line.starts_with("| ") && !line.starts_with("| Configuration") && !line.starts_with("| ---") ? 1 : 0;
  CHECK(rows == all_modes().size());
  const Workspace ws = open_workspace(c, true);
  const json summary = testing::read_json(out / ("ablation__rule-oracle__" + ws.dataset_hash + ".json"));
  REQUIRE(summary.size() == all_modes().size());
  for (const auto& entry : summary) {
    const PipelineMode mode = *parse_mode(entry["mode"].get<std::string>());
    for (const auto& c_ : ws.dataset->cases) {
      const std::size_t calls = entry["backend_calls"][c_.id];
      CHECK(calls == expected_backend_calls(mode, c_.withheld_facts.empty() || is_single_pass(mode)));
    }
  }
  fs::remove_all(out);
}
