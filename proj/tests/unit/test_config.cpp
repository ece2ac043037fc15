#include <doctest.h>

#include <fstream>

#include "gapgate/config.hpp"
#include "gapgate/error.hpp"
#include "helpers.hpp"

using namespace gapgate;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("fixture TOML config loads with paths relative to the file") {
  const RunConfig c = load_config(testing::fixtures() / "config.toml");
  CHECK(c.corpus_path == testing::fixtures() / "corpus");
  CHECK(c.dataset_path == testing::fixtures() / "dataset.json");
  CHECK(c.mode == PipelineMode::Full);
  CHECK(c.retrieval_k == 8);
  CHECK(c.seed == 42);
  CHECK(c.backend.kind == BackendKind::ScriptedOracle);
  CHECK(c.backend.rule_mode);
  CHECK(c.backend.rules_path == (testing::fixtures() / "oracle_rules.json").string());
  CHECK_NOTHROW(validate_config(c, true));
  CHECK(backend_label(c.backend) == "rule-oracle");
}

TEST_CASE("JSON and TOML configs are equivalent") {
  const fs::path dir = testing::temp_dir("config");
  write(dir / "a.toml", "mode = \"static\"\nworkers = 3\n[backend]\nkind = \"http\"\nprovider = \"anthropic\"\n"
                        "endpoint_url = \"https://x/v1/messages\"\nmodel_name = \"m\"\n");
  write(dir / "a.json", R"({"mode": "static", "workers": 3, "backend": {"kind": "http", "provider": "anthropic",
    "endpoint_url": "https://x/v1/messages", "model_name": "m"}})");
  const RunConfig t = load_config(dir / "a.toml");
  const RunConfig j = load_config(dir / "a.json");
  CHECK(t.mode == PipelineMode::StaticPrompting);
  CHECK(t.workers == 3);
  CHECK(j.workers == 3);
  CHECK(t.backend.provider == Provider::Anthropic);
  CHECK(j.backend.provider == Provider::Anthropic);
  CHECK(backend_label(t.backend) == backend_label(j.backend));
  CHECK(t.output_dir == dir / "out");
  fs::remove_all(dir);
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK(code_of([] { parse_config(json::parse(R"({"modes": "full"})"), "."); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config(json::parse(R"({"backend": {"kind": "scripted", "extra": 1}})"), "."); }) ==
        ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config(json::parse(R"({"mode": "fastest"})"), "."); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config(json::parse(R"({"workers": 0})"), "."); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config(json::parse(R"({"retrieval_k": "eight"})"), "."); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config(json::parse(R"({"backend": {"kind": "local"}})"), "."); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config(json::parse(R"({"backend": {"provider": "acme"}})"), "."); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config(json::array(), "."); }) == ErrorCode::InvalidConfig);

  const fs::path dir = testing::temp_dir("config-bad");
  write(dir / "bad.toml", "mode = \n");
  CHECK(code_of([&] { load_config(dir / "bad.toml"); }) == ErrorCode::InvalidConfig);
  write(dir / "bad.json", "{");
  CHECK(code_of([&] { load_config(dir / "bad.json"); }) == ErrorCode::InvalidConfig);
  fs::remove_all(dir);
}

TEST_CASE("command-line overrides win") {
  RunConfig c = load_config(testing::fixtures() / "config.toml");
  apply_overrides(c, ConfigOverrides{"no-supervisor", std::nullopt, 7, 4, fs::path("/tmp/o")});
  CHECK(c.mode == PipelineMode::NoSupervisor);
  CHECK(c.seed == 7);
  CHECK(c.workers == 4);
  CHECK(c.output_dir == "/tmp/o");

  apply_overrides(c, ConfigOverrides{std::nullopt, std::string("gemini"), std::nullopt, std::nullopt, std::nullopt});
  CHECK(c.backend.kind == BackendKind::HttpProvider);
  CHECK(c.backend.provider == Provider::Gemini);
  apply_overrides(c, ConfigOverrides{std::nullopt, std::string("scripted"), std::nullopt, std::nullopt, std::nullopt});
  CHECK(c.backend.kind == BackendKind::ScriptedOracle);

  CHECK(code_of([&] { apply_overrides(c, ConfigOverrides{"bogus", {}, {}, {}, {}}); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { apply_overrides(c, ConfigOverrides{{}, std::string("acme"), {}, {}, {}}); }) ==
        ErrorCode::InvalidConfig);
  CHECK(code_of([&] { apply_overrides(c, ConfigOverrides{{}, {}, {}, std::size_t{0}, {}}); }) ==
        ErrorCode::InvalidConfig);
}

TEST_CASE("validation checks the files each backend needs") {
  const RunConfig base = load_config(testing::fixtures() / "config.toml");

  RunConfig missing_corpus = base;
  missing_corpus.corpus_path = "/nonexistent/corpus";
  CHECK(code_of([&] { validate_config(missing_corpus, false); }) == ErrorCode::InvalidConfig);

  RunConfig no_dataset = base;
  no_dataset.dataset_path.clear();
  no_dataset.backend.rule_mode = false;
  no_dataset.backend.script_path = (testing::fixtures() / "scripts" / "always_eligible.json").string();
  CHECK_NOTHROW(validate_config(no_dataset, false));
  CHECK(code_of([&] { validate_config(no_dataset, true); }) == ErrorCode::InvalidConfig);

  RunConfig rules_without_dataset = base;
  rules_without_dataset.dataset_path.clear();
  CHECK(code_of([&] { validate_config(rules_without_dataset, false); }) == ErrorCode::InvalidConfig);

  RunConfig nothing = base;
  nothing.backend.rule_mode = false;
  nothing.backend.script_path.clear();
  CHECK(code_of([&] { validate_config(nothing, false); }) == ErrorCode::InvalidConfig);

  RunConfig http = load_config(testing::fixtures() / "config_openai.example.toml");
  CHECK_NOTHROW(validate_config(http, true));
  CHECK(backend_label(http.backend) == "openai-gpt-4o");
  http.backend.model_name.clear();
  CHECK(code_of([&] { validate_config(http, true); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("make_backend builds the configured oracle") {
  const RunConfig c = load_config(testing::fixtures() / "config.toml");
  auto rule = make_backend(c, testing::fixture_corpus());
  CHECK(rule->name() == "rule-oracle");
  const RunConfig s = load_config(testing::fixtures() / "config_always_eligible.toml");
  auto scripted = make_backend(s, testing::fixture_corpus());
  CHECK(scripted->name() == "scripted-oracle");
  CHECK(backend_label(s.backend) == "scripted");
}
