#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include <json.hpp>

#include "gapgate/backend.hpp"
#include "gapgate/casefile.hpp"
#include "gapgate/corpus.hpp"
#include "gapgate/oracle.hpp"
#include "gapgate/text.hpp"

namespace testing {

inline std::filesystem::path fixtures() { return GAPGATE_FIXTURES; }

inline const gapgate::Corpus& fixture_corpus() {
  static const gapgate::Corpus corpus = gapgate::load_corpus(fixtures() / "corpus");
  return corpus;
}

inline const gapgate::Dataset& fixture_dataset() {
  static const gapgate::Dataset dataset = gapgate::load_dataset(fixtures() / "dataset.json");
  return dataset;
}

inline std::shared_ptr<const gapgate::RuleEngine> rules_for(const gapgate::Dataset& dataset) {
  return gapgate::RuleEngine::load(fixture_corpus(), dataset.cases, fixtures() / "oracle_rules.json");
}

inline std::shared_ptr<gapgate::Backend> rule_oracle(gapgate::Script script = {}) {
  return gapgate::scripted_oracle(std::move(script), rules_for(fixture_dataset()));
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  return nlohmann::json::parse(gapgate::text::read_file(p));
}

// Backend driven by a callback; counts calls.
class FakeBackend final : public gapgate::Backend {
 public:
  using Handler =
      std::function<std::string(const gapgate::ChatRequest&, std::span<const gapgate::Message>)>;
  explicit FakeBackend(Handler h) : handler_(std::move(h)) {}
  std::string name() const override { return "fake"; }
  std::string send(const gapgate::ChatRequest& r, std::span<const gapgate::Message> c) override {
    ++calls;
    return handler_(r, c);
  }
  int calls = 0;

 private:
  Handler handler_;
};

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("gapgate-test-" + name + "-" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
