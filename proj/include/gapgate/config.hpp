#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "gapgate/backend.hpp"
#include "gapgate/corpus.hpp"
#include "gapgate/pipeline.hpp"

namespace gapgate {

struct RunConfig {
  std::filesystem::path corpus_path;
  std::filesystem::path dataset_path;  // optional for adjudicate and serve
  PipelineMode mode = PipelineMode::Full;
  BackendConfig backend;
  std::size_t retrieval_k = kDefaultRetrievalK;
  std::size_t workers = 1;
  std::uint64_t seed = 42;
  std::size_t bootstrap_resamples = 1000;
  std::filesystem::path output_dir = "out";
};

// Relative paths resolve against `base_dir`. Unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

// TOML when the extension is .toml, JSON otherwise.
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json toml_to_json(const std::string& toml_text, const std::string& source);

// Command-line values that take precedence over the file.
struct ConfigOverrides {
  std::optional<std::string> mode;
  std::optional<std::string> backend;  // "scripted", "http", or a provider name
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::filesystem::path> output_dir;
};

void apply_overrides(RunConfig& config, const ConfigOverrides& overrides);

// Throws InvalidConfig when a referenced path is missing or a value is out of
// range. `require_dataset` is set by the evaluation commands.
void validate_config(const RunConfig& config, bool require_dataset);

// Short label used in output file names.
std::string backend_label(const BackendConfig& config);

// Scripted backends load their script and, in rule mode, ground truth from
// the dataset named in the config.
std::shared_ptr<Backend> make_backend(const RunConfig& config, const Corpus& corpus);

}  // namespace gapgate
