#include "gapgate/config.hpp"

#include <set>
#include <sstream>

#include <toml.hpp>

#include "gapgate/casefile.hpp"
#include "gapgate/error.hpp"
#include "gapgate/http_provider.hpp"
#include "gapgate/oracle.hpp"
#include "gapgate/text.hpp"

namespace gapgate {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) bad("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad(std::string("config key '") + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

json toml_to_json(const std::string& toml_text, const std::string& source) {
  try {
    const toml::table table = toml::parse(toml_text, source);
    std::ostringstream out;
    out << toml::json_formatter{table};
    return json::parse(out.str());
  } catch (const toml::parse_error& e) {
    bad(source + ": " + std::string(e.description()));
  }
}

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) bad("config must be an object");
  reject_unknown(doc,
                 {"corpus_path", "dataset_path", "mode", "backend", "retrieval_k", "workers", "seed",
                  "bootstrap_resamples", "output_dir"},
                 "config");
  RunConfig c;
  c.corpus_path = resolve(base_dir, get<std::string>(doc, "corpus_path", ""));
  c.dataset_path = resolve(base_dir, get<std::string>(doc, "dataset_path", ""));
  const auto mode = get<std::string>(doc, "mode", "full");
  const auto parsed_mode = parse_mode(mode);
  if (!parsed_mode) bad("unknown mode '" + mode + "'");
  c.mode = *parsed_mode;
  const auto k = get<std::int64_t>(doc, "retrieval_k", static_cast<std::int64_t>(kDefaultRetrievalK));
  const auto workers = get<std::int64_t>(doc, "workers", 1);
  const auto resamples = get<std::int64_t>(doc, "bootstrap_resamples", 1000);
  if (k < 1) bad("retrieval_k must be at least 1");
  if (workers < 1) bad("workers must be at least 1");
  if (resamples < 1) bad("bootstrap_resamples must be at least 1");
  c.retrieval_k = static_cast<std::size_t>(k);
  c.workers = static_cast<std::size_t>(workers);
  c.bootstrap_resamples = static_cast<std::size_t>(resamples);
  c.seed = static_cast<std::uint64_t>(get<std::int64_t>(doc, "seed", 42));
  c.output_dir = resolve(base_dir, get<std::string>(doc, "output_dir", "out"));

  const json backend = doc.value("backend", json::object());
  if (!backend.is_object()) bad("[backend] must be a table");
  reject_unknown(backend,
                 {"kind", "provider", "endpoint_url", "model_name", "auth_env_var", "timeout_ms",
                  "max_parse_retries", "transport_retries", "backoff_initial_ms",
                  "requests_per_minute", "script_path", "rules_path", "rule_mode"},
                 "[backend]");
  BackendConfig& b = c.backend;
  const auto kind = get<std::string>(backend, "kind", "scripted");
  if (kind == "scripted") b.kind = BackendKind::ScriptedOracle;
  else if (kind == "http") b.kind = BackendKind::HttpProvider;
  else bad("unknown backend kind '" + kind + "' (expected scripted or http)");
  const auto provider = get<std::string>(backend, "provider", "openai");
  const auto parsed_provider = parse_provider(provider);
  if (!parsed_provider) bad("unknown provider '" + provider + "'");
  b.provider = *parsed_provider;
  b.endpoint_url = get<std::string>(backend, "endpoint_url", "");
  b.model_name = get<std::string>(backend, "model_name", "");
  b.auth_env_var = get<std::string>(backend, "auth_env_var", "");
  b.timeout_ms = get<int>(backend, "timeout_ms", b.timeout_ms);
  b.max_parse_retries = get<int>(backend, "max_parse_retries", b.max_parse_retries);
  b.transport_retries = get<int>(backend, "transport_retries", b.transport_retries);
  b.backoff_initial_ms = get<int>(backend, "backoff_initial_ms", b.backoff_initial_ms);
  b.requests_per_minute = get<double>(backend, "requests_per_minute", b.requests_per_minute);
  b.script_path = resolve(base_dir, get<std::string>(backend, "script_path", "")).string();
  b.rules_path = resolve(base_dir, get<std::string>(backend, "rules_path", "")).string();
  b.rule_mode = get<bool>(backend, "rule_mode", b.rule_mode);
  if (b.max_parse_retries < 0 || b.transport_retries < 0 || b.timeout_ms <= 0) {
    bad("retry counts must be non-negative and timeout_ms positive");
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  const std::string content = text::read_file(path);
  json doc;
  if (path.extension() == ".toml") {
    doc = toml_to_json(content, path.string());
  } else {
    try {
      doc = json::parse(content);
    } catch (const json::parse_error& e) {
      bad(path.string() + ": " + e.what());
    }
  }
  return parse_config(doc, fs::absolute(path).parent_path());
}

void apply_overrides(RunConfig& config, const ConfigOverrides& o) {
  if (o.mode) {
    const auto mode = parse_mode(*o.mode);
    if (!mode) bad("unknown mode '" + *o.mode + "'");
    config.mode = *mode;
  }
  if (o.backend) {
    if (*o.backend == "scripted") {
      config.backend.kind = BackendKind::ScriptedOracle;
    } else if (*o.backend == "http") {
      config.backend.kind = BackendKind::HttpProvider;
    } else if (const auto provider = parse_provider(*o.backend)) {
      config.backend.kind = BackendKind::HttpProvider;
      config.backend.provider = *provider;
    } else {
      bad("unknown backend '" + *o.backend + "' (expected scripted, http, openai, anthropic or gemini)");
    }
  }
  if (o.seed) config.seed = *o.seed;
  if (o.workers) {
    if (*o.workers < 1) bad("workers must be at least 1");
    config.workers = *o.workers;
  }
  if (o.output_dir) config.output_dir = *o.output_dir;
}

void validate_config(const RunConfig& c, bool require_dataset) {
  auto must_exist = [](const fs::path& p, const std::string& what) {
    if (p.empty()) bad(what + " is not set");
    if (!fs::exists(p)) bad(what + " '" + p.string() + "' does not exist");
  };
  must_exist(c.corpus_path, "corpus_path");
  if (require_dataset || !c.dataset_path.empty()) must_exist(c.dataset_path, "dataset_path");
  if (c.workers < 1) bad("workers must be at least 1");
  const BackendConfig& b = c.backend;
  if (b.kind == BackendKind::ScriptedOracle) {
    if (!b.script_path.empty()) must_exist(b.script_path, "backend.script_path");
    if (b.rule_mode) {
      must_exist(b.rules_path, "backend.rules_path");
      must_exist(c.dataset_path, "dataset_path (needed by the rule oracle)");
    } else if (b.script_path.empty()) {
      bad("a scripted backend needs script_path, rule_mode, or both");
    }
  } else {
    if (b.endpoint_url.empty()) bad("backend.endpoint_url is not set");
    if (b.model_name.empty()) bad("backend.model_name is not set");
  }
}

std::string backend_label(const BackendConfig& b) {
  if (b.kind == BackendKind::ScriptedOracle) return b.rule_mode ? "rule-oracle" : "scripted";
  std::string label = std::string(to_string(b.provider)) + "-" + b.model_name;
  for (char& ch : label) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.') ch = '_';
  }
  return label;
}

std::shared_ptr<Backend> make_backend(const RunConfig& c, const Corpus& corpus) {
  const BackendConfig& b = c.backend;
  if (b.kind == BackendKind::HttpProvider) return make_http_backend(b);
  Script script;
  if (!b.script_path.empty()) script = load_script(b.script_path);
  std::shared_ptr<const RuleEngine> rules;
  if (b.rule_mode) rules = RuleEngine::load(corpus, load_dataset(c.dataset_path).cases, b.rules_path);
  return scripted_oracle(std::move(script), std::move(rules));
}

}  // namespace gapgate
