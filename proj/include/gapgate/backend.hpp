#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapgate/casefile.hpp"
#include "gapgate/error.hpp"
#include "gapgate/schemas.hpp"

namespace gapgate {

// Routing metadata that travels with a request. Provider adapters ignore it;
// the scripted oracle keys its answers on it. It carries only the redacted
// case view, never gold fields.
struct RequestContext {
  Stage stage = Stage::Planner;
  std::string mode;
  std::string case_id;
  std::string narrative;
  QuestionType question_type = QuestionType::EligibilityDetermination;
  std::vector<std::string> passage_ids;
  std::vector<Stage> active_stages;
};

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  SchemaId response_schema = SchemaId::FreeText;
  double temperature = 0.0;
  int max_output_tokens = 4096;
  RequestContext context;
};

struct Message {
  enum class Role { System, User, Assistant };
  Role role = Role::User;
  std::string content;
};

struct AttemptRecord {
  std::string raw_text;
  std::string rejection;  // empty when the attempt was accepted
  std::int64_t latency_ms = 0;
};

struct ChatResponse {
  std::string raw_text;
  std::optional<nlohmann::json> parsed;
  int attempts = 0;
  std::int64_t latency_ms = 0;
  std::vector<AttemptRecord> attempt_log;
};

enum class BackendKind { HttpProvider, ScriptedOracle };
enum class Provider { OpenAI, Anthropic, Gemini };

std::string_view to_string(BackendKind k);
std::string_view to_string(Provider p);
std::optional<Provider> parse_provider(std::string_view s);

struct BackendConfig {
  BackendKind kind = BackendKind::ScriptedOracle;
  Provider provider = Provider::OpenAI;
  std::string endpoint_url;
  std::string model_name;
  std::string auth_env_var;  // name of the variable, never the secret itself
  int timeout_ms = 60000;
  int max_parse_retries = 2;
  int transport_retries = 3;
  int backoff_initial_ms = 500;
  double requests_per_minute = 0.0;  // 0 disables rate limiting
  // Scripted oracle only.
  std::string script_path;
  std::string rules_path;
  bool rule_mode = true;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  // One model call. `conversation` starts with the system and user prompts
  // and, on repair attempts, continues with the rejected answer and the
  // validation feedback. Throws Error (ProviderError, Timeout,
  // UnknownScriptKey) on failure.
  virtual std::string send(const ChatRequest& request, std::span<const Message> conversation) = 0;
};

// Raised by complete() once retries are exhausted; keeps every attempt so the
// trace can show what was rejected and why.
class CompletionError : public Error {
 public:
  CompletionError(ErrorCode code, const std::string& message, std::string raw_output,
                  std::vector<AttemptRecord> attempts)
      : Error(code, message, std::move(raw_output)), attempts_(std::move(attempts)) {}
  const std::vector<AttemptRecord>& attempts() const noexcept { return attempts_; }

 private:
  std::vector<AttemptRecord> attempts_;
};

// Extra semantic check applied after schema validation; throws
// ValidationFailure to trigger a re-prompt.
using Validator = std::function<void(const nlohmann::json&)>;

// Sends the request, parses and validates the answer, and re-prompts with the
// validation error appended up to `max_parse_retries` times. Once retries are
// exhausted throws CompletionError carrying the last failure's code and raw output.
ChatResponse complete(Backend& backend, const ChatRequest& request, int max_parse_retries,
                      const Validator& validator = {});

// Token bucket shared by every request that goes through one backend.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;
  explicit RateLimiter(double requests_per_minute, double burst = 1.0);
  void acquire();
  // Non-blocking variant used by tests: returns the wait that acquire()
  // would need, and consumes a token when the wait is zero.
  Clock::duration try_acquire(Clock::time_point now);

 private:
  double rate_per_sec_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mutex_;
};

}  // namespace gapgate
