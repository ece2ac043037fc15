#include "gapgate/backend.hpp"

#include <algorithm>
#include <thread>

#include "gapgate/error.hpp"

namespace gapgate {

using nlohmann::json;

std::string_view to_string(BackendKind k) {
  return k == BackendKind::HttpProvider ? "http" : "scripted";
}

std::string_view to_string(Provider p) {
  switch (p) {
    case Provider::OpenAI: return "openai";
    case Provider::Anthropic: return "anthropic";
    case Provider::Gemini: return "gemini";
  }
  return "openai";
}

std::optional<Provider> parse_provider(std::string_view s) {
  if (s == "openai") return Provider::OpenAI;
  if (s == "anthropic") return Provider::Anthropic;
  if (s == "gemini") return Provider::Gemini;
  return std::nullopt;
}

ChatResponse complete(Backend& backend, const ChatRequest& request, int max_parse_retries,
                      const Validator& validator) {
  std::vector<Message> conversation{{Message::Role::System, request.system_prompt},
                                    {Message::Role::User, request.user_prompt}};
  ChatResponse response;
  const int max_attempts = std::max(0, max_parse_retries) + 1;
  ErrorCode last_code = ErrorCode::SchemaViolation;
  std::string last_error;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    std::string raw = backend.send(request, conversation);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    response.attempts = attempt;
    response.latency_ms += elapsed;
    response.raw_text = raw;

    if (request.response_schema == SchemaId::FreeText) {
      response.attempt_log.push_back({raw, {}, elapsed});
      return response;
    }

    std::string rejection;
    try {
      json parsed = json::parse(raw);
      validate_schema(request.response_schema, parsed);
      if (validator) validator(parsed);
      response.parsed = std::move(parsed);
      response.attempt_log.push_back({raw, {}, elapsed});
      return response;
    } catch (const json::parse_error& e) {
      last_code = ErrorCode::SchemaViolation;
      rejection = std::string("response is not valid JSON: ") + e.what();
    } catch (const ValidationFailure& e) {
      last_code = e.code();
      rejection = e.what();
    }
    last_error = rejection;
    response.attempt_log.push_back({raw, rejection, elapsed});
    conversation.push_back({Message::Role::Assistant, raw});
    conversation.push_back(
        {Message::Role::User,
         "Your previous response was rejected: " + rejection +
             "\nRespond again with a single JSON object that satisfies the required schema "
             "and nothing else."});
  }
  throw CompletionError(last_code,
                        std::string(to_string(request.context.stage)) + " output rejected after " +
                            std::to_string(max_attempts) + " attempt(s): " + last_error,
                        response.raw_text, std::move(response.attempt_log));
}

RateLimiter::RateLimiter(double requests_per_minute, double burst)
    : rate_per_sec_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(Clock::now()) {}

RateLimiter::Clock::duration RateLimiter::try_acquire(Clock::time_point now) {
  std::lock_guard lock(mutex_);
  if (rate_per_sec_ <= 0.0) return Clock::duration::zero();
  if (now > last_) {
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_sec_);
    last_ = now;
  }
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return Clock::duration::zero();
  }
  const double wait_sec = (1.0 - tokens_) / rate_per_sec_;
  return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(wait_sec));
}

void RateLimiter::acquire() {
  for (;;) {
    const auto wait = try_acquire(Clock::now());
    if (wait == Clock::duration::zero()) return;
    std::this_thread::sleep_for(wait);
  }
}

}  // namespace gapgate
