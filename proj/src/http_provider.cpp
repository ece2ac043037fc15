#include "gapgate/http_provider.hpp"

#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "gapgate/error.hpp"

namespace gapgate {

using nlohmann::json;

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "endpoint_url must be absolute: '" + url + "'");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::InvalidConfig, "endpoint_url scheme must be http or https: '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  ep.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (ep.origin.size() <= scheme_end + 3) {
    throw Error(ErrorCode::InvalidConfig, "endpoint_url has no host: '" + url + "'");
  }
  return ep;
}

namespace {

const char* role_name(Message::Role role, Provider provider) {
  switch (role) {
    case Message::Role::System: return "system";
    case Message::Role::User: return "user";
    case Message::Role::Assistant: return provider == Provider::Gemini ? "model" : "assistant";
  }
  return "user";
}

}  // namespace

json build_request_body(Provider provider, const std::string& model, const ChatRequest& request,
                        std::span<const Message> conversation) {
  switch (provider) {
    case Provider::OpenAI: {
      json messages = json::array();
      for (const auto& m : conversation) {
        messages.push_back({{"role", role_name(m.role, provider)}, {"content", m.content}});
      }
      json body{{"model", model},
                {"messages", messages},
                {"temperature", request.temperature},
                {"max_tokens", request.max_output_tokens}};
      if (request.response_schema != SchemaId::FreeText) {
        body["response_format"] = {{"type", "json_object"}};
      }
      return body;
    }
    case Provider::Anthropic: {
      std::string system;
      json messages = json::array();
      for (const auto& m : conversation) {
        if (m.role == Message::Role::System) {
          system += m.content;
        } else {
          messages.push_back({{"role", role_name(m.role, provider)}, {"content", m.content}});
        }
      }
      return json{{"model", model},
                  {"system", system},
                  {"messages", messages},
                  {"temperature", request.temperature},
                  {"max_tokens", request.max_output_tokens}};
    }
    case Provider::Gemini: {
      std::string system;
      json contents = json::array();
      for (const auto& m : conversation) {
        if (m.role == Message::Role::System) {
          system += m.content;
        } else {
          contents.push_back(
              {{"role", role_name(m.role, provider)}, {"parts", json::array({{{"text", m.content}}})}});
        }
      }
      json body{{"contents", contents},
                {"generationConfig",
                 {{"temperature", request.temperature},
                  {"maxOutputTokens", request.max_output_tokens}}}};
      if (!system.empty()) body["systemInstruction"] = {{"parts", json::array({{{"text", system}}})}};
      if (request.response_schema != SchemaId::FreeText) {
        body["generationConfig"]["responseMimeType"] = "application/json";
      }
      return body;
    }
  }
  return json::object();
}

std::string extract_text(Provider provider, const json& body) {
  try {
    switch (provider) {
      case Provider::OpenAI:
        return body.at("choices").at(0).at("message").at("content").get<std::string>();
      case Provider::Anthropic: {
        std::string out;
        for (const auto& block : body.at("content")) {
          if (block.value("type", "") == "text") out += block.at("text").get<std::string>();
        }
        return out;
      }
      case Provider::Gemini: {
        std::string out;
        for (const auto& part : body.at("candidates").at(0).at("content").at("parts")) {
          out += part.value("text", "");
        }
        return out;
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProviderError,
                std::string("unexpected ") + std::string(to_string(provider)) +
                    " response shape: " + e.what(),
                body.dump());
  }
  return {};
}

namespace {

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config)
      : config_(std::move(config)),
        endpoint_(split_url(config_.endpoint_url)),
        limiter_(config_.requests_per_minute) {
    if (config_.model_name.empty()) {
      throw Error(ErrorCode::InvalidConfig, "http backend needs a model_name");
    }
    if (!config_.auth_env_var.empty()) {
      const char* value = std::getenv(config_.auth_env_var.c_str());
      if (value == nullptr || *value == '\0') {
        throw Error(ErrorCode::InvalidConfig,
                    "credential environment variable '" + config_.auth_env_var + "' is not set");
      }
      credential_ = value;
    }
  }

  std::string name() const override {
    return std::string(to_string(config_.provider)) + ":" + config_.model_name;
  }

  std::string send(const ChatRequest& request, std::span<const Message> conversation) override {
    const std::string body =
        build_request_body(config_.provider, config_.model_name, request, conversation).dump();
    std::string path = endpoint_.path;
    httplib::Headers headers;
    switch (config_.provider) {
      case Provider::OpenAI:
        if (!credential_.empty()) headers.emplace("Authorization", "Bearer " + credential_);
        break;
      case Provider::Anthropic:
        if (!credential_.empty()) headers.emplace("x-api-key", credential_);
        headers.emplace("anthropic-version", "2023-06-01");
        break;
      case Provider::Gemini:
        if (!credential_.empty()) headers.emplace("x-goog-api-key", credential_);
        if (path.empty() || path.back() != '/') path += '/';
        path += "models/" + config_.model_name + ":generateContent";
        break;
    }

    int backoff_ms = config_.backoff_initial_ms;
    std::string last_error;
    bool timed_out = false;
    for (int attempt = 0; attempt <= config_.transport_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms *= 2;
      }
      limiter_.acquire();
      httplib::Client client(endpoint_.origin);
      const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      auto result = client.Post(path, headers, body, "application/json");
      if (!result) {
        timed_out = result.error() == httplib::Error::Read ||
                    result.error() == httplib::Error::ConnectionTimeout;
        last_error = "transport error: " + httplib::to_string(result.error());
        continue;
      }
      timed_out = false;
      const int status = result->status;
      if (status == 429 || status >= 500) {
        last_error = "HTTP " + std::to_string(status) + ": " + result->body;
        continue;
      }
      if (status < 200 || status >= 300) {
        throw Error(ErrorCode::ProviderError,
                    name() + " returned HTTP " + std::to_string(status), result->body);
      }
      json parsed;
      try {
        parsed = json::parse(result->body);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ProviderError, name() + " returned non-JSON body", result->body);
      }
      return extract_text(config_.provider, parsed);
    }
    throw Error(timed_out ? ErrorCode::Timeout : ErrorCode::ProviderError,
                name() + " failed after " + std::to_string(config_.transport_retries + 1) +
                    " attempt(s): " + last_error);
  }

 private:
  BackendConfig config_;
  Endpoint endpoint_;
  RateLimiter limiter_;
  std::string credential_;
};

}  // namespace

std::shared_ptr<Backend> make_http_backend(const BackendConfig& config) {
  return std::make_shared<HttpBackend>(config);
}

}  // namespace gapgate
