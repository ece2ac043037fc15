#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "gapgate/error.hpp"
#include "gapgate/http_provider.hpp"

using namespace gapgate;
using nlohmann::json;

namespace {

ChatRequest request(SchemaId schema = SchemaId::DeterminationOutput) {
  ChatRequest r;
  r.system_prompt = "S";
  r.user_prompt = "U";
  r.response_schema = schema;
  r.max_output_tokens = 100;
  return r;
}

const std::vector<Message> kConversation{{Message::Role::System, "S"},
                                         {Message::Role::User, "U"},
                                         {Message::Role::Assistant, "A"},
                                         {Message::Role::User, "fix"}};

// Local server standing in for a provider endpoint.
struct MockServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~MockServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port) + path;
  }
};

BackendConfig http_config(Provider p, const std::string& url) {
  BackendConfig c;
  c.kind = BackendKind::HttpProvider;
  c.provider = p;
  c.endpoint_url = url;
  c.model_name = "m1";
  c.backoff_initial_ms = 1;
  c.transport_retries = 2;
  c.timeout_ms = 2000;
  return c;
}

}  // namespace

TEST_CASE("split_url") {
  const Endpoint e = split_url("https://api.example.com/v1/chat/completions");
  CHECK(e.origin == "https://api.example.com");
  CHECK(e.path == "/v1/chat/completions");
  CHECK(split_url("http://localhost:8080").path == "/");
  CHECK_THROWS_AS(split_url("api.example.com/v1"), Error);
  CHECK_THROWS_AS(split_url("ftp://host/x"), Error);
  CHECK_THROWS_AS(split_url("http:///x"), Error);
}

TEST_CASE("openai request body") {
  const json b = build_request_body(Provider::OpenAI, "m1", request(), kConversation);
  CHECK(b["model"] == "m1");
  REQUIRE(b["messages"].size() == 4);
  CHECK(b["messages"][0] == json{{"role", "system"}, {"content", "S"}});
  CHECK(b["messages"][2]["role"] == "assistant");
  CHECK(b["temperature"] == 0.0);
  CHECK(b["max_tokens"] == 100);
  CHECK(b["response_format"]["type"] == "json_object");
  CHECK_FALSE(build_request_body(Provider::OpenAI, "m1", request(SchemaId::FreeText), kConversation)
                  .contains("response_format"));
}

TEST_CASE("anthropic request body moves the system prompt out of messages") {
  const json b = build_request_body(Provider::Anthropic, "m1", request(), kConversation);
  CHECK(b["system"] == "S");
  REQUIRE(b["messages"].size() == 3);
  CHECK(b["messages"][0]["role"] == "user");
  CHECK(b["messages"][1]["role"] == "assistant");
  CHECK(b["max_tokens"] == 100);
}

TEST_CASE("gemini request body") {
  const json b = build_request_body(Provider::Gemini, "m1", request(), kConversation);
  CHECK(b["systemInstruction"]["parts"][0]["text"] == "S");
  REQUIRE(b["contents"].size() == 3);
  CHECK(b["contents"][1]["role"] == "model");
  CHECK(b["contents"][0]["parts"][0]["text"] == "U");
  CHECK(b["generationConfig"]["maxOutputTokens"] == 100);
  CHECK(b["generationConfig"]["responseMimeType"] == "application/json");
}

TEST_CASE("extract_text per provider") {
  CHECK(extract_text(Provider::OpenAI, json::parse(R"({"choices":[{"message":{"content":"hi"}}]})")) == "hi");
  CHECK(extract_text(Provider::Anthropic,
                     json::parse(R"({"content":[{"type":"text","text":"a"},{"type":"tool_use"},{"type":"text","text":"b"}]})")) ==
        "ab");
  CHECK(extract_text(Provider::Gemini,
                     json::parse(R"({"candidates":[{"content":{"parts":[{"text":"x"},{"text":"y"}]}}]})")) == "xy");
  try {
    extract_text(Provider::OpenAI, json::parse(R"({"error":"bad"})"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProviderError);
    CHECK(e.raw_output().find("bad") != std::string::npos);
  }
}

TEST_CASE("missing credential variable is a configuration error") {
  BackendConfig c = http_config(Provider::OpenAI, "http://127.0.0.1:1/v1");
  c.auth_env_var = "GAPGATE_TEST_SURELY_UNSET_VAR";
  ::unsetenv(c.auth_env_var.c_str());
  try {
    make_http_backend(c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
    CHECK(std::string(e.what()).find("GAPGATE_TEST_SURELY_UNSET_VAR") != std::string::npos);
  }
  c.auth_env_var.clear();
  c.model_name.clear();
  CHECK_THROWS_AS(make_http_backend(c), Error);
}

TEST_CASE("openai backend retries 429 and sends the bearer token") {
  MockServer mock;
  std::atomic<int> hits{0};
  std::string auth;
  mock.server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    if (++hits == 1) {
      res.status = 429;
      return;
    }
    auth = req.get_header_value("Authorization");
    const json body = json::parse(req.body);
    CHECK(body["model"] == "m1");
    res.set_content(R"({"choices":[{"message":{"content":"answer"}}]})", "application/json");
  });
  mock.start();
  ::setenv("GAPGATE_TEST_KEY", "sekret", 1);
  BackendConfig c = http_config(Provider::OpenAI, mock.url("/v1/chat"));
  c.auth_env_var = "GAPGATE_TEST_KEY";
  auto backend = make_http_backend(c);
  CHECK(backend->name() == "openai:m1");
  CHECK(backend->send(request(), kConversation) == "answer");
  CHECK(hits == 2);
  CHECK(auth == "Bearer sekret");
}

TEST_CASE("anthropic and gemini headers and paths") {
  MockServer mock;
  std::string key, version, gemini_key;
  mock.server.Post("/v1/messages", [&](const httplib::Request& req, httplib::Response& res) {
    key = req.get_header_value("x-api-key");
    version = req.get_header_value("anthropic-version");
    res.set_content(R"({"content":[{"type":"text","text":"claude-style"}]})", "application/json");
  });
  mock.server.Post("/v1beta/models/m1:generateContent",
                   [&](const httplib::Request& req, httplib::Response& res) {
                     gemini_key = req.get_header_value("x-goog-api-key");
                     res.set_content(R"({"candidates":[{"content":{"parts":[{"text":"g"}]}}]})",
                                     "application/json");
                   });
  mock.start();
  ::setenv("GAPGATE_TEST_KEY", "k2", 1);
  BackendConfig a = http_config(Provider::Anthropic, mock.url("/v1/messages"));
  a.auth_env_var = "GAPGATE_TEST_KEY";
  CHECK(make_http_backend(a)->send(request(), kConversation) == "claude-style");
  CHECK(key == "k2");
  CHECK_FALSE(version.empty());

  BackendConfig g = http_config(Provider::Gemini, mock.url("/v1beta"));
  g.auth_env_var = "GAPGATE_TEST_KEY";
  CHECK(make_http_backend(g)->send(request(), kConversation) == "g");
  CHECK(gemini_key == "k2");
}

TEST_CASE("persistent 5xx exhausts retries as ProviderError; 4xx fails fast") {
  MockServer mock;
  std::atomic<int> server_errors{0}, client_errors{0};
  mock.server.Post("/down", [&](const httplib::Request&, httplib::Response& res) {
    ++server_errors;
    res.status = 503;
  });
  mock.server.Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
    ++client_errors;
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  mock.start();
  try {
    make_http_backend(http_config(Provider::OpenAI, mock.url("/down")))->send(request(), kConversation);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProviderError);
  }
  CHECK(server_errors == 3);
  try {
    make_http_backend(http_config(Provider::OpenAI, mock.url("/bad")))->send(request(), kConversation);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProviderError);
    CHECK(e.raw_output() == "bad request");
  }
  CHECK(client_errors == 1);
}

TEST_CASE("slow endpoint surfaces as Timeout") {
  MockServer mock;
  mock.server.Post("/slow", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    res.set_content("{}", "application/json");
  });
  mock.start();
  BackendConfig c = http_config(Provider::OpenAI, mock.url("/slow"));
  c.timeout_ms = 100;
  c.transport_retries = 0;
  try {
    make_http_backend(c)->send(request(), kConversation);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Timeout);
  }
}
