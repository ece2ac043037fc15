#pragma once

#include <memory>
#include <span>
#include <string>

#include <json.hpp>

#include "gapgate/backend.hpp"

namespace gapgate {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

// Splits an absolute http(s) URL. Throws InvalidConfig for anything else.
Endpoint split_url(const std::string& url);

// Provider wire formats. Exposed so the adapters can be tested without a
// network round trip.
nlohmann::json build_request_body(Provider provider, const std::string& model,
                                  const ChatRequest& request,
                                  std::span<const Message> conversation);
std::string extract_text(Provider provider, const nlohmann::json& body);

// Chat-completion backend for a hosted provider. Transport failures, 429 and
// 5xx answers are retried `transport_retries` times with exponential backoff
// starting at `backoff_initial_ms`.
std::shared_ptr<Backend> make_http_backend(const BackendConfig& config);

}  // namespace gapgate
