#pragma once

#include <chrono>
#include <optional>
#include <string>

#include <json.hpp>

namespace hyex::detail {

struct HttpEndpoint {
  std::string scheme_host_port;  // "http://host:port"
  std::string path_prefix;       // "" or "/api"
};

/// Splits "http://host:port/prefix" into the httplib client part and a path
/// prefix. Throws InvalidArgument on anything else.
HttpEndpoint parse_base_url(const std::string& base_url);

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;
};

/// POSTs `body` as JSON and returns the parsed response. Transport failures,
/// 429 and 5xx are retried with exponential backoff; any other non-200 fails
/// immediately. Exhaustion raises ProviderUnavailable.
nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const nlohmann::json& body, const std::optional<std::string>& bearer,
                         const RetryPolicy& policy);

std::optional<std::string> env_token(const char* name);

}  // namespace hyex::detail
