#include "http.hpp"

#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "hyex/error.hpp"

namespace hyex::detail {

HttpEndpoint parse_base_url(const std::string& base_url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(base_url, m, re)) {
    throw Error(ErrorCode::InvalidArgument, "base url must look like http://host:port, got '" + base_url + "'");
  }
  std::string prefix = m[2].matched ? m[2].str() : "";
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

std::optional<std::string> env_token(const char* name) {
  const char* value = std::getenv(name);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const nlohmann::json& body, const std::optional<std::string>& bearer,
                         const RetryPolicy& policy) {
  const HttpEndpoint endpoint = parse_base_url(base_url);
  const std::string full_path = endpoint.path_prefix + path;
  const std::string payload = body.dump();

  std::string last_error;
  auto delay = policy.backoff_base;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      spdlog::warn("POST {}{} failed ({}), retry {}/{}", base_url, path, last_error, attempt,
                   policy.max_retries);
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(delay.count()) * policy.backoff_factor));
    }
    httplib::Client client(endpoint.scheme_host_port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(policy.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(policy.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    if (bearer) client.set_bearer_token_auth(*bearer);

    auto res = client.Post(full_path, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ProviderUnavailable, base_url + path + ": response is not JSON: " + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(res->status);
    if (res->status != 429 && res->status < 500) break;
  }
  throw Error(ErrorCode::ProviderUnavailable, base_url + path + ": " + last_error);
}

}  // namespace hyex::detail
