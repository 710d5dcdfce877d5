#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <utility>

#include <httplib.h>

#include "hrlfs/embedding.hpp"
#include "hrlfs/error.hpp"

namespace hrlfs {

struct BaseUrl {
  std::string scheme_host_port;  // e.g. "https://api.openai.com"
  std::string path_prefix;       // e.g. "/v1", may be empty
};

inline BaseUrl parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base URL must include a scheme: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme: " + scheme);
  const auto path_start = url.find('/', scheme_end + 3);
  BaseUrl b;
  b.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) b.path_prefix = url.substr(path_start);
  while (!b.path_prefix.empty() && b.path_prefix.back() == '/') b.path_prefix.pop_back();
  return b;
}

// cpp-httplib backed transport with bearer authentication.
class HttplibTransport final : public HttpTransport {
public:
  HttplibTransport(const std::string& base_url, std::string bearer_token,
                   std::chrono::seconds timeout = std::chrono::seconds(60))
      : base_(parse_base_url(base_url)), token_(std::move(bearer_token)), client_(base_.scheme_host_port) {
    client_.set_connection_timeout(timeout);
    client_.set_read_timeout(timeout);
    client_.set_write_timeout(timeout);
    client_.set_bearer_token_auth(token_);
  }

  HttpResponse post_json(const std::string& path, const std::string& body) override {
    auto res = client_.Post(base_.path_prefix + path, body, "application/json");
    if (!res) {
      throw TransportError("POST " + base_.scheme_host_port + base_.path_prefix + path +
                           " failed: " + httplib::to_string(res.error()));
    }
    return {res->status, res->body};
  }

private:
  BaseUrl base_;
  std::string token_;
  httplib::Client client_;
};

}  // namespace hrlfs
