#include "pcrowd/http.hpp"

#include <httplib.h>

#include "pcrowd/common.hpp"

namespace pcrowd::http {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint URL lacks a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

Response post_json(const std::string& url, const nlohmann::json& body,
                   std::chrono::milliseconds timeout,
                   const std::vector<std::pair<std::string, std::string>>& headers) {
  const auto parts = split_url(url);
  httplib::Client client(parts.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);
  auto res = client.Post(parts.path, hdrs, body.dump(), "application/json");
  if (!res) {
    throw IoError("POST " + url + " failed: " + httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

}  // namespace pcrowd::http
