#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace pcrowd::http {

struct Response {
  int status = 0;
  std::string body;
};

// POST a JSON body to an absolute http(s) URL. Throws IoError on transport
// failure; non-2xx statuses are returned to the caller.
Response post_json(const std::string& url, const nlohmann::json& body,
                   std::chrono::milliseconds timeout,
                   const std::vector<std::pair<std::string, std::string>>& headers = {});

}  // namespace pcrowd::http
