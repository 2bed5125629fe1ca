// Copyright 2026 The dfx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <regex>

#include "httplib.h"
#include "json.hpp"

#include "dfx/core/error.hpp"
#include "dfx/datagen/captions.hpp"

namespace dfx::datagen {

HttpClient::HttpClient(HttpClientOptions options) : options_(std::move(options)) {
  if (options_.timeout_seconds <= 0) throw ConfigError("http client: timeout must be > 0");
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(options_.endpoint, m, url))
    throw ConfigError("http client: malformed endpoint '" + options_.endpoint + "'");
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme_host_port_.rfind("https://", 0) == 0)
    throw ConfigError("http client: built without TLS support; use an http:// endpoint");
#endif
}

std::string HttpClient::request_body(const CaptionRequest& r) const {
  const std::string data_url = "data:image/png;base64," + httplib::detail::base64_encode(r.image_png);
  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url}}}});
  content.push_back({{"type", "text"}, {"text", r.prompt}});
  nlohmann::json body{{"model", options_.model},
                      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
                      {"image", httplib::detail::base64_encode(r.image_png)},
                      {"temperature", 0}};
  return body.dump();
}

std::string parse_completion(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("completion response is not JSON: ") + e.what());
  }
  std::string text;
  if (j.contains("text") && j["text"].is_string()) {
    text = j["text"].get<std::string>();
  } else if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const auto& msg = j["choices"][0].value("message", nlohmann::json::object());
    if (msg.contains("content") && msg["content"].is_string())
      text = msg["content"].get<std::string>();
  }
  if (text.find_first_not_of(" \t\r\n") == std::string::npos)
    throw IoError("completion response has no text");
  return text;
}

std::string HttpClient::describe(const CaptionRequest& r) {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(options_.timeout_seconds);
  const auto usecs = static_cast<time_t>((options_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (const char* key = std::getenv(options_.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);
  auto res = client.Post(path_, headers, request_body(r), "application/json");
  if (!res) throw IoError("http request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw IoError("http status " + std::to_string(res->status) + " from " + options_.endpoint);
  return parse_completion(res->body);
}

}  // namespace dfx::datagen
