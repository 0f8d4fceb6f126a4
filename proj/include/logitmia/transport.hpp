// Copyright 2026 The logitmia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Chat-completion transports: an HTTP client for chat-completions-compatible
// endpoints and a replay transport that serves canned responses.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace logitmia {

struct TokenUsage {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;

  TokenUsage& operator+=(const TokenUsage& o) {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    return *this;
  }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

inline void to_json(nlohmann::json& j, const TokenUsage& u) {
  j = nlohmann::json{{"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}};
}

inline void from_json(const nlohmann::json& j, TokenUsage& u) {
  u.input_tokens = j.value("input_tokens", std::uint64_t{0});
  u.output_tokens = j.value("output_tokens", std::uint64_t{0});
}

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  double temperature = 0.6;
  std::vector<ChatMessage> messages;
};

struct ChatResponse {
  std::string text;
  TokenUsage usage;
  int attempts = 1;
};

/// Raised for missing or invalid transport configuration, before any request.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Base class; keeps the running token totals and an event log.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;

  ChatResponse complete(const ChatRequest& request) {
    ChatResponse r = do_complete(request);
    totals_ += r.usage;
    ++calls_;
    return r;
  }

  const TokenUsage& totals() const { return totals_; }
  std::size_t calls() const { return calls_; }
  const std::vector<std::string>& events() const { return events_; }

 protected:
  virtual ChatResponse do_complete(const ChatRequest& request) = 0;
  void log(std::string event) { events_.push_back(std::move(event)); }

 private:
  TokenUsage totals_;
  std::size_t calls_ = 0;
  std::vector<std::string> events_;
};

/// Result of one HTTP POST. status 0 means the request never got a response.
struct HttpResult {
  int status = 0;
  std::string body;
  std::string error;
};

struct HttpChatConfig {
  std::string url;
  std::string api_key;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};

  /// Reads LOGITMIA_API_URL and LOGITMIA_API_KEY.
  static HttpChatConfig from_env() {
    HttpChatConfig c;
    const char* url = std::getenv("LOGITMIA_API_URL");
    const char* key = std::getenv("LOGITMIA_API_KEY");
    if (!url || !*url) throw ConfigError("LOGITMIA_API_URL is not set");
    if (!key || !*key) throw ConfigError("LOGITMIA_API_KEY is not set");
    c.url = url;
    c.api_key = key;
    return c;
  }
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: '" + url + "'");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme '" + scheme + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

/// Sends {model, temperature, messages} to a chat-completions endpoint.
/// Network errors, 429 and 5xx are retried with exponential backoff.
class HttpChatTransport : public ChatTransport {
 public:
  using PostFn = std::function<HttpResult(const std::string& url, const std::string& body,
                                          const std::vector<std::pair<std::string, std::string>>& headers)>;
  using SleepFn = std::function<void(std::chrono::milliseconds)>;

  explicit HttpChatTransport(HttpChatConfig config, PostFn post = {}, SleepFn sleep = {})
      : config_(std::move(config)), post_(std::move(post)), sleep_(std::move(sleep)) {
    if (config_.api_key.empty()) throw ConfigError("API key is empty");
    if (config_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
    detail::split_url(config_.url);
    if (!post_) post_ = default_post(config_.timeout);
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

  static std::string request_body(const ChatRequest& r) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : r.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return nlohmann::json{{"model", r.model}, {"temperature", r.temperature}, {"messages", msgs}}.dump();
  }

  /// Extracts choices[0].message.content and the usage counts.
  static ChatResponse parse_response(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("response is not JSON: ") + e.what());
    }
    ChatResponse r;
    try {
      r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw TransportError("response lacks choices[0].message.content");
    }
    if (j.contains("usage") && j["usage"].is_object()) {
      const auto& u = j["usage"];
      r.usage.input_tokens = u.value("prompt_tokens", u.value("input_tokens", std::uint64_t{0}));
      r.usage.output_tokens = u.value("completion_tokens", u.value("output_tokens", std::uint64_t{0}));
    }
    return r;
  }

 protected:
  ChatResponse do_complete(const ChatRequest& request) override {
    const std::string body = request_body(request);
    const std::vector<std::pair<std::string, std::string>> headers = {
        {"Authorization", "Bearer " + config_.api_key}};
    std::string last_error;
    auto backoff = config_.initial_backoff;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
      const HttpResult res = post_(config_.url, body, headers);
      if (res.status >= 200 && res.status < 300) {
        ChatResponse r = parse_response(res.body);
        r.attempts = attempt;
        return r;
      }
      const bool retryable = res.status == 0 || res.status == 429 || res.status >= 500;
      last_error = res.status == 0 ? "network error: " + res.error
                                   : "HTTP " + std::to_string(res.status);
      if (!retryable) throw TransportError(last_error + ": " + res.body.substr(0, 200));
      if (attempt < config_.max_attempts) {
        log("attempt " + std::to_string(attempt) + " failed (" + last_error + "), retrying in " +
            std::to_string(backoff.count()) + " ms");
        sleep_(backoff);
        backoff *= 2;
      }
    }
    throw TransportError("giving up after " + std::to_string(config_.max_attempts) +
                         " attempts: " + last_error);
  }

 private:
  static PostFn default_post(std::chrono::seconds timeout);

  HttpChatConfig config_;
  PostFn post_;
  SleepFn sleep_;
};

/// Serves responses from a JSON-lines fixture, one {text, usage} object per
/// line, in order. Requests are kept for inspection.
class ReplayTransport : public ChatTransport {
 public:
  explicit ReplayTransport(std::vector<ChatResponse> responses) : responses_(std::move(responses)) {}

  static ReplayTransport from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open replay fixture '" + path + "'");
    std::vector<ChatResponse> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        ChatResponse r;
        r.text = j.at("text").get<std::string>();
        if (j.contains("usage")) r.usage = j["usage"].get<TokenUsage>();
        out.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("replay fixture line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return ReplayTransport(std::move(out));
  }

  const std::vector<ChatRequest>& requests() const { return requests_; }
  std::size_t remaining() const { return responses_.size() - next_; }

 protected:
  ChatResponse do_complete(const ChatRequest& request) override {
    requests_.push_back(request);
    if (next_ >= responses_.size()) throw TransportError("replay fixtures exhausted");
    return responses_[next_++];
  }

 private:
  std::vector<ChatResponse> responses_;
  std::vector<ChatRequest> requests_;
  std::size_t next_ = 0;
};

}  // namespace logitmia

#include "httplib.h"

namespace logitmia {

inline HttpChatTransport::PostFn HttpChatTransport::default_post(std::chrono::seconds timeout) {
  return [timeout](const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers) {
    const auto parts = detail::split_url(url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    HttpResult out;
    auto res = client.Post(parts.path, h, body, "application/json");
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  };
}

}  // namespace logitmia
