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

#include "logitmia/transport.hpp"

#include <cstdlib>
#include <deque>

#include "gtest/gtest.h"

namespace logitmia {
namespace {

const std::string kOkBody =
    R"({"choices":[{"message":{"role":"assistant","content":"hello"}}],)"
    R"("usage":{"prompt_tokens":11,"completion_tokens":3}})";

HttpChatConfig test_config() {
  HttpChatConfig c;
  c.url = "https://example.invalid/v1/chat/completions";
  c.api_key = "test-key";
  return c;
}

// Scripted endpoint: pops one canned result per call and records bodies.
struct FakeEndpoint {
  std::deque<HttpResult> script;
  std::vector<std::string> bodies;
  std::vector<std::string> auth;

  HttpChatTransport::PostFn fn() {
    return [this](const std::string&, const std::string& body,
                  const std::vector<std::pair<std::string, std::string>>& headers) {
      bodies.push_back(body);
      for (const auto& [k, v] : headers) {
        if (k == "Authorization") auth.push_back(v);
      }
      HttpResult r = script.front();
      script.pop_front();
      return r;
    };
  }
};

ChatRequest request() { return {"some-model", 0.6, {{"system", "sys"}, {"user", "hi"}}}; }

TEST(HttpTransportTest, RetriesAfterRateLimit) {
  FakeEndpoint ep;
  ep.script = {{429, "slow down", ""}, {200, kOkBody, ""}};
  std::vector<std::chrono::milliseconds> sleeps;
  HttpChatTransport t(test_config(), ep.fn(), [&](auto d) { sleeps.push_back(d); });
  const auto r = t.complete(request());
  EXPECT_EQ(r.text, "hello");
  EXPECT_EQ(r.attempts, 2);
  EXPECT_EQ(r.usage, (TokenUsage{11, 3}));
  ASSERT_EQ(t.events().size(), 1u);
  EXPECT_NE(t.events()[0].find("HTTP 429"), std::string::npos);
  ASSERT_EQ(sleeps.size(), 1u);
  EXPECT_EQ(ep.bodies.size(), 2u);
  EXPECT_EQ(ep.auth[0], "Bearer test-key");
}

TEST(HttpTransportTest, RequestBodyShape) {
  const auto j = nlohmann::json::parse(HttpChatTransport::request_body(request()));
  EXPECT_EQ(j["model"], "some-model");
  EXPECT_DOUBLE_EQ(j["temperature"].get<double>(), 0.6);
  ASSERT_EQ(j["messages"].size(), 2u);
  EXPECT_EQ(j["messages"][0]["role"], "system");
  EXPECT_EQ(j["messages"][1]["content"], "hi");
}

TEST(HttpTransportTest, GivesUpAfterThreeAttemptsWithBackoff) {
  FakeEndpoint ep;
  ep.script = {{0, "", "connection refused"}, {503, "", ""}, {500, "", ""}};
  std::vector<std::chrono::milliseconds> sleeps;
  HttpChatTransport t(test_config(), ep.fn(), [&](auto d) { sleeps.push_back(d); });
  EXPECT_THROW(t.complete(request()), TransportError);
  EXPECT_EQ(ep.bodies.size(), 3u);
  ASSERT_EQ(sleeps.size(), 2u);
  EXPECT_EQ(sleeps[1], 2 * sleeps[0]);
  EXPECT_EQ(t.totals(), TokenUsage{});
}

TEST(HttpTransportTest, ClientErrorsAreNotRetried) {
  FakeEndpoint ep;
  ep.script = {{401, "bad key", ""}};
  HttpChatTransport t(test_config(), ep.fn(), [](auto) {});
  EXPECT_THROW(t.complete(request()), TransportError);
  EXPECT_EQ(ep.bodies.size(), 1u);
}

TEST(HttpTransportTest, MalformedResponseIsTransportError) {
  EXPECT_THROW(HttpChatTransport::parse_response("not json"), TransportError);
  EXPECT_THROW(HttpChatTransport::parse_response(R"({"choices":[]})"), TransportError);
}

TEST(HttpTransportTest, MissingKeyFailsBeforeAnyRequest) {
  ::unsetenv("LOGITMIA_API_KEY");
  ::setenv("LOGITMIA_API_URL", "https://example.invalid/v1/chat/completions", 1);
  EXPECT_THROW(HttpChatConfig::from_env(), ConfigError);
  int calls = 0;
  auto post = [&](const std::string&, const std::string&, const auto&) {
    ++calls;
    return HttpResult{};
  };
  auto c = test_config();
  c.api_key.clear();
  EXPECT_THROW(HttpChatTransport(c, post, [](auto) {}), ConfigError);
  EXPECT_EQ(calls, 0);
  c = test_config();
  c.url = "ftp://x";
  EXPECT_THROW(HttpChatTransport(c, post, [](auto) {}), ConfigError);
}

TEST(ReplayTransportTest, ServesFixtureInOrderAndCountsTokens) {
  auto t = ReplayTransport::from_file(std::string(LOGITMIA_FIXTURE_DIR) + "/responses.jsonl");
  EXPECT_EQ(t.remaining(), 3u);
  const auto a = t.complete(request());
  const auto b = t.complete(request());
  EXPECT_NE(a.text.find("true_gap_mean"), std::string::npos);
  EXPECT_EQ(a.usage, (TokenUsage{1200, 310}));
  EXPECT_NE(b.text.find("sorted_tlp"), std::string::npos);
  EXPECT_EQ(t.totals(), (TokenUsage{2550, 500}));
  EXPECT_EQ(t.requests().size(), 2u);
  t.complete(request());
  EXPECT_THROW(t.complete(request()), TransportError);
  EXPECT_THROW(ReplayTransport::from_file("/nonexistent.jsonl"), ConfigError);
}

}  // namespace
}  // namespace logitmia
