#include <doctest.h>

#include <cstdlib>
#include <deque>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "fake_chat_server.hpp"
#include "test_support.hpp"
#include "ujudge/backends.hpp"
#include "ujudge/batching.hpp"
#include "ujudge/errors.hpp"

using namespace ujudge;
using namespace ujudge::testing;
using namespace std::chrono_literals;

namespace {

class ScriptedTransport final : public Transport {
 public:
  explicit ScriptedTransport(std::deque<CallResult> script) : script_(std::move(script)) {}
  CallResult send(const ChatRequest&) override {
    ++calls;
    if (script_.empty()) return {CallStatus::ok, "doc 1: 2", {}};
    auto r = script_.front();
    script_.pop_front();
    return r;
  }
  int calls = 0;

 private:
  std::deque<CallResult> script_;
};

struct Fixture {
  std::vector<TaskSession> sessions = five_click_sessions();
  std::vector<JudgingUnit> units = make_baseline_units(sessions, {});
  RenderedPrompt prompt{"system", "user", {}};
};

ClientOptions recording(std::vector<std::chrono::milliseconds>& sleeps) {
  ClientOptions o;
  o.sleeper = [&sleeps](std::chrono::milliseconds d) { sleeps.push_back(d); };
  return o;
}

}  // namespace

TEST_SUITE("backends.mock") {
  TEST_CASE("dwell thresholds without relevance") {
    auto s = session("s", {query("q1", 0,
                                 {click("a", 1, 4.9, 0), click("b", 2, 5, 0), click("c", 3, 29.9, 0),
                                  click("d", 4, 30, 0), click("e", 5, 59.9, 0), click("f", 6, 60, 0)})});
    auto u = make_session_units(std::vector{s}, {})[0];
    CHECK(mock_judge(u) == "doc 1: 0\ndoc 2: 1\ndoc 3: 1\ndoc 4: 2\ndoc 5: 2\ndoc 6: 3");
  }

  TEST_CASE("relevance blends in only when the R feature is on") {
    // base 3 (87 s) and relevance 3 -> 3; base 1 (15 s) and relevance 2 -> 2; base 2 (36 s) and relevance 1 -> 2.
    auto sessions = five_click_sessions();
    auto with_r = make_session_units(sessions, FeatureConfig{true, false, true});
    CHECK(mock_judge(with_r[0]) == "doc 1: 3\ndoc 2: 2\ndoc 3: 2");
    auto without_r = make_session_units(sessions, FeatureConfig{false, true, true});
    CHECK(mock_judge(without_r[0]) == "doc 1: 3\ndoc 2: 1\ndoc 3: 2");
  }
}

TEST_SUITE("backends.cache") {
  TEST_CASE("persisted entries replay after reopening") {
    TempDir dir;
    {
      ResponseCache c(dir.path());
      c.put({"h1", "one", {}, "mock"});
      c.put({"h2", "two", {}, "mock"});
      c.put({"h1", "uno", {}, "mock"});
    }
    ResponseCache c(dir.path());
    CHECK(c.size() == 2);
    CHECK(c.get("h1") == std::optional<std::string>("uno"));
    CHECK(c.get("h2") == std::optional<std::string>("two"));
    CHECK_FALSE(c.get("h3"));
  }

  TEST_CASE("corrupt lines are skipped and counted") {
    TempDir dir;
    {
      ResponseCache c(dir.path());
      c.put({"h1", "one", {}, "mock"});
    }
    {
      std::ofstream f(dir / "responses.jsonl", std::ios::app);
      f << "{\"prompt_hash\": \"h2\", \"raw_resp";  // torn write
      f << "\n";
    }
    ResponseCache c(dir.path());
    CHECK(c.size() == 1);
    CHECK(c.corrupt_lines() == 1);
  }

  TEST_CASE("concurrent writers of the same keys leave a readable file") {
    TempDir dir;
    {
      ResponseCache c(dir.path());
      std::vector<std::jthread> threads;
      for (int t = 0; t < 4; ++t)
        threads.emplace_back([&c] {
          for (int i = 0; i < 100; ++i) c.put({"k" + std::to_string(i), "v" + std::to_string(i), {}, "mock"});
        });
    }
    ResponseCache c(dir.path());
    CHECK(c.size() == 100);
    CHECK(c.corrupt_lines() == 0);
  }
}

TEST_SUITE("backends.client") {
  TEST_CASE("cache hit skips the transport") {
    Fixture f;
    ResponseCache cache;
    auto t = std::make_unique<ScriptedTransport>(std::deque<CallResult>{});
    auto* raw = t.get();
    BackendClient client(BackendSpec{}, std::move(t), cache);
    auto a = client.complete(f.units[0], f.prompt, "h");
    auto b = client.complete(f.units[0], f.prompt, "h");
    CHECK(raw->calls == 1);
    CHECK_FALSE(a.from_cache);
    CHECK(b.from_cache);
    CHECK(a.text == b.text);
    CHECK(client.cache_hits() == 1);
    CHECK(client.network_calls() == 1);
  }

  TEST_CASE("transient failures are retried with growing backoff") {
    Fixture f;
    ResponseCache cache;
    std::vector<std::chrono::milliseconds> sleeps;
    auto t = std::make_unique<ScriptedTransport>(std::deque<CallResult>{
        {CallStatus::transient, {}, "HTTP 503"}, {CallStatus::transient, {}, "HTTP 429"}});
    BackendClient client(BackendSpec{}, std::move(t), cache, recording(sleeps));
    auto r = client.complete(f.units[0], f.prompt, "h");
    CHECK(r.text == std::optional<std::string>("doc 1: 2"));
    CHECK(r.attempts == 3);
    CHECK(r.retries == 2);
    REQUIRE(sleeps.size() == 2);
    CHECK(sleeps[0] >= 500ms);
    CHECK(sleeps[0] <= 750ms);
    CHECK(sleeps[1] >= 1000ms);
    CHECK(sleeps[1] <= 1500ms);
    CHECK(cache.get("h"));
  }

  TEST_CASE("exhausted retries become a per-unit error, not a cache entry") {
    Fixture f;
    ResponseCache cache;
    std::vector<std::chrono::milliseconds> sleeps;
    BackendSpec spec;
    spec.max_retries = 2;
    std::deque<CallResult> script(5, CallResult{CallStatus::transient, {}, "timeout"});
    BackendClient client(spec, std::make_unique<ScriptedTransport>(script), cache, recording(sleeps));
    auto r = client.complete(f.units[0], f.prompt, "h");
    CHECK_FALSE(r.text);
    REQUIRE(r.error);
    CHECK(r.error->rfind("backend_exhausted:", 0) == 0);
    CHECK(r.attempts == 3);
    CHECK(sleeps.size() == 2);
    CHECK_FALSE(cache.get("h"));
  }

  TEST_CASE("permanent failures are not retried; auth failures are fatal") {
    Fixture f;
    ResponseCache cache;
    auto t = std::make_unique<ScriptedTransport>(std::deque<CallResult>{{CallStatus::permanent, {}, "HTTP 400"}});
    BackendClient client(BackendSpec{}, std::move(t), cache);
    auto r = client.complete(f.units[0], f.prompt, "h");
    CHECK(r.attempts == 1);
    CHECK(r.error == std::optional<std::string>("backend_error: HTTP 400"));

    BackendClient fatal(BackendSpec{}, std::make_unique<ScriptedTransport>(
                                           std::deque<CallResult>{{CallStatus::auth, {}, "HTTP 401"}}),
                        cache);
    CHECK_THROWS_AS(fatal.complete(f.units[0], f.prompt, "h2"), BackendFatal);
  }

  TEST_CASE("backoff is seeded, capped and deterministic") {
    ResponseCache cache;
    ClientOptions o;
    o.backoff_cap = 4000ms;
    BackendClient a(BackendSpec{}, std::make_unique<MockTransport>(), cache, o);
    BackendClient b(BackendSpec{}, std::make_unique<MockTransport>(), cache, o);
    o.seed = 43;
    BackendClient c(BackendSpec{}, std::make_unique<MockTransport>(), cache, o);
    bool any_diff = false;
    for (int attempt = 1; attempt <= 10; ++attempt) {
      const auto d = a.backoff_delay("key", attempt);
      CHECK(d == b.backoff_delay("key", attempt));
      CHECK(d <= 6000ms);  // cap plus at most half again of jitter
      any_diff |= d != c.backoff_delay("key", attempt);
    }
    CHECK(any_diff);
  }
}

TEST_SUITE("backends.wire") {
  TEST_CASE("request body shape") {
    BackendSpec spec;
    spec.model_name = "m";
    spec.temperature = 0.0;
    spec.top_p = 1.0;
    const auto body = nlohmann::json::parse(ChatCompletionTransport::request_body({"sys", "usr", {}}, spec));
    CHECK(body["model"] == "m");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["top_p"] == 1.0);
    REQUIRE(body["messages"].size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][0]["content"] == "sys");
    CHECK(body["messages"][1]["role"] == "user");
    CHECK(body["messages"][1]["content"] == "usr");
  }

  TEST_CASE("response content extraction") {
    CHECK(ChatCompletionTransport::response_content(R"({"choices":[{"message":{"content":"2"}}]})") ==
          std::optional<std::string>("2"));
    CHECK_FALSE(ChatCompletionTransport::response_content(R"({"choices":[]})"));
    CHECK_FALSE(ChatCompletionTransport::response_content("not json"));
  }

  TEST_CASE("status classification") {
    using T = ChatCompletionTransport;
    CHECK(T::classify_http_status(200) == CallStatus::ok);
    CHECK(T::classify_http_status(401) == CallStatus::auth);
    CHECK(T::classify_http_status(403) == CallStatus::auth);
    for (int s : {408, 425, 429, 500, 502, 503, 504}) CHECK(T::classify_http_status(s) == CallStatus::transient);
    for (int s : {400, 404, 422}) CHECK(T::classify_http_status(s) == CallStatus::permanent);
  }

  TEST_CASE("a named but unset key variable is fatal") {
    BackendSpec spec;
    spec.kind = BackendKind::remote_chat;
    spec.endpoint = "http://127.0.0.1:9/v1/chat/completions";
    spec.api_key_env = "UJUDGE_TEST_DEFINITELY_UNSET_KEY";
    ::unsetenv(spec.api_key_env.c_str());
    CHECK_THROWS_AS(make_transport(spec), BackendFatal);
  }

  TEST_CASE("round trip through a local chat-completions server") {
    FakeChatServer server;
    server.script_statuses({503});
    ::setenv("UJUDGE_TEST_KEY", "sekret", 1);
    BackendSpec spec;
    spec.backend_id = "local";
    spec.kind = BackendKind::local_chat;
    spec.endpoint = server.endpoint();
    spec.model_name = "tiny";
    spec.api_key_env = "UJUDGE_TEST_KEY";
    Fixture f;
    ResponseCache cache;
    std::vector<std::chrono::milliseconds> sleeps;
    BackendClient client(spec, make_transport(spec), cache, recording(sleeps));
    RenderedPrompt p{"sys", "Answer with exactly 1 line(s).", {}};
    auto r = client.complete(f.units[0], p, "h");
    REQUIRE(r.text);
    CHECK(r.attempts == 2);
    CHECK(server.requests() == 2);
    CHECK(server.malformed_requests() == 0);
    CHECK(server.last_authorization() == "Bearer sekret");

    server.script_statuses({401});
    CHECK_THROWS_AS(client.complete(f.units[0], p, "other"), BackendFatal);
  }

  TEST_CASE("unreachable endpoint is transient and ends exhausted") {
    BackendSpec spec;
    spec.kind = BackendKind::local_chat;
    spec.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    spec.max_retries = 1;
    spec.timeout_sec = 1;
    Fixture f;
    ResponseCache cache;
    std::vector<std::chrono::milliseconds> sleeps;
    BackendClient client(spec, make_transport(spec), cache, recording(sleeps));
    auto r = client.complete(f.units[0], f.prompt, "h");
    REQUIRE(r.error);
    CHECK(r.error->rfind("backend_exhausted:", 0) == 0);
  }
}
