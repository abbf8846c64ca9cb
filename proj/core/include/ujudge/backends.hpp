#pragma once

// Model backends: a transport per backend kind, a persistent response cache
// keyed by prompt hash, and a client that adds retry with seeded backoff.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "ujudge/prompting.hpp"
#include "ujudge/session.hpp"

namespace ujudge {

enum class BackendKind { remote_chat, local_chat, mock };

std::string_view to_string(BackendKind k) noexcept;
std::optional<BackendKind> parse_backend_kind(std::string_view s) noexcept;

struct BackendSpec {
  std::string backend_id = "mock";
  BackendKind kind = BackendKind::mock;
  std::string endpoint;  // full URL of the chat-completions route
  std::string model_name = "mock-judge";
  double temperature = 0.0;
  double top_p = 1.0;
  int max_retries = 3;
  int parallelism = 1;
  double timeout_sec = 60.0;
  std::string api_key_env;  // empty: no Authorization header
  std::size_t max_prompt_chars = 0;

  DecodingParams decoding() const { return {model_name, temperature, top_p}; }
};

/// Throws ConfigError when a field is out of range or an endpoint is missing.
void validate_backend_spec(const BackendSpec& spec);

/// Deterministic stand-in judge. Per target: 0 below 5 s of url dwell, 1 below
/// 30 s, 2 below 60 s, else 3; when relevance is rendered (R enabled and the
/// label present) the label becomes floor((base + relevance + 1) / 2).
/// Returns "doc <i>: <label>" lines.
std::string mock_judge(const JudgingUnit& unit);

struct ChatRequest {
  const JudgingUnit& unit;
  const RenderedPrompt& prompt;
  const BackendSpec& spec;
};

enum class CallStatus { ok, transient, permanent, auth };

struct CallResult {
  CallStatus status = CallStatus::ok;
  std::string text;    // response content when ok
  std::string detail;  // failure description otherwise
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual CallResult send(const ChatRequest& request) = 0;
};

class MockTransport final : public Transport {
 public:
  CallResult send(const ChatRequest& request) override;
};

/// Chat-completion wire client: POSTs {model, messages, temperature, top_p}
/// and reads choices[0].message.content.
class ChatCompletionTransport final : public Transport {
 public:
  /// Reads the API key from the environment variable named in the spec; a
  /// named but unset variable is a BackendFatal.
  explicit ChatCompletionTransport(const BackendSpec& spec);
  CallResult send(const ChatRequest& request) override;

  /// Request body for a prompt, exposed for tests.
  static std::string request_body(const RenderedPrompt& prompt, const BackendSpec& spec);
  /// Extracts choices[0].message.content; nullopt when the shape is wrong.
  static std::optional<std::string> response_content(std::string_view body);
  static CallStatus classify_http_status(int status) noexcept;

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
};

std::unique_ptr<Transport> make_transport(const BackendSpec& spec);

struct CacheEntry {
  std::string prompt_hash;
  std::string raw_response;
  std::string created_at;
  std::string backend_id;
};

/// Append-only response cache. Every put appends one JSON line to
/// <dir>/responses.jsonl; on open, the file is replayed with last writer
/// winning and unparseable lines skipped. An empty directory path keeps the
/// cache in memory only. Safe for concurrent use.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir = {});

  std::optional<std::string> get(const std::string& prompt_hash) const;
  void put(const CacheEntry& entry);

  std::size_t size() const;
  std::size_t corrupt_lines() const noexcept { return corrupt_lines_; }
  const std::filesystem::path& file() const noexcept { return file_; }

 private:
  std::filesystem::path file_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
  std::size_t corrupt_lines_ = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct ClientOptions {
  std::uint64_t seed = 42;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_cap{30000};
  Sleeper sleeper;  // defaults to std::this_thread::sleep_for
};

struct CompletionResult {
  std::optional<std::string> text;
  std::optional<std::string> error;  // "backend_exhausted: ..." or "backend_error: ..."
  bool from_cache = false;
  int attempts = 0;
  int retries = 0;
};

class BackendClient {
 public:
  BackendClient(BackendSpec spec, std::unique_ptr<Transport> transport, ResponseCache& cache,
                ClientOptions options = {});

  /// Cache hit: returns the stored text without touching the transport.
  /// Miss: sends with up to max_retries retries of transient failures, then
  /// stores successful responses. Authentication failures throw BackendFatal.
  CompletionResult complete(const JudgingUnit& unit, const RenderedPrompt& prompt,
                            const std::string& prompt_hash);

  const BackendSpec& spec() const noexcept { return spec_; }
  std::size_t network_calls() const noexcept { return network_calls_; }
  std::size_t cache_hits() const noexcept { return cache_hits_; }
  std::size_t retries() const noexcept { return retries_; }

  /// Backoff before retry number `attempt` (1-based) for a given key.
  std::chrono::milliseconds backoff_delay(const std::string& prompt_hash, int attempt) const;

 private:
  BackendSpec spec_;
  std::unique_ptr<Transport> transport_;
  ResponseCache& cache_;
  ClientOptions options_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> retries_{0};
};

}  // namespace ujudge
