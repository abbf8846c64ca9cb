#include "ujudge/backends.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <random>
#include <thread>

#include <json.hpp>

#include "ujudge/errors.hpp"

namespace ujudge {

using json = nlohmann::json;

std::string_view to_string(BackendKind k) noexcept {
  switch (k) {
    case BackendKind::remote_chat: return "remote_chat";
    case BackendKind::local_chat: return "local_chat";
    case BackendKind::mock: return "mock";
  }
  return "mock";
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) noexcept {
  if (s == "remote_chat") return BackendKind::remote_chat;
  if (s == "local_chat") return BackendKind::local_chat;
  if (s == "mock") return BackendKind::mock;
  return std::nullopt;
}

void validate_backend_spec(const BackendSpec& spec) {
  if (spec.backend_id.empty()) throw ConfigError("backend_id must not be empty");
  if (spec.parallelism < 1) throw ConfigError("backend " + spec.backend_id + ": parallelism must be >= 1");
  if (spec.max_retries < 0) throw ConfigError("backend " + spec.backend_id + ": max_retries must be >= 0");
  if (!(spec.timeout_sec > 0)) throw ConfigError("backend " + spec.backend_id + ": timeout_sec must be > 0");
  if (spec.temperature < 0) throw ConfigError("backend " + spec.backend_id + ": temperature must be >= 0");
  if (!(spec.top_p > 0 && spec.top_p <= 1)) throw ConfigError("backend " + spec.backend_id + ": top_p must be in (0, 1]");
  if (spec.kind != BackendKind::mock && spec.endpoint.empty())
    throw ConfigError("backend " + spec.backend_id + ": endpoint is required for " + std::string(to_string(spec.kind)));
}

// ---------------------------------------------------------------------------
// Mock judge

std::string mock_judge(const JudgingUnit& unit) {
  std::string out;
  for (std::size_t i = 0; i < unit.target_clicks.size(); ++i) {
    const ClickedDoc* c = unit.find_click(unit.target_clicks[i]);
    if (!c) throw DataError("unit " + unit.unit_id + " targets a click missing from its context");
    const double dwell = c->url_dwell_sec;
    int label = dwell < 5 ? 0 : dwell < 30 ? 1 : dwell < 60 ? 2 : 3;
    if (unit.feature_config.use_relevance && c->relevance_human)
      label = std::clamp((label + *c->relevance_human + 1) / 2, kMinLabel, kMaxLabel);
    if (i) out += '\n';
    out += "doc " + std::to_string(i + 1) + ": " + std::to_string(label);
  }
  return out;
}

CallResult MockTransport::send(const ChatRequest& request) {
  return {CallStatus::ok, mock_judge(request.unit), {}};
}

std::unique_ptr<Transport> make_transport(const BackendSpec& spec) {
  validate_backend_spec(spec);
  if (spec.kind == BackendKind::mock) return std::make_unique<MockTransport>();
  return std::make_unique<ChatCompletionTransport>(spec);
}

// ---------------------------------------------------------------------------
// Response cache

namespace {

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create cache directory " + dir.string() + ": " + ec.message());
  file_ = dir / "responses.jsonl";
  std::ifstream in(file_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      entries_[j.at("prompt_hash").get<std::string>()] = j.at("raw_response").get<std::string>();
    } catch (const json::exception&) {
      ++corrupt_lines_;
    }
  }
}

std::optional<std::string> ResponseCache::get(const std::string& prompt_hash) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(prompt_hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const CacheEntry& entry) {
  std::lock_guard lock(mu_);
  entries_[entry.prompt_hash] = entry.raw_response;
  if (file_.empty()) return;
  json j{{"prompt_hash", entry.prompt_hash},
         {"raw_response", entry.raw_response},
         {"created_at", entry.created_at.empty() ? utc_now() : entry.created_at},
         {"backend_id", entry.backend_id}};
  const std::string line = j.dump() + "\n";
  // O_APPEND keeps concurrent writers (other processes included) from
  // interleaving inside a record.
  int fd = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw DataError("cannot open cache file " + file_.string());
  std::size_t written = 0;
  while (written < line.size()) {
    auto n = ::write(fd, line.data() + written, line.size() - written);
    if (n <= 0) break;
    written += static_cast<std::size_t>(n);
  }
  ::close(fd);
  if (written != line.size()) throw DataError("short write to cache file " + file_.string());
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Client

BackendClient::BackendClient(BackendSpec spec, std::unique_ptr<Transport> transport, ResponseCache& cache,
                             ClientOptions options)
    : spec_(std::move(spec)), transport_(std::move(transport)), cache_(cache), options_(std::move(options)) {
  if (!options_.sleeper) options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::milliseconds BackendClient::backoff_delay(const std::string& prompt_hash, int attempt) const {
  const auto base = options_.backoff_base.count();
  const auto cap = options_.backoff_cap.count();
  long long delay = base;
  for (int i = 1; i < attempt && delay < cap; ++i) delay *= 2;
  delay = std::min<long long>(delay, cap);
  std::seed_seq seq{static_cast<std::uint32_t>(options_.seed), static_cast<std::uint32_t>(options_.seed >> 32),
                    static_cast<std::uint32_t>(std::hash<std::string>{}(prompt_hash)),
                    static_cast<std::uint32_t>(attempt)};
  std::mt19937_64 rng(seq);
  const long long jitter = delay > 1 ? static_cast<long long>(rng() % static_cast<std::uint64_t>(delay / 2 + 1)) : 0;
  return std::chrono::milliseconds(delay + jitter);
}

CompletionResult BackendClient::complete(const JudgingUnit& unit, const RenderedPrompt& prompt,
                                         const std::string& prompt_hash) {
  CompletionResult result;
  if (auto hit = cache_.get(prompt_hash)) {
    ++cache_hits_;
    result.text = std::move(*hit);
    result.from_cache = true;
    return result;
  }

  const ChatRequest request{unit, prompt, spec_};
  std::string last_detail;
  for (int attempt = 0; attempt <= spec_.max_retries; ++attempt) {
    if (attempt > 0) {
      ++result.retries;
      ++retries_;
      options_.sleeper(backoff_delay(prompt_hash, attempt));
    }
    ++result.attempts;
    ++network_calls_;
    CallResult call = transport_->send(request);
    switch (call.status) {
      case CallStatus::ok:
        cache_.put({prompt_hash, call.text, {}, spec_.backend_id});
        result.text = std::move(call.text);
        return result;
      case CallStatus::auth:
        throw BackendFatal("backend " + spec_.backend_id + " rejected credentials: " + call.detail);
      case CallStatus::permanent:
        result.error = "backend_error: " + call.detail;
        return result;
      case CallStatus::transient:
        last_detail = call.detail;
        break;
    }
  }
  result.error = "backend_exhausted: " + std::to_string(result.attempts) + " attempts, last: " + last_detail;
  return result;
}

}  // namespace ujudge
