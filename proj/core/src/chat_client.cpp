#include <cstdlib>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "ujudge/backends.hpp"
#include "ujudge/errors.hpp"

namespace ujudge {

using json = nlohmann::json;

ChatCompletionTransport::ChatCompletionTransport(const BackendSpec& spec) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(spec.endpoint, m, url))
    throw ConfigError("backend " + spec.backend_id + ": endpoint is not an http(s) URL: " + spec.endpoint);
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
  if (!spec.api_key_env.empty()) {
    const char* key = std::getenv(spec.api_key_env.c_str());
    if (!key || !*key)
      throw BackendFatal("backend " + spec.backend_id + ": credential variable " + spec.api_key_env + " is not set");
    api_key_ = key;
  }
}

std::string ChatCompletionTransport::request_body(const RenderedPrompt& prompt, const BackendSpec& spec) {
  json messages = json::array();
  if (!prompt.system.empty()) messages.push_back({{"role", "system"}, {"content", prompt.system}});
  messages.push_back({{"role", "user"}, {"content", prompt.user}});
  json body{{"model", spec.model_name},
            {"messages", std::move(messages)},
            {"temperature", spec.temperature},
            {"top_p", spec.top_p}};
  return body.dump();
}

std::optional<std::string> ChatCompletionTransport::response_content(std::string_view body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) return std::nullopt;
  const json& first = (*choices)[0];
  auto message = first.find("message");
  if (message == first.end() || !message->is_object()) return std::nullopt;
  auto content = message->find("content");
  if (content == message->end() || !content->is_string()) return std::nullopt;
  return content->get<std::string>();
}

CallStatus ChatCompletionTransport::classify_http_status(int status) noexcept {
  if (status >= 200 && status < 300) return CallStatus::ok;
  if (status == 401 || status == 403) return CallStatus::auth;
  if (status == 408 || status == 425 || status == 429 || status >= 500) return CallStatus::transient;
  return CallStatus::permanent;
}

CallResult ChatCompletionTransport::send(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration<double>(request.spec.timeout_sec);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(path_, headers, request_body(request.prompt, request.spec), "application/json");
  if (!res) return {CallStatus::transient, {}, "transport error: " + httplib::to_string(res.error())};

  const CallStatus status = classify_http_status(res->status);
  if (status != CallStatus::ok) return {status, {}, "HTTP " + std::to_string(res->status)};
  auto content = response_content(res->body);
  if (!content) return {CallStatus::permanent, {}, "response lacks choices[0].message.content"};
  return {CallStatus::ok, std::move(*content), {}};
}

}  // namespace ujudge
