#include "cli/config.hpp"

#include <set>

#include <json.hpp>

#include "ujudge/errors.hpp"
#include "ujudge/session_io.hpp"

namespace ujudge::cli {

using json = nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

BackendSpec backend_from_json(const json& j) {
  reject_unknown(j,
                 {"backend_id", "kind", "endpoint", "model_name", "temperature", "top_p", "max_retries", "parallelism",
                  "timeout_sec", "api_key_env", "max_prompt_chars"},
                 "backend spec");
  BackendSpec s;
  s.backend_id = j.at("backend_id").get<std::string>();
  const auto kind = j.value("kind", std::string("remote_chat"));
  auto parsed = parse_backend_kind(kind);
  if (!parsed) throw ConfigError("backend " + s.backend_id + ": unknown kind " + kind);
  s.kind = *parsed;
  s.endpoint = j.value("endpoint", std::string());
  s.model_name = j.value("model_name", s.kind == BackendKind::mock ? std::string("mock-judge") : std::string());
  s.temperature = j.value("temperature", 0.0);
  s.top_p = j.value("top_p", 1.0);
  s.max_retries = j.value("max_retries", 3);
  s.parallelism = j.value("parallelism", 1);
  s.timeout_sec = j.value("timeout_sec", 60.0);
  s.api_key_env = j.value("api_key_env", std::string());
  s.max_prompt_chars = j.value("max_prompt_chars", std::size_t{0});
  if (s.kind != BackendKind::mock && s.model_name.empty())
    throw ConfigError("backend " + s.backend_id + ": model_name is required");
  validate_backend_spec(s);
  return s;
}

}  // namespace

const BackendSpec& RunConfig::backend(const std::string& id) const {
  for (const auto& b : backends)
    if (b.backend_id == id) return b;
  std::string known;
  for (const auto& b : backends) known += (known.empty() ? "" : ", ") + b.backend_id;
  throw ConfigError("unknown backend '" + id + "' (configured: " + known + ")");
}

RunConfig default_config() {
  RunConfig c;
  c.backends.push_back(BackendSpec{});
  return c;
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig c = default_config();
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"backends", "cache_dir", "template", "thresholds", "ctr_definition", "dwell_last_click_rule",
                    "parallelism", "seed"},
                   "config");
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    if (j.contains("backends")) {
      for (const auto& b : j.at("backends")) {
        BackendSpec spec = backend_from_json(b);
        std::erase_if(c.backends, [&](const BackendSpec& x) { return x.backend_id == spec.backend_id; });
        c.backends.push_back(std::move(spec));
      }
    }
    if (j.contains("cache_dir")) c.cache_dir = resolve(j.at("cache_dir").get<std::string>());
    if (j.contains("template")) c.template_path = resolve(j.at("template").get<std::string>());
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      reject_unknown(t, {"high_usefulness_min", "high_relevance_min"}, "thresholds");
      c.thresholds.high_usefulness_min = t.value("high_usefulness_min", 2);
      c.thresholds.high_relevance_min = t.value("high_relevance_min", 2);
      try {
        validate_thresholds(c.thresholds);
      } catch (const UsageError& e) {
        throw ConfigError(e.what());
      }
    }
    if (j.contains("ctr_definition")) {
      const auto v = j.at("ctr_definition").get<std::string>();
      auto d = parse_ctr_definition(v);
      if (!d) throw ConfigError("unknown ctr_definition: " + v);
      c.feature_defs.ctr_definition = *d;
    }
    if (j.contains("dwell_last_click_rule")) {
      const auto v = j.at("dwell_last_click_rule").get<std::string>();
      auto d = parse_dwell_rule(v);
      if (!d) throw ConfigError("unknown dwell_last_click_rule: " + v);
      c.feature_defs.dwell_last_click_rule = *d;
    }
    if (j.contains("parallelism")) {
      c.parallelism = j.at("parallelism").get<int>();
      if (*c.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path());
}

}  // namespace ujudge::cli
