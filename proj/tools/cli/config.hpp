#pragma once

// Run configuration file (JSON). Documented keys:
//
//   backends               list of backend specs (see BackendSpec fields)
//   cache_dir              response cache directory
//   template               prompt template path; builtin when absent
//   thresholds             {high_usefulness_min, high_relevance_min}
//   ctr_definition         clicks_per_query | clicks_over_impressions
//   dwell_last_click_rule  until_next_event | until_session_end
//   parallelism            default in-flight request bound
//   seed                   retry jitter seed
//
// A backend named "mock" (kind mock) exists unless the file overrides it.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ujudge/analysis.hpp"
#include "ujudge/backends.hpp"
#include "ujudge/session.hpp"

namespace ujudge::cli {

struct RunConfig {
  std::vector<BackendSpec> backends;
  std::filesystem::path cache_dir = ".ujudge-cache";
  std::optional<std::filesystem::path> template_path;
  DivergenceThresholds thresholds;
  FeatureDefs feature_defs;
  std::optional<int> parallelism;
  std::uint64_t seed = 42;

  /// Throws ConfigError for an unknown id.
  const BackendSpec& backend(const std::string& id) const;
};

RunConfig default_config();
/// Throws ConfigError on unknown keys or malformed values.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace ujudge::cli
