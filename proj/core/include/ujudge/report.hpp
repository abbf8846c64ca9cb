#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ujudge/analysis.hpp"
#include "ujudge/pipeline.hpp"

namespace ujudge {

struct RunMetadata {
  std::string backend_id;
  std::string model_name;
  double temperature = 0.0;
  double top_p = 1.0;
  std::string mode;  // "baseline", "session" or "mixed"
  std::string template_id;
  std::string feature_config;
  std::optional<DivergenceThresholds> thresholds;
  std::optional<FeatureDefs> feature_defs;
  std::string aggregation = "macro";  // unweighted mean over groups
  std::string tie_handling = "midrank";
};

struct EvalReport {
  RunMetadata meta;
  std::size_t n_pairs = 0;
  std::size_t errored_judgments = 0;
  std::size_t unmatched_judgments = 0;
  std::size_t unjudged_clicks = 0;
  std::vector<GroupedResult> levels;
  std::vector<std::string> notes;  // e.g. a level that could not be computed
  std::optional<DivergenceReport> divergence;
  std::optional<AblationTable> ablation;
};

/// Fills counts and every grouping level the data supports; a level whose key
/// is missing is recorded in `notes` instead.
EvalReport evaluate(const PairedLabels& paired, RunMetadata meta);

/// Machine-readable report. Undefined correlations are the string "undefined".
std::string report_to_json(const EvalReport& report);
/// Fixed-width text tables.
std::string report_to_text(const EvalReport& report);

}  // namespace ujudge
