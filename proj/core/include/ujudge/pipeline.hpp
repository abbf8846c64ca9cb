#pragma once

// Judging runs: render, hash, complete and extract for every unit, with a
// bounded worker pool. Output order follows the unit order, never the
// completion order.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ujudge/analysis.hpp"
#include "ujudge/backends.hpp"
#include "ujudge/prompting.hpp"
#include "ujudge/session.hpp"

namespace ujudge {

struct JudgeOptions {
  RenderOptions render;
  /// Overrides the backend spec's parallelism when set.
  std::optional<int> parallelism;
};

struct JudgmentFailure {
  std::string unit_id;
  std::string query_id;
  std::string doc_id;
  std::string error;
};

struct JudgeRun {
  std::vector<Judgment> judgments;  // unit order, then target order
  std::vector<JudgmentFailure> failures;
  std::vector<std::string> render_warnings;  // "<unit_id>: <warning>"
  std::size_t units = 0;
  std::size_t ok = 0;
  std::size_t errors = 0;
  std::size_t cache_hits = 0;
  std::size_t backend_calls = 0;
  std::size_t retries = 0;
  std::size_t max_in_flight = 0;
};

/// BackendFatal from any worker stops the run and is rethrown.
JudgeRun run_judging(std::span<const JudgingUnit> units, const PromptTemplate& tmpl, BackendClient& client,
                     const JudgeOptions& options = {});

/// The seven non-empty subsets of {R, S, U}: R+S+U, R+S, R+U, S+U, R, S, U.
std::vector<FeatureConfig> default_ablation_configs();

struct AblationRow {
  FeatureConfig config;
  std::optional<double> rho;
  std::size_t n = 0;
  std::size_t errors = 0;
};

struct AblationTable {
  JudgingMode mode = JudgingMode::session;
  std::vector<AblationRow> rows;
};

/// For each config: rebuild units, render, judge and take the overall rho.
/// Throws UsageError when `configs` is empty.
AblationTable run_ablation(std::span<const TaskSession> sessions, BackendClient& client, JudgingMode mode,
                           std::span<const FeatureConfig> configs, const PromptTemplate& tmpl,
                           const JudgeOptions& options = {});

}  // namespace ujudge
