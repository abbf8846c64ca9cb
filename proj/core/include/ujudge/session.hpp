#pragma once

// Canonical domain types for search sessions, clicks and judging units.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ujudge {

/// Ordinal labels live on a 0..3 scale everywhere in the system.
inline constexpr int kMinLabel = 0;
inline constexpr int kMaxLabel = 3;

constexpr bool is_label(int v) noexcept { return v >= kMinLabel && v <= kMaxLabel; }

enum class DatasetKind { kdd19, qref, synthetic };

enum class CtrDefinition { clicks_over_impressions, clicks_per_query };

enum class DwellLastClickRule { until_session_end, until_next_event };

std::string_view to_string(DatasetKind k) noexcept;
std::string_view to_string(CtrDefinition d) noexcept;
std::string_view to_string(DwellLastClickRule r) noexcept;
std::optional<DatasetKind> parse_dataset_kind(std::string_view s) noexcept;
std::optional<CtrDefinition> parse_ctr_definition(std::string_view s) noexcept;
std::optional<DwellLastClickRule> parse_dwell_rule(std::string_view s) noexcept;

/// How behavioral features were derived. Stored on every ingested session.
struct FeatureDefs {
  CtrDefinition ctr_definition = CtrDefinition::clicks_per_query;
  DwellLastClickRule dwell_last_click_rule = DwellLastClickRule::until_next_event;

  friend bool operator==(const FeatureDefs&, const FeatureDefs&) = default;
};

struct ClickedDoc {
  std::string doc_id;
  std::string url;
  std::string title;
  std::string summary;
  int serp_rank = 1;
  double click_time = 0.0;  // seconds relative to session start
  double url_dwell_sec = 0.0;
  int usefulness_human = 0;
  std::optional<int> relevance_human;

  friend bool operator==(const ClickedDoc&, const ClickedDoc&) = default;
};

struct QueryRecord {
  std::string query_id;
  std::string query_text;
  double issue_time = 0.0;
  double query_dwell_sec = 0.0;
  std::optional<int> query_satisfaction;  // passed through uninterpreted
  std::optional<int> serp_size;
  std::vector<ClickedDoc> clicks;

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

struct TaskSession {
  std::string session_id;
  std::string user_id;
  std::optional<std::string> task_id;
  std::optional<std::string> task_description;
  double task_dwell_sec = 0.0;
  std::optional<int> session_satisfaction;
  std::optional<double> user_ctr;
  std::vector<QueryRecord> queries;
  DatasetKind dataset_kind = DatasetKind::synthetic;
  FeatureDefs feature_defs;

  std::size_t click_count() const noexcept;

  friend bool operator==(const TaskSession&, const TaskSession&) = default;
};

/// Feature groups that can be toggled in a prompt. Query text and document
/// fields are always rendered and have no flag.
struct FeatureConfig {
  bool use_relevance = true;     // R
  bool use_satisfaction = true;  // S
  bool use_behavior = true;      // U

  /// "R+S+U", "R", ... ; "none" when every flag is off.
  std::string label() const;
  /// Accepts any subset of the letters R, S, U (Q and D are tolerated and
  /// ignored), optionally separated by '+'. "none" or "" disables everything.
  static FeatureConfig parse(std::string_view spec);

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

enum class JudgingMode { baseline, session };

std::string_view to_string(JudgingMode m) noexcept;
std::optional<JudgingMode> parse_judging_mode(std::string_view s) noexcept;

struct ClickRef {
  std::string query_id;
  std::string doc_id;

  friend bool operator==(const ClickRef&, const ClickRef&) = default;
  friend auto operator<=>(const ClickRef&, const ClickRef&) = default;
};

/// The atom sent to a model. In baseline mode `context` holds only the one
/// query with its one click; in session mode it holds the whole session.
struct JudgingUnit {
  std::string unit_id;
  JudgingMode mode = JudgingMode::baseline;
  std::vector<ClickRef> target_clicks;
  TaskSession context;
  FeatureConfig feature_config;

  const ClickedDoc* find_click(const ClickRef& ref) const noexcept;
  const QueryRecord* find_query(std::string_view query_id) const noexcept;
};

enum class ExtractionRule { bare_integer, tagged_label, trailing_reasoning };

std::string_view to_string(ExtractionRule r) noexcept;
std::optional<ExtractionRule> parse_extraction_rule(std::string_view s) noexcept;

/// One model verdict for one target click. Exactly one of label_pred / error is set.
struct Judgment {
  std::string unit_id;
  std::string query_id;
  std::string doc_id;
  std::optional<int> label_pred;
  std::string raw_response;
  std::string backend_id;
  std::string prompt_hash;
  std::optional<ExtractionRule> extraction_rule;
  std::optional<std::string> error;
  double temperature = 0.0;
  double top_p = 1.0;

  bool ok() const noexcept { return label_pred.has_value(); }

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

/// Returns every violated invariant in document order; empty means valid.
std::vector<std::string> validate_session(const TaskSession& s);

/// Checks the label-XOR-error invariant and the label range.
std::vector<std::string> validate_judgment(const Judgment& j);

}  // namespace ujudge
