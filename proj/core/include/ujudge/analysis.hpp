#pragma once

// Rank-correlation evaluation of predicted against human usefulness labels.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ujudge/session.hpp"

namespace ujudge {

/// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

/// Spearman's rho as the Pearson correlation of midranks. nullopt ("undefined")
/// when either side has no rank variance or fewer than two points.
/// Throws UsageError on a length mismatch.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);
std::optional<double> spearman(std::span<const int> x, std::span<const int> y);

struct LabelPair {
  std::string unit_id;
  std::string session_id;
  std::string user_id;
  std::optional<std::string> task_id;
  std::string query_id;
  std::string doc_id;
  int usefulness_human = 0;
  int label_pred = 0;
  std::optional<int> relevance_human;
};

struct PairedLabels {
  std::vector<LabelPair> pairs;
  std::size_t errored_judgments = 0;    // judgments carrying an error instead of a label
  std::size_t unmatched_judgments = 0;  // judgments naming a click absent from the sessions
  std::size_t unjudged_clicks = 0;      // clicks with no judgment at all
};

/// Joins judgments with the human labels in `sessions`. Judgment unit ids
/// start with the session id, which disambiguates repeated query ids.
PairedLabels pair_labels(std::span<const TaskSession> sessions, std::span<const Judgment> judgments);

enum class GroupLevel { overall, task, session, query };

std::string_view to_string(GroupLevel level) noexcept;

struct GroupRho {
  std::string key;
  std::size_t n = 0;
  std::optional<double> rho;
};

struct GroupedResult {
  GroupLevel level = GroupLevel::overall;
  std::optional<double> rho;      // overall rho, or macro mean over included groups
  std::size_t n_pairs = 0;
  std::vector<GroupRho> groups;   // included, sorted by key
  std::vector<GroupRho> skipped;  // fewer than two pairs or undefined rho
};

/// Overall: one rho over every pair. Other levels: rho per group with at least
/// two pairs and a defined value, then the unweighted mean. Task level on data
/// without task ids is a UsageError.
GroupedResult grouped_spearman(const PairedLabels& p, GroupLevel level);

struct DivergenceThresholds {
  int high_usefulness_min = 2;
  int high_relevance_min = 2;
};

void validate_thresholds(const DivergenceThresholds& t);

enum class Bucket { hr_hu, hr_lu, lr_hu, lr_lu };

inline constexpr std::array<Bucket, 4> kBuckets{Bucket::hr_hu, Bucket::hr_lu, Bucket::lr_hu, Bucket::lr_lu};

std::string_view to_string(Bucket b) noexcept;
Bucket bucket_of(int usefulness, int relevance, const DivergenceThresholds& t) noexcept;

struct BucketResult {
  Bucket bucket = Bucket::hr_hu;
  std::size_t n = 0;
  std::optional<double> rho;
  std::vector<std::size_t> pair_indices;  // into PairedLabels::pairs
};

struct DivergenceReport {
  DivergenceThresholds thresholds;
  std::array<BucketResult, 4> buckets;  // in kBuckets order
  std::size_t included = 0;
  std::size_t excluded_no_relevance = 0;
};

/// Buckets pairs by their human labels and correlates within each bucket.
DivergenceReport divergence_report(const PairedLabels& p, const DivergenceThresholds& t);

}  // namespace ujudge
