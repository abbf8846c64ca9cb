#pragma once

// Adapters from raw behavior-log exports to canonical TaskSessions, plus the
// dwell-time and CTR derivations.
//
// Raw input is tab-separated with a header row naming the columns. A source
// path may be a single file or a directory (every *.tsv inside, in name
// order). Recognized columns:
//
//   user_id session_id event timestamp           required
//   task_id                                      required for kdd19
//   task_description query_id query_text serp_size query_satisfaction
//   doc_id url title summary rank usefulness relevance session_satisfaction
//
// `event` is one of QUERY CLICK SCROLL HOVER MOVE SESSION_END; other kinds
// are kept in the row count but do not affect derivation. Timestamps are
// seconds (absolute epochs are fine) and are rebased to the session start.
// The qref adapter never reads `relevance`.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ujudge/session.hpp"

namespace ujudge {

enum class EventKind { query, click, scroll, hover, move, session_end, other };

std::optional<EventKind> parse_event_kind(std::string_view s) noexcept;

struct TimedEvent {
  EventKind kind = EventKind::other;
  double t = 0.0;
};

struct DwellTimes {
  std::vector<double> url_dwell;    // one per click event, in timeline order
  std::vector<double> query_dwell;  // one per query event, in timeline order
  double task_dwell = 0.0;
  std::vector<std::string> warnings;
};

/// Expects `events` sorted by time. Any negative dwell produced by
/// out-of-order timestamps is clamped to 0 with a warning.
DwellTimes derive_dwell_times(std::span<const TimedEvent> events, DwellLastClickRule rule);

struct CtrResult {
  std::optional<double> ctr;
  std::optional<std::string> warning;
};

/// CTR over every query of one user's sessions.
CtrResult derive_ctr(std::span<const TaskSession> sessions_of_user, CtrDefinition def);

struct IngestWarning {
  std::string location;  // "file:line" for skipped rows, session id otherwise
  std::string reason;

  friend bool operator==(const IngestWarning&, const IngestWarning&) = default;
};

struct IngestResult {
  std::vector<TaskSession> sessions;
  std::vector<IngestWarning> warnings;
  std::size_t rows_read = 0;
  std::size_t rows_skipped = 0;
  std::size_t click_rows_accepted = 0;
  std::size_t ignored_event_rows = 0;
};

/// Throws DataError when the source is unreadable or a file header lacks a
/// required column. Malformed rows are skipped and reported as warnings.
IngestResult ingest_dataset(DatasetKind kind, const std::filesystem::path& source,
                            const FeatureDefs& defs);

/// Renders warnings as the sidecar TSV (`location<TAB>reason`, with header).
std::string format_warnings(std::span<const IngestWarning> warnings);

}  // namespace ujudge
