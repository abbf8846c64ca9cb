#include "ujudge/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ujudge/errors.hpp"

namespace ujudge {

namespace fs = std::filesystem;

std::optional<EventKind> parse_event_kind(std::string_view s) noexcept {
  if (s == "QUERY") return EventKind::query;
  if (s == "CLICK") return EventKind::click;
  if (s == "SCROLL") return EventKind::scroll;
  if (s == "HOVER") return EventKind::hover;
  if (s == "MOVE") return EventKind::move;
  if (s == "SESSION_END") return EventKind::session_end;
  return std::nullopt;
}

namespace {

double clamp_dwell(double d, const char* what, std::size_t index, std::vector<std::string>& warnings) {
  if (d >= 0) return d;
  warnings.push_back(std::string("negative ") + what + " dwell clamped to 0 (event " +
                     std::to_string(index) + ")");
  return 0.0;
}

}  // namespace

DwellTimes derive_dwell_times(std::span<const TimedEvent> events, DwellLastClickRule rule) {
  DwellTimes out;
  if (events.empty()) return out;

  double session_end = events.back().t;
  for (const auto& e : events)
    if (e.kind != EventKind::other) session_end = e.t;
  for (const auto& e : events)
    if (e.kind == EventKind::session_end) session_end = e.t;

  auto next_index = [&](std::size_t from, auto pred) -> std::optional<std::size_t> {
    for (std::size_t j = from + 1; j < events.size(); ++j)
      if (pred(events[j].kind)) return j;
    return std::nullopt;
  };
  auto is_navigation = [](EventKind k) { return k == EventKind::query || k == EventKind::click; };
  auto is_known = [](EventKind k) { return k != EventKind::other; };

  std::optional<double> first_query;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.kind == EventKind::click) {
      double until = session_end;
      if (auto j = next_index(i, is_navigation)) {
        until = events[*j].t;
      } else if (rule == DwellLastClickRule::until_next_event) {
        if (auto k = next_index(i, is_known)) until = events[*k].t;
      }
      out.url_dwell.push_back(clamp_dwell(until - e.t, "url", i, out.warnings));
    } else if (e.kind == EventKind::query) {
      if (!first_query) first_query = e.t;
      double until = session_end;
      if (auto j = next_index(i, [](EventKind k) { return k == EventKind::query; }))
        until = events[*j].t;
      out.query_dwell.push_back(clamp_dwell(until - e.t, "query", i, out.warnings));
    }
  }
  if (first_query) out.task_dwell = clamp_dwell(session_end - *first_query, "task", 0, out.warnings);
  return out;
}

CtrResult derive_ctr(std::span<const TaskSession> sessions_of_user, CtrDefinition def) {
  double clicks = 0;
  double denom = 0;
  for (const auto& s : sessions_of_user) {
    for (const auto& q : s.queries) {
      if (def == CtrDefinition::clicks_per_query) {
        clicks += static_cast<double>(q.clicks.size());
        denom += 1;
      } else if (q.serp_size) {
        clicks += static_cast<double>(q.clicks.size());
        denom += *q.serp_size;
      }
    }
  }
  CtrResult r;
  if (denom <= 0) {
    std::string who = sessions_of_user.empty() ? std::string("<none>") : sessions_of_user.front().user_id;
    r.warning = "ctr undefined for user " + who + ": denominator is 0 under " +
                std::string(to_string(def));
    return r;
  }
  r.ctr = clicks / denom;
  return r;
}

namespace {

struct Columns {
  std::unordered_map<std::string, std::size_t> index;
  std::size_t width = 0;

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

struct RawRow {
  std::string location;
  std::size_t order = 0;  // global input order, tie-breaker for equal timestamps
  std::string user_id;
  std::string session_id;
  std::string task_id;
  std::string task_description;
  EventKind kind = EventKind::other;
  double t = 0.0;
  std::string query_id;
  std::string query_text;
  std::optional<int> serp_size;
  std::optional<int> query_satisfaction;
  std::optional<int> session_satisfaction;
  std::string doc_id;
  std::string url;
  std::string title;
  std::string summary;
  int rank = 0;
  int usefulness = 0;
  std::optional<int> relevance;
};

std::string unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char n = s[i + 1];
      if (n == 't') { out += '\t'; ++i; continue; }
      if (n == 'n') { out += '\n'; ++i; continue; }
      if (n == '\\') { out += '\\'; ++i; continue; }
    }
    out += s[i];
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

struct RowError {
  std::string reason;
};

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string tmp(s);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

class RowReader {
 public:
  RowReader(DatasetKind kind, const Columns& cols, const std::vector<std::string>& fields)
      : kind_(kind), cols_(cols), fields_(fields) {}

  std::string text(const char* name) const {
    auto i = cols_.find(name);
    return i ? unescape(fields_[*i]) : std::string();
  }

  std::optional<int> optional_int(const char* name) const {
    const auto raw = text(name);
    if (raw.empty()) return std::nullopt;
    auto v = parse_int(raw);
    if (!v) throw RowError{std::string("non-integer ") + name + ": " + raw};
    return v;
  }

  std::optional<int> optional_label(const char* name) const {
    auto v = optional_int(name);
    if (v && !is_label(*v)) throw RowError{std::string(name) + " out of range 0..3: " + std::to_string(*v)};
    return v;
  }

  DatasetKind kind() const { return kind_; }

 private:
  DatasetKind kind_;
  const Columns& cols_;
  const std::vector<std::string>& fields_;
};

RawRow parse_row(const RowReader& r) {
  RawRow row;
  row.user_id = r.text("user_id");
  row.session_id = r.text("session_id");
  if (row.user_id.empty()) throw RowError{"missing user_id"};
  if (row.session_id.empty()) throw RowError{"missing session_id"};
  row.task_id = r.text("task_id");
  if (r.kind() == DatasetKind::kdd19 && row.task_id.empty()) throw RowError{"missing task_id"};
  row.task_description = r.text("task_description");

  const auto event = r.text("event");
  if (event.empty()) throw RowError{"missing event"};
  row.kind = parse_event_kind(event).value_or(EventKind::other);

  const auto ts = r.text("timestamp");
  auto t = parse_real(ts);
  if (!t) throw RowError{"bad timestamp: " + ts};
  row.t = *t;

  row.session_satisfaction = r.optional_int("session_satisfaction");

  if (row.kind == EventKind::query) {
    row.query_id = r.text("query_id");
    row.query_text = r.text("query_text");
    if (row.query_text.empty()) throw RowError{"QUERY row without query_text"};
    row.serp_size = r.optional_int("serp_size");
    if (row.serp_size && *row.serp_size < 0) throw RowError{"negative serp_size"};
    row.query_satisfaction = r.optional_int("query_satisfaction");
  } else if (row.kind == EventKind::click) {
    row.query_id = r.text("query_id");
    row.doc_id = r.text("doc_id");
    if (row.doc_id.empty()) throw RowError{"CLICK row without doc_id"};
    row.url = r.text("url");
    row.title = r.text("title");
    row.summary = r.text("summary");
    auto rank = r.optional_int("rank");
    if (!rank) throw RowError{"CLICK row without rank"};
    if (*rank < 1) throw RowError{"rank below 1: " + std::to_string(*rank)};
    row.rank = *rank;
    auto useful = r.optional_label("usefulness");
    if (!useful) throw RowError{"CLICK row without usefulness label"};
    row.usefulness = *useful;
    if (r.kind() != DatasetKind::qref) row.relevance = r.optional_label("relevance");
  }
  return row;
}

std::vector<fs::path> source_files(const fs::path& source) {
  std::error_code ec;
  if (!fs::exists(source, ec)) throw DataError("input path does not exist: " + source.string());
  if (!fs::is_directory(source, ec)) return {source};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(source, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tsv") files.push_back(entry.path());
  }
  if (ec) throw DataError("cannot list input directory: " + source.string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .tsv files in input directory: " + source.string());
  return files;
}

Columns parse_header(const std::string& line, DatasetKind kind, const fs::path& file) {
  Columns cols;
  auto names = split_tabs(line);
  cols.width = names.size();
  for (std::size_t i = 0; i < names.size(); ++i) cols.index.emplace(names[i], i);
  std::vector<std::string> required{"user_id", "session_id", "event", "timestamp"};
  if (kind == DatasetKind::kdd19) required.push_back("task_id");
  for (const auto& name : required) {
    if (!cols.find(name))
      throw DataError(file.string() + ": header lacks required column '" + name + "'");
  }
  return cols;
}

struct SessionRows {
  std::vector<RawRow> rows;
};

// Builds one session from its time-sorted rows. Rows that contradict the
// session structure are skipped here (reported through `warnings`).
std::optional<TaskSession> build_session(std::vector<RawRow>& rows, DatasetKind kind,
                                         const FeatureDefs& defs, IngestResult& result) {
  std::stable_sort(rows.begin(), rows.end(), [](const RawRow& a, const RawRow& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.order < b.order;
  });

  TaskSession s;
  s.session_id = rows.front().session_id;
  s.user_id = rows.front().user_id;
  s.dataset_kind = kind;
  s.feature_defs = defs;

  auto skip = [&](const RawRow& row, std::string reason) {
    result.warnings.push_back({row.location, std::move(reason)});
    ++result.rows_skipped;
  };

  std::vector<TimedEvent> timeline;
  std::map<std::string, std::size_t> query_index;
  std::size_t generated_ids = 0;
  std::vector<std::pair<std::size_t, std::size_t>> click_slots;  // (query, click) in timeline order
  for (const auto& row : rows) {
    if (row.user_id != s.user_id) {
      skip(row, "user_id " + row.user_id + " differs from session owner " + s.user_id);
      continue;
    }
    if (!row.task_id.empty()) {
      if (!s.task_id) {
        s.task_id = row.task_id;
      } else if (*s.task_id != row.task_id) {
        skip(row, "task_id " + row.task_id + " differs from session task " + *s.task_id);
        continue;
      }
    }
    if (row.kind == EventKind::query) {
      std::string qid = row.query_id;
      if (qid.empty()) {
        do {
          qid = "q" + std::to_string(++generated_ids);
        } while (query_index.count(qid));
      }
      if (query_index.count(qid)) {
        skip(row, "duplicate query_id " + qid);
        continue;
      }
      QueryRecord q;
      q.query_id = qid;
      q.query_text = row.query_text;
      q.issue_time = row.t;
      q.serp_size = row.serp_size;
      q.query_satisfaction = row.query_satisfaction;
      query_index.emplace(qid, s.queries.size());
      s.queries.push_back(std::move(q));
    } else if (row.kind == EventKind::click) {
      std::size_t qi = 0;
      if (!row.query_id.empty()) {
        auto it = query_index.find(row.query_id);
        if (it == query_index.end()) {
          skip(row, "click references unknown or later query " + row.query_id);
          continue;
        }
        qi = it->second;
      } else if (s.queries.empty()) {
        skip(row, "click before any query");
        continue;
      } else {
        qi = s.queries.size() - 1;
      }
      auto& q = s.queries[qi];
      bool dup = std::any_of(q.clicks.begin(), q.clicks.end(),
                             [&](const ClickedDoc& c) { return c.doc_id == row.doc_id; });
      if (dup) {
        skip(row, "duplicate click on " + q.query_id + "/" + row.doc_id);
        continue;
      }
      ClickedDoc c;
      c.doc_id = row.doc_id;
      c.url = row.url;
      c.title = row.title;
      c.summary = row.summary;
      c.serp_rank = row.rank;
      c.click_time = row.t;
      c.usefulness_human = row.usefulness;
      c.relevance_human = row.relevance;
      click_slots.emplace_back(qi, q.clicks.size());
      q.clicks.push_back(std::move(c));
      ++result.click_rows_accepted;
    } else if (row.kind == EventKind::other) {
      ++result.ignored_event_rows;
    }
    if (!s.task_description && !row.task_description.empty()) s.task_description = row.task_description;
    if (!s.session_satisfaction && row.session_satisfaction) s.session_satisfaction = row.session_satisfaction;
    if (row.kind != EventKind::other) timeline.push_back({row.kind, row.t});
  }

  if (timeline.empty()) return std::nullopt;

  // Rebase to session start.
  const double start = timeline.front().t;
  for (auto& e : timeline) e.t -= start;
  for (auto& q : s.queries) {
    q.issue_time -= start;
    for (auto& c : q.clicks) c.click_time -= start;
  }

  auto dwell = derive_dwell_times(timeline, defs.dwell_last_click_rule);
  for (auto& w : dwell.warnings) result.warnings.push_back({s.session_id, std::move(w)});

  for (std::size_t i = 0; i < click_slots.size() && i < dwell.url_dwell.size(); ++i) {
    auto [qi, ci] = click_slots[i];
    s.queries[qi].clicks[ci].url_dwell_sec = dwell.url_dwell[i];
  }
  for (std::size_t i = 0; i < s.queries.size() && i < dwell.query_dwell.size(); ++i)
    s.queries[i].query_dwell_sec = dwell.query_dwell[i];
  s.task_dwell_sec = dwell.task_dwell;
  return s;
}

}  // namespace

IngestResult ingest_dataset(DatasetKind kind, const fs::path& source, const FeatureDefs& defs) {
  IngestResult result;
  std::map<std::string, SessionRows> by_session;
  std::size_t order = 0;

  for (const auto& file : source_files(source)) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot read input file: " + file.string());
    std::string line;
    std::size_t line_no = 0;
    std::optional<Columns> cols;
    const std::string name = file.filename().string();
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      if (!cols) {
        cols = parse_header(line, kind, file);
        continue;
      }
      ++result.rows_read;
      const std::string location = name + ":" + std::to_string(line_no);
      auto fields = split_tabs(line);
      if (fields.size() != cols->width) {
        result.warnings.push_back({location, "expected " + std::to_string(cols->width) +
                                                 " fields, found " + std::to_string(fields.size())});
        ++result.rows_skipped;
        continue;
      }
      try {
        RawRow row = parse_row(RowReader(kind, *cols, fields));
        row.location = location;
        row.order = order++;
        by_session[row.session_id].rows.push_back(std::move(row));
      } catch (const RowError& e) {
        result.warnings.push_back({location, e.reason});
        ++result.rows_skipped;
      }
    }
    if (!cols) throw DataError("input file has no header row: " + file.string());
  }

  for (auto& [sid, group] : by_session) {
    auto s = build_session(group.rows, kind, defs, result);
    if (!s) continue;
    auto violations = validate_session(*s);
    if (!violations.empty()) {
      for (auto& v : violations) result.warnings.push_back({sid, "session dropped: " + v});
      result.click_rows_accepted -= s->click_count();
      result.rows_skipped += group.rows.size();
      continue;
    }
    result.sessions.push_back(std::move(*s));
  }

  std::sort(result.sessions.begin(), result.sessions.end(),
            [](const TaskSession& a, const TaskSession& b) {
              const std::string empty;
              const auto& ta = a.task_id ? *a.task_id : empty;
              const auto& tb = b.task_id ? *b.task_id : empty;
              return std::tie(a.user_id, ta, a.session_id) < std::tie(b.user_id, tb, b.session_id);
            });

  // CTR is a per-user feature shared by all of the user's sessions.
  for (std::size_t i = 0; i < result.sessions.size();) {
    std::size_t j = i;
    while (j < result.sessions.size() && result.sessions[j].user_id == result.sessions[i].user_id) ++j;
    std::span<const TaskSession> user_sessions(result.sessions.data() + i, j - i);
    auto ctr = derive_ctr(user_sessions, defs.ctr_definition);
    if (ctr.warning) result.warnings.push_back({result.sessions[i].user_id, *ctr.warning});
    for (std::size_t k = i; k < j; ++k) result.sessions[k].user_ctr = ctr.ctr;
    i = j;
  }
  return result;
}

std::string format_warnings(std::span<const IngestWarning> warnings) {
  std::string out = "location\treason\n";
  for (const auto& w : warnings) {
    out += w.location;
    out += '\t';
    out += w.reason;
    out += '\n';
  }
  return out;
}

}  // namespace ujudge
