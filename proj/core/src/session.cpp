#include "ujudge/session.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include "ujudge/errors.hpp"

namespace ujudge {

std::string_view to_string(DatasetKind k) noexcept {
  switch (k) {
    case DatasetKind::kdd19: return "kdd19";
    case DatasetKind::qref: return "qref";
    case DatasetKind::synthetic: return "synthetic";
  }
  return "synthetic";
}

std::string_view to_string(CtrDefinition d) noexcept {
  switch (d) {
    case CtrDefinition::clicks_over_impressions: return "clicks_over_impressions";
    case CtrDefinition::clicks_per_query: return "clicks_per_query";
  }
  return "clicks_per_query";
}

std::string_view to_string(DwellLastClickRule r) noexcept {
  switch (r) {
    case DwellLastClickRule::until_session_end: return "until_session_end";
    case DwellLastClickRule::until_next_event: return "until_next_event";
  }
  return "until_next_event";
}

std::optional<DatasetKind> parse_dataset_kind(std::string_view s) noexcept {
  if (s == "kdd19") return DatasetKind::kdd19;
  if (s == "qref") return DatasetKind::qref;
  if (s == "synthetic") return DatasetKind::synthetic;
  return std::nullopt;
}

std::optional<CtrDefinition> parse_ctr_definition(std::string_view s) noexcept {
  if (s == "clicks_over_impressions" || s == "impressions") return CtrDefinition::clicks_over_impressions;
  if (s == "clicks_per_query" || s == "per-query") return CtrDefinition::clicks_per_query;
  return std::nullopt;
}

std::optional<DwellLastClickRule> parse_dwell_rule(std::string_view s) noexcept {
  if (s == "until_session_end" || s == "session-end") return DwellLastClickRule::until_session_end;
  if (s == "until_next_event" || s == "next-event") return DwellLastClickRule::until_next_event;
  return std::nullopt;
}

std::string_view to_string(JudgingMode m) noexcept {
  return m == JudgingMode::baseline ? "baseline" : "session";
}

std::optional<JudgingMode> parse_judging_mode(std::string_view s) noexcept {
  if (s == "baseline") return JudgingMode::baseline;
  if (s == "session") return JudgingMode::session;
  return std::nullopt;
}

std::string_view to_string(ExtractionRule r) noexcept {
  switch (r) {
    case ExtractionRule::bare_integer: return "bare_integer";
    case ExtractionRule::tagged_label: return "tagged_label";
    case ExtractionRule::trailing_reasoning: return "trailing_reasoning";
  }
  return "bare_integer";
}

std::optional<ExtractionRule> parse_extraction_rule(std::string_view s) noexcept {
  if (s == "bare_integer") return ExtractionRule::bare_integer;
  if (s == "tagged_label") return ExtractionRule::tagged_label;
  if (s == "trailing_reasoning") return ExtractionRule::trailing_reasoning;
  return std::nullopt;
}

std::size_t TaskSession::click_count() const noexcept {
  std::size_t n = 0;
  for (const auto& q : queries) n += q.clicks.size();
  return n;
}

std::string FeatureConfig::label() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(use_relevance, "R");
  add(use_satisfaction, "S");
  add(use_behavior, "U");
  return out.empty() ? "none" : out;
}

FeatureConfig FeatureConfig::parse(std::string_view spec) {
  FeatureConfig fc{false, false, false};
  if (spec == "none") return fc;
  for (char c : spec) {
    switch (std::toupper(static_cast<unsigned char>(c))) {
      case 'R': fc.use_relevance = true; break;
      case 'S': fc.use_satisfaction = true; break;
      case 'U': fc.use_behavior = true; break;
      case 'Q':
      case 'D':
      case '+':
      case ',':
      case ' ':
        break;
      default:
        throw UsageError("unknown feature letter '" + std::string(1, c) + "' in \"" +
                         std::string(spec) + "\" (expected a subset of RSU)");
    }
  }
  return fc;
}

const QueryRecord* JudgingUnit::find_query(std::string_view query_id) const noexcept {
  for (const auto& q : context.queries)
    if (q.query_id == query_id) return &q;
  return nullptr;
}

const ClickedDoc* JudgingUnit::find_click(const ClickRef& ref) const noexcept {
  const QueryRecord* q = find_query(ref.query_id);
  if (!q) return nullptr;
  for (const auto& c : q->clicks)
    if (c.doc_id == ref.doc_id) return &c;
  return nullptr;
}

std::vector<std::string> validate_session(const TaskSession& s) {
  std::vector<std::string> out;
  const std::string& sid = s.session_id;

  if (s.session_id.empty()) out.push_back("empty session_id");
  if (s.user_id.empty()) out.push_back("empty user_id: " + sid);
  if (s.dataset_kind == DatasetKind::kdd19 && !s.task_id)
    out.push_back("kdd19 session without task_id: " + sid);
  if (!std::isfinite(s.task_dwell_sec) || s.task_dwell_sec < 0)
    out.push_back("negative task dwell: " + sid);
  if (s.user_ctr && (!std::isfinite(*s.user_ctr) || *s.user_ctr < 0))
    out.push_back("negative user ctr: " + sid);

  std::set<std::string> seen_queries;
  const QueryRecord* prev_query = nullptr;
  for (const auto& q : s.queries) {
    const std::string& qid = q.query_id;
    if (qid.empty()) out.push_back("empty query_id in session " + sid);
    if (!seen_queries.insert(qid).second) out.push_back("duplicate query_id: " + qid);
    if (!std::isfinite(q.issue_time)) out.push_back("non-finite issue time: " + qid);
    if (prev_query && q.issue_time < prev_query->issue_time)
      out.push_back("query issued before previous query: " + qid);
    if (!std::isfinite(q.query_dwell_sec) || q.query_dwell_sec < 0)
      out.push_back("negative query dwell: " + qid);
    if (q.serp_size && *q.serp_size < 0) out.push_back("negative serp_size: " + qid);
    prev_query = &q;

    std::set<std::string> seen_docs;
    const ClickedDoc* prev_click = nullptr;
    for (const auto& c : q.clicks) {
      const std::string ref = qid + "/" + c.doc_id;
      if (c.doc_id.empty()) out.push_back("empty doc_id in query " + qid);
      if (!seen_docs.insert(c.doc_id).second) out.push_back("duplicate click: " + ref);
      if (c.click_time < q.issue_time) out.push_back("click before query issue: " + ref);
      if (prev_click && c.click_time < prev_click->click_time)
        out.push_back("click before previous click: " + ref);
      if (c.serp_rank < 1) out.push_back("serp_rank below 1: " + ref);
      if (!std::isfinite(c.url_dwell_sec) || c.url_dwell_sec < 0)
        out.push_back("negative url dwell: " + ref);
      if (!is_label(c.usefulness_human)) out.push_back("usefulness out of range 0..3: " + ref);
      if (c.relevance_human && !is_label(*c.relevance_human))
        out.push_back("relevance out of range 0..3: " + ref);
      prev_click = &c;
    }
  }
  return out;
}

std::vector<std::string> validate_judgment(const Judgment& j) {
  std::vector<std::string> out;
  const std::string ref = j.unit_id + ":" + j.query_id + "/" + j.doc_id;
  if (j.label_pred.has_value() == j.error.has_value())
    out.push_back("judgment must carry exactly one of label or error: " + ref);
  if (j.label_pred && !is_label(*j.label_pred)) out.push_back("label out of range 0..3: " + ref);
  return out;
}

}  // namespace ujudge
