#include "ujudge/batching.hpp"

#include <algorithm>

namespace ujudge {

namespace {

void sort_by_id(std::vector<JudgingUnit>& units) {
  std::sort(units.begin(), units.end(),
            [](const JudgingUnit& a, const JudgingUnit& b) { return a.unit_id < b.unit_id; });
}

}  // namespace

std::vector<JudgingUnit> make_baseline_units(std::span<const TaskSession> sessions,
                                             const FeatureConfig& fc) {
  std::vector<JudgingUnit> units;
  for (const auto& s : sessions) {
    TaskSession shell = s;
    shell.queries.clear();
    for (const auto& q : s.queries) {
      for (const auto& c : q.clicks) {
        JudgingUnit u;
        u.unit_id = s.session_id + "/" + q.query_id + "/" + c.doc_id + "/baseline";
        u.mode = JudgingMode::baseline;
        u.target_clicks.push_back({q.query_id, c.doc_id});
        u.context = shell;
        QueryRecord only = q;
        only.clicks = {c};
        u.context.queries.push_back(std::move(only));
        u.feature_config = fc;
        units.push_back(std::move(u));
      }
    }
  }
  sort_by_id(units);
  return units;
}

std::vector<JudgingUnit> make_session_units(std::span<const TaskSession> sessions,
                                            const FeatureConfig& fc) {
  std::vector<JudgingUnit> units;
  for (const auto& s : sessions) {
    if (s.click_count() == 0) continue;
    JudgingUnit u;
    u.unit_id = s.session_id + "/session";
    u.mode = JudgingMode::session;
    for (const auto& q : s.queries)
      for (const auto& c : q.clicks) u.target_clicks.push_back({q.query_id, c.doc_id});
    u.context = s;
    u.feature_config = fc;
    units.push_back(std::move(u));
  }
  sort_by_id(units);
  return units;
}

std::vector<JudgingUnit> make_units(std::span<const TaskSession> sessions, JudgingMode mode,
                                    const FeatureConfig& fc) {
  return mode == JudgingMode::baseline ? make_baseline_units(sessions, fc)
                                       : make_session_units(sessions, fc);
}

}  // namespace ujudge
