#include "ujudge/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ujudge/errors.hpp"

namespace ujudge {

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share rank mean((i+1)..(j+1)).
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

bool constant(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw UsageError("spearman: length mismatch (" + std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  if (x.size() < 2 || constant(x) || constant(y)) return std::nullopt;

  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double n = static_cast<double>(x.size());
  // Midranks always average to (n + 1) / 2.
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const double rho = sxy / std::sqrt(sxx * syy);
  return std::clamp(rho, -1.0, 1.0);
}

std::optional<double> spearman(std::span<const int> x, std::span<const int> y) {
  std::vector<double> dx(x.begin(), x.end());
  std::vector<double> dy(y.begin(), y.end());
  return spearman(std::span<const double>(dx), std::span<const double>(dy));
}

PairedLabels pair_labels(std::span<const TaskSession> sessions, std::span<const Judgment> judgments) {
  struct ClickInfo {
    const TaskSession* session;
    const QueryRecord* query;
    const ClickedDoc* click;
    bool judged = false;
  };
  std::map<std::tuple<std::string, std::string, std::string>, ClickInfo> clicks;
  for (const auto& s : sessions)
    for (const auto& q : s.queries)
      for (const auto& c : q.clicks) clicks.emplace(std::tuple(s.session_id, q.query_id, c.doc_id), ClickInfo{&s, &q, &c});

  PairedLabels out;
  for (const auto& j : judgments) {
    const auto slash = j.unit_id.find('/');
    const std::string session_id = j.unit_id.substr(0, slash);
    auto it = clicks.find(std::tuple(session_id, j.query_id, j.doc_id));
    if (it == clicks.end()) {
      ++out.unmatched_judgments;
      continue;
    }
    it->second.judged = true;
    if (!j.label_pred) {
      ++out.errored_judgments;
      continue;
    }
    const auto& info = it->second;
    LabelPair p;
    p.unit_id = j.unit_id;
    p.session_id = info.session->session_id;
    p.user_id = info.session->user_id;
    p.task_id = info.session->task_id;
    p.query_id = info.query->query_id;
    p.doc_id = info.click->doc_id;
    p.usefulness_human = info.click->usefulness_human;
    p.label_pred = *j.label_pred;
    p.relevance_human = info.click->relevance_human;
    out.pairs.push_back(std::move(p));
  }
  for (const auto& [key, info] : clicks)
    if (!info.judged) ++out.unjudged_clicks;
  return out;
}

std::string_view to_string(GroupLevel level) noexcept {
  switch (level) {
    case GroupLevel::overall: return "overall";
    case GroupLevel::task: return "task";
    case GroupLevel::session: return "session";
    case GroupLevel::query: return "query";
  }
  return "overall";
}

namespace {

std::optional<double> rho_of(const std::vector<const LabelPair*>& pairs) {
  std::vector<double> human, pred;
  for (const auto* p : pairs) {
    human.push_back(p->usefulness_human);
    pred.push_back(p->label_pred);
  }
  return spearman(std::span<const double>(human), std::span<const double>(pred));
}

}  // namespace

GroupedResult grouped_spearman(const PairedLabels& p, GroupLevel level) {
  GroupedResult r;
  r.level = level;
  r.n_pairs = p.pairs.size();

  if (level == GroupLevel::overall) {
    std::vector<const LabelPair*> all;
    for (const auto& x : p.pairs) all.push_back(&x);
    r.rho = rho_of(all);
    GroupRho g{"all", all.size(), r.rho};
    (r.rho ? r.groups : r.skipped).push_back(g);
    return r;
  }

  std::map<std::string, std::vector<const LabelPair*>> groups;
  for (const auto& x : p.pairs) {
    std::string key;
    switch (level) {
      case GroupLevel::task:
        if (!x.task_id) throw UsageError("task-level grouping requested but pair " + x.unit_id + " has no task_id");
        key = *x.task_id;
        break;
      case GroupLevel::session: key = x.session_id; break;
      case GroupLevel::query: key = x.session_id + "/" + x.query_id; break;
      case GroupLevel::overall: break;
    }
    groups[key].push_back(&x);
  }

  double sum = 0;
  for (const auto& [key, members] : groups) {
    GroupRho g{key, members.size(), members.size() >= 2 ? rho_of(members) : std::nullopt};
    if (g.rho) {
      sum += *g.rho;
      r.groups.push_back(std::move(g));
    } else {
      r.skipped.push_back(std::move(g));
    }
  }
  if (!r.groups.empty()) r.rho = sum / static_cast<double>(r.groups.size());
  return r;
}

void validate_thresholds(const DivergenceThresholds& t) {
  if (!is_label(t.high_usefulness_min) || !is_label(t.high_relevance_min))
    throw UsageError("divergence thresholds must lie in 0..3");
}

std::string_view to_string(Bucket b) noexcept {
  switch (b) {
    case Bucket::hr_hu: return "HR-HU";
    case Bucket::hr_lu: return "HR-LU";
    case Bucket::lr_hu: return "LR-HU";
    case Bucket::lr_lu: return "LR-LU";
  }
  return "HR-HU";
}

Bucket bucket_of(int usefulness, int relevance, const DivergenceThresholds& t) noexcept {
  const bool hr = relevance >= t.high_relevance_min;
  const bool hu = usefulness >= t.high_usefulness_min;
  if (hr) return hu ? Bucket::hr_hu : Bucket::hr_lu;
  return hu ? Bucket::lr_hu : Bucket::lr_lu;
}

DivergenceReport divergence_report(const PairedLabels& p, const DivergenceThresholds& t) {
  validate_thresholds(t);
  DivergenceReport r;
  r.thresholds = t;
  for (std::size_t b = 0; b < kBuckets.size(); ++b) r.buckets[b].bucket = kBuckets[b];

  for (std::size_t i = 0; i < p.pairs.size(); ++i) {
    const auto& x = p.pairs[i];
    if (!x.relevance_human) {
      ++r.excluded_no_relevance;
      continue;
    }
    ++r.included;
    const auto b = static_cast<std::size_t>(bucket_of(x.usefulness_human, *x.relevance_human, t));
    r.buckets[b].pair_indices.push_back(i);
  }
  for (auto& bucket : r.buckets) {
    bucket.n = bucket.pair_indices.size();
    std::vector<const LabelPair*> members;
    for (auto i : bucket.pair_indices) members.push_back(&p.pairs[i]);
    bucket.rho = rho_of(members);
  }
  return r;
}

}  // namespace ujudge
