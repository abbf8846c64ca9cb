#include "ujudge/report.hpp"

#include <cstdio>

#include <json.hpp>

#include "ujudge/errors.hpp"

namespace ujudge {

using json = nlohmann::json;

EvalReport evaluate(const PairedLabels& paired, RunMetadata meta) {
  EvalReport r;
  r.meta = std::move(meta);
  r.n_pairs = paired.pairs.size();
  r.errored_judgments = paired.errored_judgments;
  r.unmatched_judgments = paired.unmatched_judgments;
  r.unjudged_clicks = paired.unjudged_clicks;
  for (auto level : {GroupLevel::overall, GroupLevel::task, GroupLevel::session, GroupLevel::query}) {
    try {
      r.levels.push_back(grouped_spearman(paired, level));
    } catch (const UsageError& e) {
      r.notes.push_back(std::string(to_string(level)) + " level unavailable: " + e.what());
    }
  }
  return r;
}

namespace {

json rho_json(const std::optional<double>& rho) { return rho ? json(*rho) : json("undefined"); }

std::string rho_text(const std::optional<double>& rho) {
  if (!rho) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *rho);
  return buf;
}

json groups_json(const std::vector<GroupRho>& groups) {
  json out = json::array();
  for (const auto& g : groups) out.push_back({{"key", g.key}, {"n", g.n}, {"rho", rho_json(g.rho)}});
  return out;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json meta{{"backend_id", r.meta.backend_id},
            {"model_name", r.meta.model_name},
            {"temperature", r.meta.temperature},
            {"top_p", r.meta.top_p},
            {"mode", r.meta.mode},
            {"template_id", r.meta.template_id},
            {"feature_config", r.meta.feature_config},
            {"aggregation", r.meta.aggregation},
            {"tie_handling", r.meta.tie_handling}};
  if (r.meta.thresholds)
    meta["thresholds"] = {{"high_usefulness_min", r.meta.thresholds->high_usefulness_min},
                          {"high_relevance_min", r.meta.thresholds->high_relevance_min}};
  if (r.meta.feature_defs)
    meta["feature_defs"] = {{"ctr_definition", to_string(r.meta.feature_defs->ctr_definition)},
                            {"dwell_last_click_rule", to_string(r.meta.feature_defs->dwell_last_click_rule)}};

  json levels = json::array();
  for (const auto& l : r.levels) {
    levels.push_back({{"level", to_string(l.level)},
                      {"rho", rho_json(l.rho)},
                      {"n_pairs", l.n_pairs},
                      {"groups_included", l.groups.size()},
                      {"groups_skipped", l.skipped.size()},
                      {"groups", groups_json(l.groups)},
                      {"skipped", groups_json(l.skipped)}});
  }
  json out{{"metadata", std::move(meta)},
           {"counts",
            {{"pairs", r.n_pairs},
             {"errored_judgments", r.errored_judgments},
             {"unmatched_judgments", r.unmatched_judgments},
             {"unjudged_clicks", r.unjudged_clicks}}},
           {"levels", std::move(levels)},
           {"notes", r.notes}};
  if (r.divergence) {
    json buckets = json::array();
    for (const auto& b : r.divergence->buckets)
      buckets.push_back({{"bucket", to_string(b.bucket)}, {"n", b.n}, {"rho", rho_json(b.rho)}});
    out["divergence"] = {{"included", r.divergence->included},
                         {"excluded_no_relevance", r.divergence->excluded_no_relevance},
                         {"high_usefulness_min", r.divergence->thresholds.high_usefulness_min},
                         {"high_relevance_min", r.divergence->thresholds.high_relevance_min},
                         {"buckets", std::move(buckets)}};
  }
  if (r.ablation) {
    json rows = json::array();
    for (const auto& row : r.ablation->rows)
      rows.push_back({{"features", row.config.label()},
                      {"use_relevance", row.config.use_relevance},
                      {"use_satisfaction", row.config.use_satisfaction},
                      {"use_behavior", row.config.use_behavior},
                      {"rho", rho_json(row.rho)},
                      {"n", row.n},
                      {"errors", row.errors}});
    out["ablation"] = {{"mode", to_string(r.ablation->mode)}, {"rows", std::move(rows)}};
  }
  return out.dump(2) + "\n";
}

std::string report_to_text(const EvalReport& r) {
  std::string out;
  out += "Usefulness label agreement (Spearman rho, " + r.meta.tie_handling + " ties, " + r.meta.aggregation +
         " mean over groups)\n";
  out += "backend: " + r.meta.backend_id + " (" + r.meta.model_name + ")  mode: " + r.meta.mode +
         "  template: " + r.meta.template_id;
  if (!r.ablation) out += "  features: Q+D+" + r.meta.feature_config;
  out += "\n";
  if (!r.ablation)
    out += "pairs: " + std::to_string(r.n_pairs) + "  errored judgments: " + std::to_string(r.errored_judgments) +
           "  unmatched: " + std::to_string(r.unmatched_judgments) +
           "  unjudged clicks: " + std::to_string(r.unjudged_clicks) + "\n";
  out += "\n";

  if (!r.levels.empty()) {
    out += pad("Level", 10) + pad("rho", 12) + pad("groups", 8) + "skipped\n";
    for (const auto& l : r.levels) {
      out += pad(std::string(to_string(l.level)), 10) + pad(rho_text(l.rho), 12) +
             pad(std::to_string(l.groups.size()), 8) + std::to_string(l.skipped.size()) + "\n";
    }
  }
  for (const auto& n : r.notes) out += "note: " + n + "\n";

  if (r.divergence) {
    const auto& d = *r.divergence;
    if (!r.levels.empty() || !r.notes.empty()) out += "\n";
    out += "Relevance/usefulness divergence (high usefulness >= " + std::to_string(d.thresholds.high_usefulness_min) +
           ", high relevance >= " + std::to_string(d.thresholds.high_relevance_min) + ")\n";
    out += pad("Bucket", 10) + pad("n", 8) + "rho\n";
    for (const auto& b : d.buckets)
      out += pad(std::string(to_string(b.bucket)), 10) + pad(std::to_string(b.n), 8) + rho_text(b.rho) + "\n";
    out += "included: " + std::to_string(d.included) + "  excluded (no relevance): " +
           std::to_string(d.excluded_no_relevance) + "\n";
  }
  if (r.ablation) {
    if (!r.levels.empty() || !r.notes.empty() || r.divergence) out += "\n";
    out += "Feature ablation (" + std::string(to_string(r.ablation->mode)) + " mode, Q and D always on)\n";
    out += pad("Features", 12) + pad("rho", 12) + pad("n", 8) + "errors\n";
    for (const auto& row : r.ablation->rows)
      out += pad("U_" + row.config.label(), 12) + pad(rho_text(row.rho), 12) + pad(std::to_string(row.n), 8) +
             std::to_string(row.errors) + "\n";
  }
  return out;
}

}  // namespace ujudge
