#include "cli/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli/config.hpp"
#include "ujudge/analysis.hpp"
#include "ujudge/backends.hpp"
#include "ujudge/batching.hpp"
#include "ujudge/errors.hpp"
#include "ujudge/ingest.hpp"
#include "ujudge/pipeline.hpp"
#include "ujudge/prompting.hpp"
#include "ujudge/report.hpp"
#include "ujudge/session_io.hpp"

namespace ujudge::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string cache_dir;
  std::string template_path;
  std::optional<int> parallelism;
  std::optional<std::uint64_t> seed;
  std::size_t max_prompt_chars = 0;
};

struct IngestOptions {
  std::string kind;
  std::string input;
  std::string output;
  std::string ctr;
  std::string dwell_rule;
  std::string config_path;
};

struct JudgeOptionsCli {
  CommonOptions common;
  std::string sessions;
  std::string mode = "session";
  std::string backend = "mock";
  std::string features = "RSU";
  std::string out;
};

struct EvaluateOptions {
  std::string sessions;
  std::string judgments;
  std::string out;
  std::string config_path;
  std::optional<int> high_usefulness_min;
  std::optional<int> high_relevance_min;
};

struct AblateOptions {
  CommonOptions common;
  std::string sessions;
  std::string mode = "session";
  std::string backend = "mock";
  std::vector<std::string> configs;
  std::string out;
};

RunConfig resolve_config(const std::string& path) {
  return path.empty() ? default_config() : load_config(path);
}

PromptTemplate resolve_template(const CommonOptions& opts, const RunConfig& cfg, std::string& source) {
  if (!opts.template_path.empty()) {
    source = opts.template_path;
    return PromptTemplate::load(opts.template_path);
  }
  if (cfg.template_path) {
    source = cfg.template_path->string();
    return PromptTemplate::load(*cfg.template_path);
  }
  source = "builtin";
  return PromptTemplate::builtin();
}

JudgingMode mode_from(const std::string& s) {
  auto m = parse_judging_mode(s);
  if (!m) throw UsageError("unknown mode '" + s + "' (expected baseline or session)");
  return *m;
}

json spec_json(const BackendSpec& s) {
  return json{{"backend_id", s.backend_id},   {"kind", to_string(s.kind)},
              {"endpoint", s.endpoint},       {"model_name", s.model_name},
              {"temperature", s.temperature}, {"top_p", s.top_p},
              {"max_retries", s.max_retries}, {"parallelism", s.parallelism},
              {"timeout_sec", s.timeout_sec}, {"api_key_env", s.api_key_env},
              {"max_prompt_chars", s.max_prompt_chars}};
}

json features_json(const FeatureConfig& fc) {
  return json{{"label", fc.label()},
              {"use_relevance", fc.use_relevance},
              {"use_satisfaction", fc.use_satisfaction},
              {"use_behavior", fc.use_behavior}};
}

fs::path manifest_path(const fs::path& judgments) {
  fs::path p = judgments;
  p += ".manifest.json";
  return p;
}

struct JudgeSetup {
  RunConfig cfg;
  BackendSpec spec;
  PromptTemplate tmpl;
  std::string template_source;
  JudgeOptions options;
  ClientOptions client_options;
  fs::path cache_dir;
};

JudgeSetup prepare(const CommonOptions& common, const std::string& backend_id) {
  JudgeSetup s{resolve_config(common.config_path), {}, PromptTemplate::builtin(), {}, {}, {}, {}};
  s.spec = s.cfg.backend(backend_id);
  if (common.max_prompt_chars > 0) s.spec.max_prompt_chars = common.max_prompt_chars;
  s.tmpl = resolve_template(common, s.cfg, s.template_source);
  s.options.render.max_prompt_chars = s.spec.max_prompt_chars;
  s.options.parallelism = common.parallelism ? common.parallelism : s.cfg.parallelism;
  s.client_options.seed = common.seed.value_or(s.cfg.seed);
  s.cache_dir = common.cache_dir.empty() ? s.cfg.cache_dir : fs::path(common.cache_dir);
  return s;
}

std::vector<TaskSession> load_sessions(const std::string& path) {
  if (!fs::exists(path)) throw DataError("sessions file not found: " + path);
  auto sessions = read_sessions(path);
  for (const auto& s : sessions) {
    auto v = validate_session(s);
    if (!v.empty()) throw DataError("invalid session in " + path + ": " + v.front());
  }
  return sessions;
}

int cmd_ingest(const IngestOptions& o, std::ostream& out) {
  auto kind = parse_dataset_kind(o.kind);
  if (!kind) throw UsageError("unknown --kind '" + o.kind + "' (expected kdd19, qref or synthetic)");
  RunConfig cfg = resolve_config(o.config_path);
  FeatureDefs defs = cfg.feature_defs;
  if (!o.ctr.empty()) {
    auto d = parse_ctr_definition(o.ctr);
    if (!d) throw UsageError("unknown --ctr '" + o.ctr + "' (expected per-query or impressions)");
    defs.ctr_definition = *d;
  }
  if (!o.dwell_rule.empty()) {
    auto d = parse_dwell_rule(o.dwell_rule);
    if (!d) throw UsageError("unknown --dwell-rule '" + o.dwell_rule + "' (expected next-event or session-end)");
    defs.dwell_last_click_rule = *d;
  }
  IngestResult r = ingest_dataset(*kind, o.input, defs);
  write_sessions(o.output, r.sessions);
  fs::path warnings = o.output;
  warnings += ".warnings.tsv";
  write_file_atomic(warnings, format_warnings(r.warnings));

  std::size_t queries = 0, clicks = 0;
  for (const auto& s : r.sessions) {
    queries += s.queries.size();
    clicks += s.click_count();
  }
  out << "sessions=" << r.sessions.size() << " queries=" << queries << " clicks=" << clicks << "\n";
  out << "rows=" << r.rows_read << " skipped_rows=" << r.rows_skipped << " warnings=" << r.warnings.size() << " ("
      << warnings.string() << ")\n";
  return kOk;
}

int cmd_judge(const JudgeOptionsCli& o, std::ostream& out) {
  const JudgingMode mode = mode_from(o.mode);
  const FeatureConfig fc = FeatureConfig::parse(o.features);
  JudgeSetup setup = prepare(o.common, o.backend);
  const auto sessions = load_sessions(o.sessions);

  ResponseCache cache(setup.cache_dir);
  BackendClient client(setup.spec, make_transport(setup.spec), cache, setup.client_options);
  const auto units = make_units(sessions, mode, fc);
  const JudgeRun run = run_judging(units, setup.tmpl, client, setup.options);

  write_judgments(o.out, run.judgments);

  json failures = json::array();
  for (const auto& f : run.failures)
    failures.push_back({{"unit_id", f.unit_id}, {"query_id", f.query_id}, {"doc_id", f.doc_id}, {"error", f.error}});
  json manifest{
      {"command", "judge"},
      {"sessions", o.sessions},
      {"sessions_sha256", sha256_hex(read_file(o.sessions))},
      {"mode", to_string(mode)},
      {"features", features_json(fc)},
      {"template_id", setup.tmpl.template_id()},
      {"template_source", setup.template_source},
      {"backend", spec_json(setup.spec)},
      {"seed", setup.client_options.seed},
      {"parallelism", setup.options.parallelism.value_or(setup.spec.parallelism)},
      {"cache_dir", setup.cache_dir.string()},
      {"counts",
       {{"units", run.units},
        {"judgments", run.judgments.size()},
        {"ok", run.ok},
        {"errors", run.errors},
        {"backend_calls", run.backend_calls},
        {"cache_hits", run.cache_hits},
        {"retries", run.retries},
        {"cache_corrupt_lines", cache.corrupt_lines()}}},
      {"failures", std::move(failures)},
      {"render_warnings", run.render_warnings},
  };
  write_file_atomic(manifest_path(o.out), manifest.dump(2) + "\n");

  out << "units=" << run.units << " judgments=" << run.judgments.size() << " ok=" << run.ok
      << " errors=" << run.errors << " backend_calls=" << run.backend_calls << " cache_hits=" << run.cache_hits
      << " retries=" << run.retries << "\n";
  return kOk;
}

RunMetadata metadata_for(const std::string& judgments_path, const std::vector<Judgment>& judgments,
                         const std::vector<TaskSession>& sessions) {
  RunMetadata meta;
  const fs::path mpath = manifest_path(judgments_path);
  if (fs::exists(mpath)) {
    const json m = json::parse(read_file(mpath), nullptr, false);
    if (!m.is_discarded() && m.is_object()) {
      const json backend = m.value("backend", json::object());
      meta.backend_id = backend.value("backend_id", std::string());
      meta.model_name = backend.value("model_name", std::string());
      meta.temperature = backend.value("temperature", 0.0);
      meta.top_p = backend.value("top_p", 1.0);
      meta.mode = m.value("mode", std::string());
      meta.template_id = m.value("template_id", std::string());
      meta.feature_config = m.value("features", json::object()).value("label", std::string());
    }
  }
  if (meta.backend_id.empty() && !judgments.empty()) {
    meta.backend_id = judgments.front().backend_id;
    meta.temperature = judgments.front().temperature;
    meta.top_p = judgments.front().top_p;
  }
  if (meta.mode.empty()) {
    bool baseline = false, session = false;
    for (const auto& j : judgments) {
      if (j.unit_id.ends_with("/baseline")) baseline = true;
      if (j.unit_id.ends_with("/session")) session = true;
    }
    meta.mode = baseline && session ? "mixed" : baseline ? "baseline" : "session";
  }
  if (meta.template_id.empty()) meta.template_id = "unknown";
  if (meta.feature_config.empty()) meta.feature_config = "unknown";
  if (!sessions.empty()) meta.feature_defs = sessions.front().feature_defs;
  return meta;
}

void write_report(const EvalReport& report, const std::string& out_prefix, std::ostream& out) {
  const std::string json_path = out_prefix + ".json";
  const std::string text_path = out_prefix + ".txt";
  write_file_atomic(json_path, report_to_json(report));
  const std::string text = report_to_text(report);
  write_file_atomic(text_path, text);
  out << text;
  out << "wrote " << json_path << " and " << text_path << "\n";
}

std::vector<Judgment> load_judgments(const std::string& path) {
  if (!fs::exists(path)) throw DataError("judgments file not found: " + path);
  return read_judgments(path);
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o.config_path);
  const auto sessions = load_sessions(o.sessions);
  const auto judgments = load_judgments(o.judgments);
  const auto paired = pair_labels(sessions, judgments);
  EvalReport report = evaluate(paired, metadata_for(o.judgments, judgments, sessions));
  report.meta.thresholds = cfg.thresholds;
  write_report(report, o.out, out);
  return kOk;
}

int cmd_divergence(const EvaluateOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o.config_path);
  DivergenceThresholds t = cfg.thresholds;
  if (o.high_usefulness_min) t.high_usefulness_min = *o.high_usefulness_min;
  if (o.high_relevance_min) t.high_relevance_min = *o.high_relevance_min;
  validate_thresholds(t);

  const auto sessions = load_sessions(o.sessions);
  const auto judgments = load_judgments(o.judgments);
  const auto paired = pair_labels(sessions, judgments);
  const bool any_relevance = std::any_of(paired.pairs.begin(), paired.pairs.end(),
                                         [](const LabelPair& p) { return p.relevance_human.has_value(); });
  if (!any_relevance)
    throw DataError("relevance labels required: none of the judged clicks in " + o.sessions +
                    " carries a relevance label");

  EvalReport report;
  report.meta = metadata_for(o.judgments, judgments, sessions);
  report.meta.thresholds = t;
  report.n_pairs = paired.pairs.size();
  report.errored_judgments = paired.errored_judgments;
  report.unmatched_judgments = paired.unmatched_judgments;
  report.unjudged_clicks = paired.unjudged_clicks;
  report.divergence = divergence_report(paired, t);
  write_report(report, o.out, out);
  return kOk;
}

int cmd_ablate(const AblateOptions& o, std::ostream& out) {
  const JudgingMode mode = mode_from(o.mode);
  std::vector<FeatureConfig> configs;
  for (const auto& c : o.configs) configs.push_back(FeatureConfig::parse(c));
  if (configs.empty()) configs = default_ablation_configs();

  JudgeSetup setup = prepare(o.common, o.backend);
  const auto sessions = load_sessions(o.sessions);
  ResponseCache cache(setup.cache_dir);
  BackendClient client(setup.spec, make_transport(setup.spec), cache, setup.client_options);
  AblationTable table = run_ablation(sessions, client, mode, configs, setup.tmpl, setup.options);

  EvalReport report;
  report.meta.backend_id = setup.spec.backend_id;
  report.meta.model_name = setup.spec.model_name;
  report.meta.temperature = setup.spec.temperature;
  report.meta.top_p = setup.spec.top_p;
  report.meta.mode = std::string(to_string(mode));
  report.meta.template_id = setup.tmpl.template_id();
  report.meta.feature_config = "varied";
  if (!sessions.empty()) report.meta.feature_defs = sessions.front().feature_defs;
  report.ablation = std::move(table);
  write_report(report, o.out, out);
  out << "backend_calls=" << client.network_calls() << " cache_hits=" << client.cache_hits() << "\n";
  return kOk;
}

void add_common(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--config", c.config_path, "Run configuration file (JSON)");
  cmd->add_option("--cache-dir", c.cache_dir, "Response cache directory (overrides config)");
  cmd->add_option("--template", c.template_path, "Prompt template file (default: builtin)");
  cmd->add_option("--parallelism", c.parallelism, "Maximum concurrent backend requests")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "Seed for retry jitter");
  cmd->add_option("--max-prompt-chars", c.max_prompt_chars, "Truncate oldest history beyond this many characters");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ujudge: LLM usefulness labeling and evaluation for search sessions", "ujudge"};
  app.require_subcommand(1);

  IngestOptions ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert raw behavior logs into the canonical session file");
  ingest_cmd->add_option("--kind", ingest.kind, "kdd19 | qref | synthetic")->required();
  ingest_cmd->add_option("--input", ingest.input, "Raw TSV file or directory of .tsv files")->required();
  ingest_cmd->add_option("--output", ingest.output, "Canonical session file to write")->required();
  ingest_cmd->add_option("--ctr", ingest.ctr, "per-query | impressions");
  ingest_cmd->add_option("--dwell-rule", ingest.dwell_rule, "next-event | session-end");
  ingest_cmd->add_option("--config", ingest.config_path, "Run configuration file (JSON)");

  JudgeOptionsCli judge;
  auto* judge_cmd = app.add_subcommand("judge", "Label clicked documents with a model backend");
  judge_cmd->add_option("--sessions", judge.sessions, "Canonical session file")->required();
  judge_cmd->add_option("--mode", judge.mode, "baseline | session")->capture_default_str();
  judge_cmd->add_option("--backend", judge.backend, "Backend id from the config")->capture_default_str();
  judge_cmd->add_option("--features", judge.features, "Subset of RSU (Q and D are always on)")->capture_default_str();
  judge_cmd->add_option("--out", judge.out, "Judgments file to write")->required();
  add_common(judge_cmd, judge.common);

  EvaluateOptions evaluate_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "Spearman agreement at overall/task/session/query level");
  eval_cmd->add_option("--sessions", evaluate_opts.sessions, "Canonical session file")->required();
  eval_cmd->add_option("--judgments", evaluate_opts.judgments, "Judgments file")->required();
  eval_cmd->add_option("--out", evaluate_opts.out, "Report path prefix (.json and .txt are written)")->required();
  eval_cmd->add_option("--config", evaluate_opts.config_path, "Run configuration file (JSON)");

  EvaluateOptions divergence_opts;
  auto* div_cmd = app.add_subcommand("divergence", "Agreement within relevance/usefulness quadrants");
  div_cmd->add_option("--sessions", divergence_opts.sessions, "Canonical session file")->required();
  div_cmd->add_option("--judgments", divergence_opts.judgments, "Judgments file")->required();
  div_cmd->add_option("--out", divergence_opts.out, "Report path prefix (.json and .txt are written)")->required();
  div_cmd->add_option("--config", divergence_opts.config_path, "Run configuration file (JSON)");
  div_cmd->add_option("--high-usefulness-min", divergence_opts.high_usefulness_min, "Lowest 'high' usefulness label");
  div_cmd->add_option("--high-relevance-min", divergence_opts.high_relevance_min, "Lowest 'high' relevance label");

  AblateOptions ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Judge and evaluate under several feature configurations");
  ablate_cmd->add_option("--sessions", ablate.sessions, "Canonical session file")->required();
  ablate_cmd->add_option("--mode", ablate.mode, "baseline | session")->capture_default_str();
  ablate_cmd->add_option("--backend", ablate.backend, "Backend id from the config")->capture_default_str();
  ablate_cmd->add_option("--configs", ablate.configs, "Feature subsets, e.g. RSU,RS,R (default: all seven)")
      ->delimiter(',');
  ablate_cmd->add_option("--out", ablate.out, "Report path prefix (.json and .txt are written)")->required();
  add_common(ablate_cmd, ablate.common);

  std::vector<const char*> argv{"ujudge"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "ujudge: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(ingest, out);
    if (*judge_cmd) return cmd_judge(judge, out);
    if (*eval_cmd) return cmd_evaluate(evaluate_opts, out);
    if (*div_cmd) return cmd_divergence(divergence_opts, out);
    if (*ablate_cmd) return cmd_ablate(ablate, out);
  } catch (const UsageError& e) {
    err << "ujudge: usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "ujudge: configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "ujudge: data error: " << e.what() << "\n";
    return kDataError;
  } catch (const BackendFatal& e) {
    err << "ujudge: backend error: " << e.what() << "\n";
    return kBackendFatal;
  }
  return kUsage;
}

}  // namespace ujudge::cli
