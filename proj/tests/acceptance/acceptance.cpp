// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.
//
// Optional: UJUDGE_KDD19_PATH and UJUDGE_QREF_PATH point at licensed raw
// exports (converted to the documented TSV schema) to check their counts.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cli/commands.hpp"
#include "extraction_corpus.hpp"
#include "fake_chat_server.hpp"
#include "spearman_oracle.hpp"
#include "test_support.hpp"
#include "ujudge/analysis.hpp"
#include "ujudge/batching.hpp"
#include "ujudge/ingest.hpp"
#include "ujudge/pipeline.hpp"
#include "ujudge/prompting.hpp"
#include "ujudge/session_io.hpp"

using namespace ujudge;
using namespace ujudge::testing;
using json = nlohmann::json;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_sec, const std::function<Check()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Check c;
  try {
    c = body();
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (c.ok && secs > budget_sec) {
    c.ok = false;
    c.detail = "over time budget";
  }
  if (!c.ok) ++failures;
  std::ostringstream line;
  line.setf(std::ios::fixed);
  line.precision(2);
  line << (c.ok ? "PASS" : "FAIL") << " [" << id << "] " << name << " (" << secs << " s / " << budget_sec << " s)";
  if (!c.detail.empty()) line << ": " << c.detail;
  std::cout << line.str() << std::endl;
}

int cli(std::vector<std::string> args, std::string* err_out = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (err_out) *err_out = err.str();
  return code;
}

std::string fixture(const char* name) { return (data_dir() / "fixtures" / name).string(); }

struct Counts {
  std::size_t sessions = 0, queries = 0, clicks = 0, with_clicks = 0;
};

Counts count(const std::vector<TaskSession>& sessions) {
  Counts c;
  c.sessions = sessions.size();
  for (const auto& s : sessions) {
    c.queries += s.queries.size();
    c.clicks += s.click_count();
    c.with_clicks += s.click_count() > 0 ? 1 : 0;
  }
  return c;
}

Check spearman_oracle() {
  Check c;
  std::mt19937_64 rng(20240501);
  std::uniform_int_distribution<std::size_t> len(0, 50);
  std::uniform_int_distribution<int> label(0, 3);
  int undefined = 0;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = len(rng);
    std::vector<int> x(n), y(n);
    for (auto& v : x) v = label(rng);
    for (auto& v : y) v = label(rng);
    const auto got = spearman(std::span<const int>(x), std::span<const int>(y));
    const auto want = oracle_spearman(x, y);
    c.require(got.has_value() == want.has_value(), "definedness differs at vector " + std::to_string(i));
    if (got && want) worst = std::max(worst, std::abs(*got - *want));
    if (!want) ++undefined;
  }
  c.require(worst <= 1e-12, "max deviation " + std::to_string(worst));
  if (c.ok) {
    std::ostringstream d;
    d << "1000 vectors, max |diff| = " << worst << ", " << undefined << " undefined cases agree";
    c.detail = d.str();
  }
  return c;
}

Check anchors() {
  Check c;
  const std::vector<int> x{1, 2, 2, 3}, y{1, 3, 2, 2}, up{0, 1, 2, 3}, down{3, 2, 1, 0};
  const auto half = spearman(std::span<const int>(x), std::span<const int>(y));
  c.require(half && *half == 0.5, "spearman([1,2,2,3],[1,3,2,2]) != 0.5");
  const auto plus = spearman(std::span<const int>(up), std::span<const int>(up));
  const auto minus = spearman(std::span<const int>(up), std::span<const int>(down));
  c.require(plus && *plus == 1.0, "perfect ranking != 1.0");
  c.require(minus && *minus == -1.0, "reversed ranking != -1.0");
  if (c.ok) c.detail = "0.5, +1.0 and -1.0 exact";
  return c;
}

Check batching_conservation() {
  Check c;
  std::mt19937_64 rng(31);
  for (int i = 0; i < 500; ++i) {
    const auto sessions = random_sessions(rng, 10);
    const auto k = count(sessions);
    c.require(make_baseline_units(sessions, {}).size() == k.clicks, "baseline units != clicks (random corpus)");
    c.require(make_session_units(sessions, {}).size() == k.with_clicks, "session units != sessions with clicks");
  }

  struct Expect {
    const char* dir;
    DatasetKind kind;
    Counts want;
  };
  const std::vector<Expect> fixtures{
      {"mini", DatasetKind::synthetic, {1, 2, 2, 1}},
      {"five_clicks", DatasetKind::kdd19, {2, 3, 5, 2}},
      {"qref_mini", DatasetKind::qref, {1, 1, 2, 1}},
      {"synthetic20", DatasetKind::synthetic, {20, 42, 61, 20}},
  };
  std::string summary;
  for (const auto& f : fixtures) {
    const auto r = ingest_dataset(f.kind, fixture(f.dir), {});
    const auto k = count(r.sessions);
    const std::string name = f.dir;
    c.require(k.sessions == f.want.sessions && k.queries == f.want.queries && k.clicks == f.want.clicks,
              name + ": counts " + std::to_string(k.sessions) + "/" + std::to_string(k.queries) + "/" +
                  std::to_string(k.clicks));
    c.require(make_baseline_units(r.sessions, {}).size() == f.want.clicks, name + ": baseline units");
    c.require(make_session_units(r.sessions, {}).size() == f.want.with_clicks, name + ": session units");
  }

  struct Real {
    const char* env;
    DatasetKind kind;
    Counts want;
  };
  const std::vector<Real> real{{"UJUDGE_KDD19_PATH", DatasetKind::kdd19, {447, 735, 1431, 0}},
                               {"UJUDGE_QREF_PATH", DatasetKind::qref, {2024, 4809, 7126, 0}}};
  for (const auto& r : real) {
    const char* path = std::getenv(r.env);
    if (!path || !*path) {
      summary += std::string(summary.empty() ? "" : "; ") + r.env + " unset, real-data counts not checked";
      continue;
    }
    const auto res = ingest_dataset(r.kind, path, {});
    const auto k = count(res.sessions);
    c.require(k.sessions == r.want.sessions && k.queries == r.want.queries && k.clicks == r.want.clicks,
              std::string(r.env) + ": got " + std::to_string(k.sessions) + "/" + std::to_string(k.queries) + "/" +
                  std::to_string(k.clicks));
    c.require(make_baseline_units(res.sessions, {}).size() == k.clicks, std::string(r.env) + ": baseline units");
    summary += std::string(summary.empty() ? "" : "; ") + r.env + " counts match";
  }
  if (c.ok) c.detail = "500 random corpora and 4 fixtures conserve units; " + summary;
  return c;
}

Check mock_determinism() {
  Check c;
  TempDir dir;
  const std::string cache = (dir / "cache").string();
  std::vector<std::string> judgments, reports, texts, session_files;
  std::vector<json> manifests;
  for (int run = 0; run < 2; ++run) {
    const auto base = dir / ("run" + std::to_string(run));
    std::filesystem::create_directories(base);
    const auto sessions = (base / "sessions.jsonl").string();
    const auto j = (base / "judgments.jsonl").string();
    const auto rep = (base / "report").string();
    std::string err;
    c.require(cli({"ingest", "--kind", "synthetic", "--input", fixture("synthetic20"), "--output", sessions}, &err) == 0,
              "ingest failed: " + err);
    c.require(cli({"judge", "--sessions", sessions, "--mode", "session", "--backend", "mock", "--features", "QDRSU",
                   "--out", j, "--cache-dir", cache},
                  &err) == 0,
              "judge failed: " + err);
    c.require(cli({"evaluate", "--sessions", sessions, "--judgments", j, "--out", rep}, &err) == 0,
              "evaluate failed: " + err);
    if (!c.ok) return c;
    session_files.push_back(read_file(sessions));
    judgments.push_back(read_file(j));
    reports.push_back(read_file(rep + ".json"));
    texts.push_back(read_file(rep + ".txt"));
    manifests.push_back(json::parse(read_file(j + ".manifest.json")));
  }
  c.require(session_files[0] == session_files[1], "session files differ");
  c.require(judgments[0] == judgments[1], "judgment files differ");
  c.require(reports[0] == reports[1], "JSON reports differ");
  c.require(texts[0] == texts[1], "text reports differ");
  c.require(manifests[0]["counts"]["judgments"] == 61, "expected 61 judgments");
  c.require(manifests[0]["counts"]["backend_calls"].get<int>() > 0, "first run made no backend calls");
  c.require(manifests[1]["counts"]["backend_calls"] == 0, "second run made backend calls");
  if (c.ok)
    c.detail = "61 judgments, byte-identical outputs; run 2 backend_calls=0 cache_hits=" +
               manifests[1]["counts"]["cache_hits"].dump();
  return c;
}

Check extraction_corpus() {
  Check c;
  const auto cases = load_extraction_cases();
  c.require(cases.size() == 30, "corpus has " + std::to_string(cases.size()) + " cases");
  int agree = 0, error_cases = 0, error_raised = 0;
  for (const auto& k : cases) {
    const auto problem = check_case(k);
    if (problem.empty())
      ++agree;
    else
      c.require(false, k.id + ": " + problem);
    if (k.expected_error) {
      ++error_cases;
      if (extract_labels(k.raw_response, k.expected_count).error) ++error_raised;
    }
  }
  c.require(error_cases == 4 && error_raised == 4, "error cases: " + std::to_string(error_raised) + " of " +
                                                      std::to_string(error_cases) + " raised");
  if (c.ok) c.detail = std::to_string(agree) + "/30 agree; 4/4 error cases raise extraction errors";
  return c;
}

Check divergence_partition() {
  Check c;
  const auto sessions = ingest_dataset(DatasetKind::synthetic, fixture("synthetic20"), {}).sessions;
  ResponseCache cache;
  BackendClient client(BackendSpec{}, make_transport(BackendSpec{}), cache);
  std::vector<PairedLabels> pair_sets;
  for (auto mode : {JudgingMode::baseline, JudgingMode::session}) {
    const auto run = run_judging(make_units(sessions, mode, {}), PromptTemplate::builtin(), client);
    pair_sets.push_back(pair_labels(sessions, run.judgments));
  }
  std::size_t checked = 0;
  for (const auto& p : pair_sets) {
    for (int hr = 0; hr <= 3; ++hr) {
      for (int hu = 0; hu <= 3; ++hu) {
        const DivergenceThresholds t{hu, hr};
        const auto r = divergence_report(p, t);
        std::set<std::size_t> seen;
        std::size_t total = 0;
        for (const auto& b : r.buckets) {
          total += b.n;
          for (auto idx : b.pair_indices) {
            c.require(seen.insert(idx).second, "pair in two buckets");
            const auto& lp = p.pairs[idx];
            c.require(lp.relevance_human && bucket_of(lp.usefulness_human, *lp.relevance_human, t) == b.bucket,
                      "pair in the wrong bucket");
          }
        }
        std::size_t with_rel = 0;
        for (const auto& lp : p.pairs) with_rel += lp.relevance_human ? 1 : 0;
        c.require(total == r.included && r.included == with_rel, "buckets do not cover the included pairs");
        if (hu < 3) {
          const auto up = divergence_report(p, {hu + 1, hr});
          c.require(up.buckets[0].n <= r.buckets[0].n && up.buckets[2].n <= r.buckets[2].n,
                    "raising high_usefulness_min grew an HU bucket");
        }
        ++checked;
      }
    }
  }
  const auto def = divergence_report(pair_sets[1], {});
  std::ostringstream d;
  d << checked << " threshold settings over " << pair_sets[1].pairs.size() << " pairs; default sizes";
  for (const auto& b : def.buckets) d << " " << to_string(b.bucket) << "=" << b.n;
  if (c.ok) c.detail = d.str();
  return c;
}

Check ablation_protocol() {
  Check c;
  const auto sessions = ingest_dataset(DatasetKind::synthetic, fixture("synthetic20"), {}).sessions;
  const auto configs = default_ablation_configs();
  const std::vector<std::string> want{"R+S+U", "R+S", "R+U", "S+U", "R", "S", "U"};
  std::vector<std::string> got;
  for (const auto& fc : configs) got.push_back(fc.label());
  c.require(got == want, "default configurations differ from the expected seven");

  ResponseCache cache;
  BackendClient client(BackendSpec{}, make_transport(BackendSpec{}), cache);
  const auto table = run_ablation(sessions, client, JudgingMode::session, configs, PromptTemplate::builtin());
  c.require(table.rows.size() == 7, "ablation table has " + std::to_string(table.rows.size()) + " rows");
  for (std::size_t i = 0; i < table.rows.size() && i < want.size(); ++i)
    c.require(table.rows[i].config.label() == want[i], "row " + std::to_string(i) + " out of order");

  std::vector<JudgingUnit> units = make_baseline_units(sessions, FeatureConfig::parse("R"));
  for (const auto& u : make_session_units(sessions, FeatureConfig::parse("R"))) units.push_back(u);
  std::mt19937_64 rng(7);
  std::shuffle(units.begin(), units.end(), rng);
  const auto tmpl = PromptTemplate::builtin();
  const std::string rel_line = "Topical relevance grade from an external assessor";
  const std::vector<std::string> forbidden{"satisfaction", "dwell", "CTR", "click-through"};
  int sampled = 0;
  for (std::size_t i = 0; i < units.size() && sampled < 10; ++i, ++sampled) {
    const auto text = render_prompt(units[i], tmpl).text();
    c.require(text.find(rel_line) != std::string::npos, units[i].unit_id + ": relevance line missing");
    for (const auto& f : forbidden)
      c.require(text.find(f) == std::string::npos, units[i].unit_id + ": contains '" + f + "'");
  }
  c.require(sampled == 10, "fewer than 10 prompts sampled");
  if (c.ok) c.detail = "7 rows in order; 10 sampled R prompts carry relevance and no S/U lines";
  return c;
}

Check replication_structure() {
  Check c;
  // Every 25th answer is unusable prose; the first two requests are throttled.
  FakeChatServer server([](int n, int count, const std::string& user) {
    if (n % 25 == 24) return std::string("I am not able to judge these pages.");
    return FakeChatServer::default_responder(n, count, user);
  });
  server.script_statuses({429, 503});

  TempDir dir;
  {
    std::ofstream f(dir / "config.json");
    const json backend{{"backend_id", "local"},     {"kind", "local_chat"}, {"endpoint", server.endpoint()},
                       {"model_name", "cooperative-local"}, {"max_retries", 3},  {"parallelism", 4},
                       {"timeout_sec", 10}};
    json config;
    config["backends"] = json::array({backend});
    config["cache_dir"] = "cache";
    f << config.dump(2);
  }
  const auto sessions = (dir / "sessions.jsonl").string();
  const auto j = (dir / "judgments.jsonl").string();
  std::string err;
  c.require(cli({"ingest", "--kind", "synthetic", "--input", fixture("synthetic20"), "--output", sessions}, &err) == 0,
            "ingest failed: " + err);
  c.require(cli({"judge", "--sessions", sessions, "--mode", "baseline", "--backend", "local", "--out", j, "--config",
                 (dir / "config.json").string(), "--seed", "5"},
                &err) == 0,
            "judge failed: " + err);
  if (!c.ok) return c;
  const auto manifest = json::parse(read_file(j + ".manifest.json"));
  const auto judgments = read_judgments(j);
  const std::size_t units = manifest["counts"]["units"];
  const std::size_t ok = manifest["counts"]["ok"];
  const std::size_t errors = manifest["counts"]["errors"];
  c.require(units >= 50, "only " + std::to_string(units) + " units");
  c.require(judgments.size() == ok + errors, "judgment count mismatch");
  const double rate = judgments.empty() ? 0 : static_cast<double>(ok) / static_cast<double>(judgments.size());
  c.require(rate >= 0.9, "extraction rate " + std::to_string(rate));
  c.require(manifest["failures"].size() == errors, "failures not itemized in the manifest");
  std::set<std::pair<std::string, std::string>> itemized;
  for (const auto& f : manifest["failures"])
    itemized.emplace(f["unit_id"].get<std::string>(), f["doc_id"].get<std::string>());
  for (const auto& jd : judgments)
    if (!jd.ok()) c.require(itemized.count({jd.unit_id, jd.doc_id}) == 1, jd.unit_id + " failure not in manifest");
  c.require(manifest["counts"]["retries"].get<int>() >= 2, "throttled requests were not retried");
  c.require(server.malformed_requests() == 0, "server saw malformed request bodies");
  std::ostringstream d;
  d.precision(3);
  d << units << " units via " << server.endpoint() << ", " << ok << "/" << judgments.size()
    << " labels extracted (" << rate * 100 << "%), " << errors << " failures itemized, "
    << manifest["counts"]["retries"].get<int>() << " retries";
  if (c.ok) c.detail = d.str();
  return c;
}

}  // namespace

int main() {
  criterion(1, "Spearman oracle equivalence", 5, spearman_oracle);
  criterion(2, "Hand-computed anchors", 1, anchors);
  criterion(3, "Batching conservation", 30, batching_conservation);
  criterion(4, "Mock end-to-end determinism", 60, mock_determinism);
  criterion(5, "Extraction corpus", 5, extraction_corpus);
  criterion(6, "Divergence partition", 30, divergence_partition);
  criterion(7, "Ablation protocol", 30, ablation_protocol);
  criterion(8, "Replication-mode structure check", 120, replication_structure);
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
