#include "ujudge/pipeline.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "ujudge/batching.hpp"
#include "ujudge/errors.hpp"
#include "ujudge/parsing.hpp"

namespace ujudge {

namespace {

struct UnitOutcome {
  std::vector<Judgment> judgments;
  std::vector<std::string> warnings;
};

UnitOutcome judge_unit(const JudgingUnit& unit, const PromptTemplate& tmpl, BackendClient& client,
                       const RenderOptions& render) {
  UnitOutcome out;
  const BackendSpec& spec = client.spec();
  RenderedPrompt prompt = render_prompt(unit, tmpl, render);
  out.warnings = std::move(prompt.warnings);
  const std::string hash = prompt_hash(prompt.text(), spec.backend_id, spec.decoding());

  CompletionResult completion = client.complete(unit, prompt, hash);
  std::optional<ExtractionResult> extraction;
  if (completion.text) extraction = extract_labels(*completion.text, unit.target_clicks.size());

  for (std::size_t i = 0; i < unit.target_clicks.size(); ++i) {
    Judgment j;
    j.unit_id = unit.unit_id;
    j.query_id = unit.target_clicks[i].query_id;
    j.doc_id = unit.target_clicks[i].doc_id;
    j.raw_response = completion.text.value_or("");
    j.backend_id = spec.backend_id;
    j.prompt_hash = hash;
    j.temperature = spec.temperature;
    j.top_p = spec.top_p;
    if (!completion.text) {
      j.error = completion.error.value_or("backend_error");
    } else if (!extraction->ok()) {
      j.error = *extraction->error;
    } else {
      j.label_pred = extraction->labels[i];
      j.extraction_rule = extraction->rules[i];
    }
    out.judgments.push_back(std::move(j));
  }
  return out;
}

}  // namespace

JudgeRun run_judging(std::span<const JudgingUnit> units, const PromptTemplate& tmpl, BackendClient& client,
                     const JudgeOptions& options) {
  const std::size_t calls_before = client.network_calls();
  const std::size_t hits_before = client.cache_hits();
  const std::size_t retries_before = client.retries();

  const int parallelism = options.parallelism.value_or(client.spec().parallelism);
  if (parallelism < 1) throw UsageError("parallelism must be >= 1");

  std::vector<UnitOutcome> outcomes(units.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::atomic<std::size_t> in_flight{0};
  std::atomic<std::size_t> max_in_flight{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;

  auto worker = [&] {
    while (!stop) {
      const std::size_t i = next++;
      if (i >= units.size()) return;
      const std::size_t now = ++in_flight;
      std::size_t seen = max_in_flight.load();
      while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
      }
      try {
        outcomes[i] = judge_unit(units[i], tmpl, client, options.render);
      } catch (...) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        stop = true;
      }
      --in_flight;
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(parallelism), units.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  JudgeRun run;
  run.units = units.size();
  for (std::size_t i = 0; i < units.size(); ++i) {
    for (auto& w : outcomes[i].warnings) run.render_warnings.push_back(units[i].unit_id + ": " + w);
    for (auto& j : outcomes[i].judgments) {
      if (j.ok()) {
        ++run.ok;
      } else {
        ++run.errors;
        run.failures.push_back({j.unit_id, j.query_id, j.doc_id, *j.error});
      }
      run.judgments.push_back(std::move(j));
    }
  }
  run.backend_calls = client.network_calls() - calls_before;
  run.cache_hits = client.cache_hits() - hits_before;
  run.retries = client.retries() - retries_before;
  run.max_in_flight = max_in_flight;
  return run;
}

std::vector<FeatureConfig> default_ablation_configs() {
  return {
      {true, true, true},    // R+S+U
      {true, true, false},   // R+S
      {true, false, true},   // R+U
      {false, true, true},   // S+U
      {true, false, false},  // R
      {false, true, false},  // S
      {false, false, true},  // U
  };
}

AblationTable run_ablation(std::span<const TaskSession> sessions, BackendClient& client, JudgingMode mode,
                           std::span<const FeatureConfig> configs, const PromptTemplate& tmpl,
                           const JudgeOptions& options) {
  if (configs.empty()) throw UsageError("ablation needs at least one feature configuration");
  AblationTable table;
  table.mode = mode;
  for (const auto& fc : configs) {
    const auto units = make_units(sessions, mode, fc);
    const auto run = run_judging(units, tmpl, client, options);
    const auto paired = pair_labels(sessions, run.judgments);
    const auto overall = grouped_spearman(paired, GroupLevel::overall);
    table.rows.push_back({fc, overall.rho, paired.pairs.size(), run.errors});
  }
  return table;
}

}  // namespace ujudge
