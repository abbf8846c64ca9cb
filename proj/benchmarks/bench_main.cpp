#include <random>

#include <benchmark/benchmark.h>

#include "ujudge/analysis.hpp"
#include "ujudge/batching.hpp"
#include "ujudge/ingest.hpp"
#include "ujudge/parsing.hpp"
#include "ujudge/prompting.hpp"

using namespace ujudge;

namespace {

const std::vector<TaskSession>& corpus() {
  static const auto sessions =
      ingest_dataset(DatasetKind::synthetic, std::string(UJUDGE_BENCH_DATA_DIR) + "/fixtures/synthetic20", {}).sessions;
  return sessions;
}

void BM_Spearman(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> d(0, 3);
  std::vector<int> x(static_cast<std::size_t>(state.range(0))), y(x.size());
  for (auto& v : x) v = d(rng);
  for (auto& v : y) v = d(rng);
  for (auto _ : state) benchmark::DoNotOptimize(spearman(std::span<const int>(x), std::span<const int>(y)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Spearman)->Arg(50)->Arg(1431)->Arg(7126);

void BM_ExtractTagged(benchmark::State& state) {
  std::string text;
  for (int i = 1; i <= state.range(0); ++i) text += "doc " + std::to_string(i) + ": " + std::to_string(i % 4) + "\n";
  for (auto _ : state) benchmark::DoNotOptimize(extract_labels(text, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_ExtractTagged)->Arg(1)->Arg(10);

void BM_ExtractReasoning(benchmark::State& state) {
  const std::string text =
      "The page was published in 2019 and answers 3 of the 10 questions the searcher had. It took 4.5 minutes "
      "to read. Weighing all of that, I would rate its usefulness 2.";
  for (auto _ : state) benchmark::DoNotOptimize(extract_labels(text, 1));
}
BENCHMARK(BM_ExtractReasoning);

void BM_RenderSessionPrompts(benchmark::State& state) {
  const auto units = make_session_units(corpus(), {});
  const auto tmpl = PromptTemplate::builtin();
  for (auto _ : state)
    for (const auto& u : units) benchmark::DoNotOptimize(render_prompt(u, tmpl));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(units.size()));
}
BENCHMARK(BM_RenderSessionPrompts);

void BM_PromptHash(benchmark::State& state) {
  const auto units = make_session_units(corpus(), {});
  const auto text = render_prompt(units.front(), PromptTemplate::builtin()).text();
  const DecodingParams params{"m", 0.0, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(prompt_hash(text, "mock", params));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_PromptHash);

}  // namespace

BENCHMARK_MAIN();
