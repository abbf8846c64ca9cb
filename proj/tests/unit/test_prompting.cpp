#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "ujudge/batching.hpp"
#include "ujudge/errors.hpp"
#include "ujudge/prompting.hpp"
#include "ujudge/session_io.hpp"

using namespace ujudge;
using namespace ujudge::testing;

namespace {

bool has(const std::string& s, std::string_view needle) { return s.find(needle) != std::string::npos; }

std::map<std::string, int> line_counts(const std::string& text) {
  std::map<std::string, int> m;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) ++m[line];
  return m;
}

bool is_sub_multiset(const std::map<std::string, int>& a, const std::map<std::string, int>& b) {
  for (const auto& [k, n] : a) {
    auto it = b.find(k);
    if (it == b.end() || it->second < n) return false;
  }
  return true;
}

FeatureConfig from_mask(int m) { return {(m & 1) != 0, (m & 2) != 0, (m & 4) != 0}; }

}  // namespace

TEST_SUITE("prompting") {
  TEST_CASE("the compiled-in template matches the shipped file") {
    CHECK(PromptTemplate::builtin_text() == read_file(data_dir() / "templates/usefulness_dna.txt"));
    CHECK(PromptTemplate::builtin().template_id() == "usefulness-dna-v1");
  }

  TEST_CASE("feature lines appear exactly when their flag is on") {
    const auto sessions = five_click_sessions();
    const auto tmpl = PromptTemplate::builtin();
    for (int m = 0; m < 8; ++m) {
      const auto fc = from_mask(m);
      for (auto mode : {JudgingMode::baseline, JudgingMode::session}) {
        for (const auto& u : make_units(sessions, mode, fc)) {
          const auto p = render_prompt(u, tmpl);
          const auto text = p.text();
          CHECK(has(text, kScaleWording));
          CHECK(has(text, u.context.queries.front().clicks.front().url));
          CHECK(has(text, "relevance") == fc.use_relevance);
          CHECK(has(text, "satisfaction") == fc.use_satisfaction);
          CHECK(has(text, "dwell") == fc.use_behavior);
          CHECK(has(text, "CTR") == fc.use_behavior);
        }
      }
    }
  }

  TEST_CASE("enabling a feature only adds lines") {
    std::mt19937_64 rng(5);
    const auto tmpl = PromptTemplate::builtin();
    for (int iter = 0; iter < 40; ++iter) {
      const auto sessions = random_sessions(rng, 3);
      for (auto mode : {JudgingMode::baseline, JudgingMode::session}) {
        for (int small = 0; small < 8; ++small) {
          for (int big = 0; big < 8; ++big) {
            if ((small & big) != small) continue;
            auto a = make_units(sessions, mode, from_mask(small));
            auto b = make_units(sessions, mode, from_mask(big));
            REQUIRE(a.size() == b.size());
            for (std::size_t k = 0; k < a.size(); ++k)
              CHECK(is_sub_multiset(line_counts(render_prompt(a[k], tmpl).text()),
                                    line_counts(render_prompt(b[k], tmpl).text())));
          }
        }
      }
    }
  }

  TEST_CASE("numbers use fixed precision") {
    auto sessions = five_click_sessions();
    sessions[0].user_ctr = 2.0 / 3.0;
    sessions[0].queries[0].clicks[0].url_dwell_sec = 87.25;
    const auto units = make_session_units(sessions, {});
    const auto text = render_prompt(units[0], PromptTemplate::builtin()).text();
    CHECK(has(text, "dwell): 87.2 s"));
    CHECK(has(text, "(CTR): 0.667"));
    CHECK(has(text, "(dwell): 300.0 s"));
  }

  TEST_CASE("absent values drop their line with a warning") {
    auto sessions = five_click_sessions();
    sessions[0].queries[0].clicks[0].relevance_human.reset();
    sessions[0].session_satisfaction.reset();
    const auto units = make_session_units(sessions, {});
    const auto p = render_prompt(units[0], PromptTemplate::builtin());
    CHECK(p.warnings.size() == 2);
    CHECK(std::count_if(p.warnings.begin(), p.warnings.end(),
                        [](const std::string& w) { return has(w, "relevance label absent for q1/dA"); }) == 1);
    CHECK_FALSE(has(p.text(), "whole session:"));
  }

  TEST_CASE("history only in session mode, oldest dropped first under a size cap") {
    const auto sessions = five_click_sessions();
    const auto tmpl = PromptTemplate::builtin();
    auto base = make_baseline_units(sessions, {});
    CHECK_FALSE(has(render_prompt(base[0], tmpl).text(), "Search history"));

    auto sess = make_session_units(sessions, {});
    const auto full = render_prompt(sess[0], tmpl);
    CHECK(has(full.text(), "Query 1: \"text of q1\""));
    CHECK(has(full.text(), "Query 2: \"text of q2\""));
    CHECK(full.warnings.empty());

    RenderOptions opt;
    opt.max_prompt_chars = full.text().size() - 10;
    const auto cut = render_prompt(sess[0], tmpl, opt);
    CHECK_FALSE(has(cut.text(), "Query 1: \"text of q1\""));
    CHECK(has(cut.text(), "Query 2: \"text of q2\""));
    CHECK(cut.text().size() <= opt.max_prompt_chars);
    CHECK_FALSE(cut.warnings.empty());
  }

  TEST_CASE("template validation") {
    std::string text(PromptTemplate::builtin_text());
    CHECK_NOTHROW(PromptTemplate::parse(text));

    std::string unknown = text;
    unknown.replace(unknown.find("{url}"), 5, "{link}");
    CHECK_THROWS_AS(PromptTemplate::parse(unknown), ConfigError);

    std::string missing = text.substr(0, text.find("[[output_instruction]]"));
    CHECK_THROWS_AS(PromptTemplate::parse(missing), ConfigError);

    std::string no_scale = text;
    no_scale.replace(no_scale.find("{scale_instruction}"), 19, "");
    CHECK_THROWS_AS(PromptTemplate::parse(no_scale), ConfigError);

    CHECK_THROWS_AS(PromptTemplate::load("/no/such/template.txt"), ConfigError);
  }

  TEST_CASE("rendering is deterministic") {
    const auto units = make_session_units(five_click_sessions(), {});
    const auto tmpl = PromptTemplate::builtin();
    CHECK(render_prompt(units[1], tmpl).text() == render_prompt(units[1], tmpl).text());
  }
}

TEST_SUITE("prompt_hash") {
  TEST_CASE("SHA-256 test vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("same inputs give the same digest; any change gives another") {
    DecodingParams p{"m", 0.0, 1.0};
    const auto h = prompt_hash("prompt", "b", p);
    CHECK(h.size() == 64);
    CHECK(h == prompt_hash("prompt", "b", p));
    CHECK(h != prompt_hash("prompt!", "b", p));
    CHECK(h != prompt_hash("prompt", "c", p));
    CHECK(h != prompt_hash("prompt", "b", DecodingParams{"m2", 0.0, 1.0}));
    CHECK(h != prompt_hash("prompt", "b", DecodingParams{"m", 0.1, 1.0}));
    CHECK(h != prompt_hash("prompt", "b", DecodingParams{"m", 0.0, 0.9}));
    // Field boundaries are unambiguous.
    CHECK(prompt_hash("ab", "c", p) != prompt_hash("a", "bc", p));
  }
}
