#include "ujudge/prompting.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <optional>
#include <set>

#include "ujudge/errors.hpp"
#include "ujudge/session_io.hpp"

namespace ujudge {

namespace {

using Values = std::map<std::string, std::optional<std::string>, std::less<>>;

const std::map<std::string, std::set<std::string>, std::less<>>& section_placeholders() {
  static const std::map<std::string, std::set<std::string>, std::less<>> table{
      {"role_preamble", {}},
      {"task_context", {"task_description", "target_count", "session_feature_lines"}},
      {"session_history", {"history_block", "query_count"}},
      {"history_entry", {"query_index", "query_text", "clicked_docs"}},
      {"documents", {"doc_block", "target_count"}},
      {"per_document_block",
       {"doc_index", "query_text", "url", "title", "summary", "serp_rank", "feature_lines"}},
      {"relevance_line", {"relevance"}},
      {"query_satisfaction_line", {"query_satisfaction"}},
      {"session_satisfaction_line", {"session_satisfaction"}},
      {"url_dwell_line", {"url_dwell"}},
      {"query_dwell_line", {"query_dwell"}},
      {"task_dwell_line", {"task_dwell"}},
      {"ctr_line", {"user_ctr"}},
      {"output_instruction", {"scale_instruction", "target_count"}},
  };
  return table;
}

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Calls `on_token(name)` for each {name} token in `line`, `on_text` for the
// literal runs between them.
template <typename OnText, typename OnToken>
void scan_line(std::string_view line, OnText on_text, OnToken on_token) {
  std::size_t i = 0;
  std::size_t literal_start = 0;
  while (i < line.size()) {
    if (line[i] == '{') {
      std::size_t j = i + 1;
      while (j < line.size() && is_placeholder_char(line[j])) ++j;
      if (j > i + 1 && j < line.size() && line[j] == '}') {
        on_text(line.substr(literal_start, i - literal_start));
        on_token(line.substr(i + 1, j - i - 1));
        i = j + 1;
        literal_start = i;
        continue;
      }
    }
    ++i;
  }
  on_text(line.substr(literal_start));
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

std::string substitute(std::string_view section, const Values& values) {
  std::string out;
  bool first = true;
  for (auto line : split_lines(section)) {
    std::string rendered;
    bool had_token = false;
    bool drop = false;
    scan_line(
        line, [&](std::string_view text) { rendered += text; },
        [&](std::string_view name) {
          had_token = true;
          auto it = values.find(name);
          if (it == values.end() || !it->second) {
            drop = true;
            return;
          }
          rendered += *it->second;
        });
    if (drop || (had_token && is_blank(rendered))) continue;
    if (!first) out += '\n';
    out += rendered;
    first = false;
  }
  return out;
}

std::string trim_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

std::string fixed(double v, int decimals) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*f", decimals, v);
  return buf.data();
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void warn_once(std::vector<std::string>& warnings, std::string msg) {
  if (std::find(warnings.begin(), warnings.end(), msg) == warnings.end())
    warnings.push_back(std::move(msg));
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string_view text) {
  PromptTemplate t;
  std::string* current = nullptr;
  std::string current_name;
  for (auto line : split_lines(text)) {
    if (line.size() >= 4 && line.substr(0, 2) == "[[" && line.substr(line.size() - 2) == "]]") {
      current_name = std::string(line.substr(2, line.size() - 4));
      if (!section_placeholders().count(current_name))
        throw ConfigError("unknown template section: " + current_name);
      if (t.sections_.count(current_name))
        throw ConfigError("duplicate template section: " + current_name);
      current = &t.sections_[current_name];
      continue;
    }
    if (!current) {
      if (line.rfind("#template_id:", 0) == 0) {
        auto id = line.substr(13);
        while (!id.empty() && id.front() == ' ') id.remove_prefix(1);
        t.template_id_ = std::string(id);
      } else if (!is_blank(line) && line.front() != '#') {
        throw ConfigError("template text outside of any section: " + std::string(line));
      }
      continue;
    }
    if (!current->empty()) *current += '\n';
    *current += line;
  }
  for (auto& [name, body] : t.sections_) {
    body = trim_trailing_newlines(std::move(body));
    const auto& allowed = section_placeholders().at(name);
    for (auto line : split_lines(body)) {
      scan_line(
          line, [](std::string_view) {},
          [&](std::string_view token) {
            if (!allowed.count(std::string(token)))
              throw ConfigError("unknown placeholder {" + std::string(token) + "} in section " + name);
          });
    }
  }
  for (const auto& [name, allowed] : section_placeholders()) {
    if (!t.sections_.count(name)) throw ConfigError("template section missing: " + name);
  }
  if (t.sections_.at("output_instruction").find("{scale_instruction}") == std::string::npos)
    throw ConfigError("output_instruction must contain {scale_instruction}");
  if (t.sections_.at("per_document_block").find("{feature_lines}") == std::string::npos)
    throw ConfigError("per_document_block must contain {feature_lines}");
  if (t.sections_.at("documents").find("{doc_block}") == std::string::npos)
    throw ConfigError("documents must contain {doc_block}");
  if (t.sections_.at("session_history").find("{history_block}") == std::string::npos)
    throw ConfigError("session_history must contain {history_block}");
  if (t.template_id_.empty()) t.template_id_ = "custom";
  return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(std::string("cannot load template: ") + e.what());
  }
  return parse(text);
}

std::string_view PromptTemplate::builtin_text() {
  static const std::string text =
#include "builtin_template.inc"
      ;
  return text;
}

PromptTemplate PromptTemplate::builtin() { return parse(builtin_text()); }

const std::string& PromptTemplate::section(std::string_view name) const {
  auto it = sections_.find(name);
  if (it == sections_.end()) throw ConfigError("template section missing: " + std::string(name));
  return it->second;
}

std::string RenderedPrompt::text() const { return system + "\n\n" + user; }

namespace {

struct RenderContext {
  const JudgingUnit& unit;
  const PromptTemplate& tmpl;
  std::vector<std::string>& warnings;
};

std::optional<std::string> feature_block(const std::vector<std::string>& lines) {
  return join(lines, "\n");
}

std::optional<std::string> session_feature_lines(RenderContext& ctx) {
  const auto& fc = ctx.unit.feature_config;
  const auto& s = ctx.unit.context;
  if (!fc.use_satisfaction && !fc.use_behavior) return std::nullopt;
  std::vector<std::string> lines;
  if (fc.use_satisfaction) {
    if (!s.session_satisfaction)
      warn_once(ctx.warnings, "session satisfaction absent for " + s.session_id + "; line omitted");
    Values v{{"session_satisfaction",
              s.session_satisfaction ? std::optional(std::to_string(*s.session_satisfaction)) : std::nullopt}};
    auto line = substitute(ctx.tmpl.section("session_satisfaction_line"), v);
    if (!line.empty()) lines.push_back(line);
  }
  if (fc.use_behavior) {
    lines.push_back(substitute(ctx.tmpl.section("task_dwell_line"),
                               Values{{"task_dwell", fixed(s.task_dwell_sec, 1)}}));
    if (!s.user_ctr) warn_once(ctx.warnings, "user CTR absent for " + s.user_id + "; line omitted");
    auto line = substitute(ctx.tmpl.section("ctr_line"),
                           Values{{"user_ctr", s.user_ctr ? std::optional(fixed(*s.user_ctr, 3)) : std::nullopt}});
    if (!line.empty()) lines.push_back(line);
  }
  std::erase_if(lines, [](const std::string& l) { return l.empty(); });
  return feature_block(lines);
}

std::optional<std::string> doc_feature_lines(RenderContext& ctx, const QueryRecord& q, const ClickedDoc& c) {
  const auto& fc = ctx.unit.feature_config;
  if (!fc.use_relevance && !fc.use_satisfaction && !fc.use_behavior) return std::nullopt;
  std::vector<std::string> lines;
  const std::string ref = q.query_id + "/" + c.doc_id;
  if (fc.use_relevance) {
    if (!c.relevance_human) warn_once(ctx.warnings, "relevance label absent for " + ref + "; line omitted");
    lines.push_back(substitute(
        ctx.tmpl.section("relevance_line"),
        Values{{"relevance", c.relevance_human ? std::optional(std::to_string(*c.relevance_human)) : std::nullopt}}));
  }
  if (fc.use_satisfaction) {
    if (!q.query_satisfaction)
      warn_once(ctx.warnings, "query satisfaction absent for " + q.query_id + "; line omitted");
    lines.push_back(substitute(ctx.tmpl.section("query_satisfaction_line"),
                               Values{{"query_satisfaction", q.query_satisfaction
                                                                ? std::optional(std::to_string(*q.query_satisfaction))
                                                                : std::nullopt}}));
  }
  if (fc.use_behavior) {
    lines.push_back(substitute(ctx.tmpl.section("url_dwell_line"), Values{{"url_dwell", fixed(c.url_dwell_sec, 1)}}));
    lines.push_back(
        substitute(ctx.tmpl.section("query_dwell_line"), Values{{"query_dwell", fixed(q.query_dwell_sec, 1)}}));
  }
  std::erase_if(lines, [](const std::string& l) { return l.empty(); });
  return feature_block(lines);
}

std::string render_user(RenderContext& ctx, std::size_t dropped_history) {
  const auto& u = ctx.unit;
  const auto& s = u.context;
  const std::string target_count = std::to_string(u.target_clicks.size());
  std::vector<std::string> blocks;

  blocks.push_back(substitute(ctx.tmpl.section("task_context"),
                              Values{{"task_description", s.task_description},
                                     {"target_count", target_count},
                                     {"session_feature_lines", session_feature_lines(ctx)}}));

  if (u.mode == JudgingMode::session) {
    std::vector<std::string> entries;
    for (std::size_t qi = dropped_history; qi < s.queries.size(); ++qi) {
      const auto& q = s.queries[qi];
      std::vector<std::string> opened;
      for (const auto& c : q.clicks) {
        auto it = std::find(u.target_clicks.begin(), u.target_clicks.end(), ClickRef{q.query_id, c.doc_id});
        if (it != u.target_clicks.end())
          opened.push_back("Document " + std::to_string(it - u.target_clicks.begin() + 1));
      }
      entries.push_back(substitute(ctx.tmpl.section("history_entry"),
                                   Values{{"query_index", std::to_string(qi + 1)},
                                          {"query_text", q.query_text},
                                          {"clicked_docs", opened.empty() ? "none" : join(opened, ", ")}}));
    }
    blocks.push_back(substitute(ctx.tmpl.section("session_history"),
                                Values{{"history_block", join(entries, "\n")},
                                       {"query_count", std::to_string(s.queries.size())}}));
  }

  std::vector<std::string> docs;
  for (std::size_t i = 0; i < u.target_clicks.size(); ++i) {
    const auto& ref = u.target_clicks[i];
    const QueryRecord* q = u.find_query(ref.query_id);
    const ClickedDoc* c = u.find_click(ref);
    if (!q || !c) throw DataError("unit " + u.unit_id + " targets a click missing from its context: " +
                                  ref.query_id + "/" + ref.doc_id);
    docs.push_back(substitute(ctx.tmpl.section("per_document_block"),
                              Values{{"doc_index", std::to_string(i + 1)},
                                     {"query_text", q->query_text},
                                     {"url", c->url},
                                     {"title", c->title},
                                     {"summary", c->summary},
                                     {"serp_rank", std::to_string(c->serp_rank)},
                                     {"feature_lines", doc_feature_lines(ctx, *q, *c)}}));
  }
  blocks.push_back(substitute(ctx.tmpl.section("documents"),
                              Values{{"doc_block", join(docs, "\n\n")}, {"target_count", target_count}}));

  blocks.push_back(substitute(ctx.tmpl.section("output_instruction"),
                              Values{{"scale_instruction", "Use this scale: " + std::string(kScaleWording) + "."},
                                     {"target_count", target_count}}));
  std::erase_if(blocks, [](const std::string& b) { return b.empty(); });
  return join(blocks, "\n\n");
}

}  // namespace

RenderedPrompt render_prompt(const JudgingUnit& unit, const PromptTemplate& tmpl, const RenderOptions& options) {
  RenderedPrompt out;
  RenderContext ctx{unit, tmpl, out.warnings};
  out.system = substitute(tmpl.section("role_preamble"), {});
  out.user = render_user(ctx, 0);

  if (options.max_prompt_chars > 0 && out.text().size() > options.max_prompt_chars) {
    std::size_t dropped = 0;
    if (unit.mode == JudgingMode::session) {
      while (dropped < unit.context.queries.size() && out.text().size() > options.max_prompt_chars) {
        ++dropped;
        std::vector<std::string> scratch;
        RenderContext quiet{unit, tmpl, scratch};
        out.user = render_user(quiet, dropped);
      }
      if (dropped > 0)
        out.warnings.push_back("history truncated: dropped " + std::to_string(dropped) + " oldest quer" +
                               (dropped == 1 ? "y" : "ies"));
    }
    if (out.text().size() > options.max_prompt_chars)
      out.warnings.push_back("prompt exceeds max_prompt_chars (" + std::to_string(out.text().size()) + " > " +
                             std::to_string(options.max_prompt_chars) + ")");
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string prompt_hash(std::string_view prompt_text, std::string_view backend_id, const DecodingParams& params) {
  // Length-prefixed fields so no two distinct inputs share a preimage.
  std::string key = "ujudge-prompt-v1";
  auto field = [&](std::string_view v) {
    key += '|';
    key += std::to_string(v.size());
    key += ':';
    key += v;
  };
  std::array<char, 64> buf{};
  field(backend_id);
  field(params.model);
  std::snprintf(buf.data(), buf.size(), "%.17g", params.temperature);
  field(buf.data());
  std::snprintf(buf.data(), buf.size(), "%.17g", params.top_p);
  field(buf.data());
  field(prompt_text);
  return sha256_hex(key);
}

}  // namespace ujudge
