#include "ujudge/session_io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "ujudge/errors.hpp"

namespace ujudge {

using json = nlohmann::json;

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

json click_to_json(const ClickedDoc& c) {
  return json{{"doc_id", c.doc_id},
              {"url", c.url},
              {"title", c.title},
              {"summary", c.summary},
              {"serp_rank", c.serp_rank},
              {"click_time", c.click_time},
              {"url_dwell_sec", c.url_dwell_sec},
              {"usefulness_human", c.usefulness_human},
              {"relevance_human", opt(c.relevance_human)}};
}

ClickedDoc click_from_json(const json& j) {
  ClickedDoc c;
  c.doc_id = j.at("doc_id").get<std::string>();
  c.url = j.at("url").get<std::string>();
  c.title = j.at("title").get<std::string>();
  c.summary = j.at("summary").get<std::string>();
  c.serp_rank = j.at("serp_rank").get<int>();
  c.click_time = j.at("click_time").get<double>();
  c.url_dwell_sec = j.at("url_dwell_sec").get<double>();
  c.usefulness_human = j.at("usefulness_human").get<int>();
  c.relevance_human = get_opt<int>(j, "relevance_human");
  return c;
}

json query_to_json(const QueryRecord& q) {
  json clicks = json::array();
  for (const auto& c : q.clicks) clicks.push_back(click_to_json(c));
  return json{{"query_id", q.query_id},
              {"query_text", q.query_text},
              {"issue_time", q.issue_time},
              {"query_dwell_sec", q.query_dwell_sec},
              {"query_satisfaction", opt(q.query_satisfaction)},
              {"serp_size", opt(q.serp_size)},
              {"clicks", std::move(clicks)}};
}

QueryRecord query_from_json(const json& j) {
  QueryRecord q;
  q.query_id = j.at("query_id").get<std::string>();
  q.query_text = j.at("query_text").get<std::string>();
  q.issue_time = j.at("issue_time").get<double>();
  q.query_dwell_sec = j.at("query_dwell_sec").get<double>();
  q.query_satisfaction = get_opt<int>(j, "query_satisfaction");
  q.serp_size = get_opt<int>(j, "serp_size");
  for (const auto& c : j.at("clicks")) q.clicks.push_back(click_from_json(c));
  return q;
}

template <typename Enum, typename Parse>
Enum enum_field(const json& j, const char* key, Parse parse) {
  const auto text = j.at(key).get<std::string>();
  auto v = parse(text);
  if (!v) throw DataError(std::string("unknown value for ") + key + ": " + text);
  return *v;
}

std::string read_lines_error(const std::filesystem::path& path, std::size_t line_no,
                             const std::exception& e) {
  return path.string() + ":" + std::to_string(line_no) + ": " + e.what();
}

}  // namespace

std::string session_to_line(const TaskSession& s) {
  json queries = json::array();
  for (const auto& q : s.queries) queries.push_back(query_to_json(q));
  json j{{"session_id", s.session_id},
         {"user_id", s.user_id},
         {"task_id", opt(s.task_id)},
         {"task_description", opt(s.task_description)},
         {"task_dwell_sec", s.task_dwell_sec},
         {"session_satisfaction", opt(s.session_satisfaction)},
         {"user_ctr", opt(s.user_ctr)},
         {"queries", std::move(queries)},
         {"dataset_kind", to_string(s.dataset_kind)},
         {"feature_defs",
          {{"ctr_definition", to_string(s.feature_defs.ctr_definition)},
           {"dwell_last_click_rule", to_string(s.feature_defs.dwell_last_click_rule)}}}};
  return j.dump();
}

TaskSession session_from_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    TaskSession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.user_id = j.at("user_id").get<std::string>();
    s.task_id = get_opt<std::string>(j, "task_id");
    s.task_description = get_opt<std::string>(j, "task_description");
    s.task_dwell_sec = j.at("task_dwell_sec").get<double>();
    s.session_satisfaction = get_opt<int>(j, "session_satisfaction");
    s.user_ctr = get_opt<double>(j, "user_ctr");
    for (const auto& q : j.at("queries")) s.queries.push_back(query_from_json(q));
    s.dataset_kind = enum_field<DatasetKind>(j, "dataset_kind", parse_dataset_kind);
    const json& defs = j.at("feature_defs");
    s.feature_defs.ctr_definition =
        enum_field<CtrDefinition>(defs, "ctr_definition", parse_ctr_definition);
    s.feature_defs.dwell_last_click_rule =
        enum_field<DwellLastClickRule>(defs, "dwell_last_click_rule", parse_dwell_rule);
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed session record: ") + e.what());
  }
}

std::string judgment_to_line(const Judgment& jd) {
  json j{{"unit_id", jd.unit_id},
         {"query_id", jd.query_id},
         {"doc_id", jd.doc_id},
         {"label_pred", opt(jd.label_pred)},
         {"raw_response", jd.raw_response},
         {"backend_id", jd.backend_id},
         {"prompt_hash", jd.prompt_hash},
         {"extraction_rule",
          jd.extraction_rule ? json(to_string(*jd.extraction_rule)) : json(nullptr)},
         {"error", opt(jd.error)},
         {"temperature", jd.temperature},
         {"top_p", jd.top_p}};
  return j.dump();
}

Judgment judgment_from_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    Judgment jd;
    jd.unit_id = j.at("unit_id").get<std::string>();
    jd.query_id = j.at("query_id").get<std::string>();
    jd.doc_id = j.at("doc_id").get<std::string>();
    jd.label_pred = get_opt<int>(j, "label_pred");
    jd.raw_response = j.at("raw_response").get<std::string>();
    jd.backend_id = j.at("backend_id").get<std::string>();
    jd.prompt_hash = j.at("prompt_hash").get<std::string>();
    if (auto rule = get_opt<std::string>(j, "extraction_rule")) {
      jd.extraction_rule = parse_extraction_rule(*rule);
      if (!jd.extraction_rule) throw DataError("unknown extraction_rule: " + *rule);
    }
    jd.error = get_opt<std::string>(j, "error");
    jd.temperature = j.at("temperature").get<double>();
    jd.top_p = j.at("top_p").get<double>();
    return jd;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed judgment record: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

template <typename T, typename Parse>
std::vector<T> read_records(const std::filesystem::path& path, Parse parse) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read file: " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(parse(line));
    } catch (const DataError& e) {
      throw DataError(read_lines_error(path, line_no, e));
    }
  }
  return out;
}

}  // namespace

void write_sessions(const std::filesystem::path& path, std::span<const TaskSession> sessions) {
  std::string content;
  for (const auto& s : sessions) {
    content += session_to_line(s);
    content += '\n';
  }
  write_file_atomic(path, content);
}

std::vector<TaskSession> read_sessions(const std::filesystem::path& path) {
  return read_records<TaskSession>(path, session_from_line);
}

void write_judgments(const std::filesystem::path& path, std::span<const Judgment> judgments) {
  std::string content;
  for (const auto& j : judgments) {
    content += judgment_to_line(j);
    content += '\n';
  }
  write_file_atomic(path, content);
}

std::vector<Judgment> read_judgments(const std::filesystem::path& path) {
  return read_records<Judgment>(path, judgment_from_line);
}

}  // namespace ujudge
