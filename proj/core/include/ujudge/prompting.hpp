#pragma once

// Usefulness-judgment prompt rendering.
//
// A template is plain text split into named sections by `[[name]]` header
// lines; `#template_id: <id>` may appear before the first section. Sections
// hold `{placeholder}` tokens. Rendering drops any line whose placeholder is
// absent (feature disabled or value missing) and any line that had
// placeholders but renders blank, so toggling a feature only ever adds or
// removes its own lines.
//
// Sections and their placeholders:
//   role_preamble              (system message)
//   task_context               {task_description} {target_count} {session_feature_lines}
//   session_history            {history_block} {query_count}      session mode only
//   history_entry              {query_index} {query_text} {clicked_docs}
//   documents                  {doc_block} {target_count}
//   per_document_block         {doc_index} {query_text} {url} {title} {summary}
//                              {serp_rank} {feature_lines}
//   relevance_line             {relevance}                         R
//   query_satisfaction_line    {query_satisfaction}                S
//   session_satisfaction_line  {session_satisfaction}              S
//   url_dwell_line             {url_dwell}                         U
//   query_dwell_line           {query_dwell}                       U
//   task_dwell_line            {task_dwell}                        U
//   ctr_line                   {user_ctr}                          U
//   output_instruction         {scale_instruction} {target_count}

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ujudge/session.hpp"

namespace ujudge {

/// The label scale wording, always rendered verbatim.
inline constexpr std::string_view kScaleWording =
    "3 = Very Useful, 2 = Fairly Useful, 1 = Somewhat Useful, 0 = Not Useful at All";

class PromptTemplate {
 public:
  /// Throws ConfigError on a missing section or unknown placeholder.
  static PromptTemplate parse(std::string_view text);
  static PromptTemplate load(const std::filesystem::path& path);
  static PromptTemplate builtin();
  static std::string_view builtin_text();

  const std::string& template_id() const noexcept { return template_id_; }
  const std::string& section(std::string_view name) const;

 private:
  std::string template_id_;
  std::map<std::string, std::string, std::less<>> sections_;
};

struct RenderOptions {
  /// 0 disables truncation. Otherwise the oldest history entries are dropped
  /// until the prompt fits.
  std::size_t max_prompt_chars = 0;
};

struct RenderedPrompt {
  std::string system;
  std::string user;
  std::vector<std::string> warnings;

  /// The text that is hashed and logged: system and user joined by a blank line.
  std::string text() const;
};

RenderedPrompt render_prompt(const JudgingUnit& unit, const PromptTemplate& tmpl,
                             const RenderOptions& options = {});

struct DecodingParams {
  std::string model;
  double temperature = 0.0;
  double top_p = 1.0;
};

/// SHA-256 hex digest over the prompt text, backend id and decoding params.
std::string prompt_hash(std::string_view prompt_text, std::string_view backend_id,
                        const DecodingParams& params);

/// Lowercase hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);

}  // namespace ujudge
