#include "ujudge/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <regex>

#include "ujudge/errors.hpp"

namespace ujudge {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct Candidate {
  std::size_t pos = 0;  // offset of the first digit
  long value = 0;
};

// Standalone non-negative integer tokens in `text`, skipping document indices
// ("doc 2", "document #3") and "out of N" / "/N" denominators.
std::vector<Candidate> standalone_integers(std::string_view text) {
  std::vector<Candidate> out;
  const std::string low = lower(text);
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_digit(text[j])) ++j;
    const char before = i > 0 ? text[i - 1] : ' ';
    const char before2 = i > 1 ? text[i - 2] : ' ';
    const char after = j < text.size() ? text[j] : ' ';
    const char after2 = j + 1 < text.size() ? text[j + 1] : ' ';

    bool ok = !is_alnum(before) && !is_alnum(after);
    if ((before == '.' || before == ',' || before == ':' || before == '/') && is_digit(before2)) ok = false;
    if ((after == '.' || after == ',' || after == ':' || after == '/') && is_digit(after2)) ok = false;
    if (before == '-' || after == '%') ok = false;

    if (ok) {
      // Look back over spaces and '#' for a document index or "out of".
      std::size_t k = i;
      while (k > 0 && (low[k - 1] == ' ' || low[k - 1] == '#')) --k;
      std::string_view prefix(low.data(), k);
      auto ends_with_word = [&](std::string_view w) {
        if (prefix.size() < w.size() || prefix.substr(prefix.size() - w.size()) != w) return false;
        return prefix.size() == w.size() || !is_alnum(prefix[prefix.size() - w.size() - 1]);
      };
      if (ends_with_word("doc") || ends_with_word("document") || ends_with_word("out of")) ok = false;
    }
    if (ok && j - i <= 9) {
      long v = 0;
      std::from_chars(text.data() + i, text.data() + j, v);
      out.push_back({i, v});
    }
    i = j;
  }
  return out;
}

ExtractionResult success(std::vector<int> labels, ExtractionRule rule) {
  ExtractionResult r;
  r.rules.assign(labels.size(), rule);
  r.labels = std::move(labels);
  return r;
}

ExtractionResult failure(std::string message) {
  ExtractionResult r;
  r.error = std::move(message);
  return r;
}

ExtractionResult out_of_range(std::string_view token) {
  return failure("label_out_of_range: " + std::string(token));
}

// A token that should be a label: "-1", "7", "2.5" are all present-but-invalid.
bool is_number_token(std::string_view tok) {
  if (tok.empty()) return false;
  std::size_t i = tok.front() == '-' ? 1 : 0;
  if (i >= tok.size() || !is_digit(tok[i])) return false;
  bool dot = false;
  for (; i < tok.size(); ++i) {
    if (tok[i] == '.' && !dot && i + 1 < tok.size()) {
      dot = true;
      continue;
    }
    if (!is_digit(tok[i])) return false;
  }
  return true;
}

std::optional<int> as_label(std::string_view tok) {
  if (tok.size() != 1 || tok[0] < '0' || tok[0] > '3') return std::nullopt;
  return tok[0] - '0';
}

// Rule 1. nullopt means "did not fire".
std::optional<ExtractionResult> bare_integers(std::string_view raw, std::size_t expected) {
  std::string_view body = raw;
  while (!body.empty() && is_space(body.front())) body.remove_prefix(1);
  while (!body.empty() && is_space(body.back())) body.remove_suffix(1);
  if (!body.empty() && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
  if (body.empty()) return std::nullopt;

  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < body.size()) {
    while (i < body.size() && (is_space(body[i]) || body[i] == ',' || body[i] == ';')) ++i;
    std::size_t j = i;
    while (j < body.size() && !is_space(body[j]) && body[j] != ',' && body[j] != ';') ++j;
    if (j > i) {
      auto tok = body.substr(i, j - i);
      if (tok.size() > 1 && tok.back() == '.') tok.remove_suffix(1);
      tokens.push_back(tok);
    }
    i = j;
  }
  if (tokens.size() != expected) return std::nullopt;
  for (auto tok : tokens)
    if (!is_number_token(tok)) return std::nullopt;

  std::vector<int> labels;
  for (auto tok : tokens) {
    auto v = as_label(tok);
    if (!v) return out_of_range(tok);
    labels.push_back(*v);
  }
  return success(std::move(labels), ExtractionRule::bare_integer);
}

std::string strip_markup(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw)
    if (c != '*' && c != '`') out += c;
  return out;
}

// Reads the number token that starts at `pos` (optionally signed/decimal).
std::string_view number_at(std::string_view text, std::size_t pos) {
  std::size_t j = pos;
  if (j < text.size() && text[j] == '-') ++j;
  while (j < text.size() && (is_digit(text[j]) || (text[j] == '.' && j + 1 < text.size() && is_digit(text[j + 1]))))
    ++j;
  while (j < text.size() && is_alnum(text[j])) ++j;  // "2019abc" stays one bad token
  return text.substr(pos, j - pos);
}

// Rule 2.
std::optional<ExtractionResult> tagged_labels(std::string_view raw, std::size_t expected, std::size_t& best_partial) {
  static const std::regex indexed(R"(\b(?:doc|document)\s*#?\s*(\d+)\s*[:=]\s*(?:label\s*[:=]?\s*)?(?=-?\d))",
                                  std::regex::icase);
  static const std::regex unindexed(R"(\b(?:usefulness(?:\s+label)?|label)\s*[:=]\s*(?=-?\d))", std::regex::icase);

  const std::string text = strip_markup(raw);

  std::map<std::size_t, std::string_view> by_index;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), indexed); it != std::sregex_iterator(); ++it) {
    std::size_t index = 0;
    const auto idx = (*it)[1].str();
    std::from_chars(idx.data(), idx.data() + idx.size(), index);
    const auto value_pos = static_cast<std::size_t>(it->position(0) + it->length(0));
    by_index[index] = number_at(text, value_pos);
  }
  std::size_t covered = 0;
  for (std::size_t k = 1; k <= expected; ++k) covered += by_index.count(k);
  if (covered == expected) {
    std::vector<int> labels;
    for (std::size_t k = 1; k <= expected; ++k) {
      auto v = as_label(by_index[k]);
      if (!v) return out_of_range(by_index[k]);
      labels.push_back(*v);
    }
    return success(std::move(labels), ExtractionRule::tagged_label);
  }
  best_partial = std::max(best_partial, covered);

  std::vector<std::string_view> values;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), unindexed); it != std::sregex_iterator(); ++it) {
    const auto value_pos = static_cast<std::size_t>(it->position(0) + it->length(0));
    values.push_back(number_at(text, value_pos));
  }
  if (values.size() >= expected) {
    std::vector<int> labels;
    for (std::size_t k = values.size() - expected; k < values.size(); ++k) {
      auto v = as_label(values[k]);
      if (!v) return out_of_range(values[k]);
      labels.push_back(*v);
    }
    return success(std::move(labels), ExtractionRule::tagged_label);
  }
  best_partial = std::max(best_partial, values.size());
  return std::nullopt;
}

std::vector<std::string_view> sentences(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    bool end = c == '\n' || c == '!' || c == '?' || c == ';';
    if (c == '.') end = i + 1 >= text.size() || is_space(text[i + 1]) || text[i + 1] == '<';
    if (end) {
      if (i > start) out.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  if (start < text.size()) out.push_back(text.substr(start));
  return out;
}

bool mentions_verdict(std::string_view sentence) {
  const auto low = lower(sentence);
  return low.find("useful") != std::string::npos || low.find("label") != std::string::npos;
}

std::optional<int> verdict_in(std::string_view segment) {
  std::optional<int> found;
  for (auto s : sentences(segment)) {
    if (!mentions_verdict(s)) continue;
    std::optional<int> last;
    for (const auto& c : standalone_integers(s))
      if (c.value >= kMinLabel && c.value <= kMaxLabel) last = static_cast<int>(c.value);
    if (last) found = last;
  }
  return found;
}

// Rule 3.
std::optional<ExtractionResult> trailing_reasoning(std::string_view raw, std::size_t expected,
                                                   std::size_t& best_partial) {
  const std::string text = strip_markup(raw);
  std::vector<int> labels;
  if (expected == 1) {
    if (auto v = verdict_in(text)) return success({*v}, ExtractionRule::trailing_reasoning);
    return std::nullopt;
  }

  static const std::regex mention(R"(\b(?:doc|document)\s*#?\s*(\d+)\b)", std::regex::icase);
  struct Mention {
    std::size_t pos;
    std::size_t index;
  };
  std::vector<Mention> mentions;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), mention); it != std::sregex_iterator(); ++it) {
    std::size_t index = 0;
    const auto idx = (*it)[1].str();
    std::from_chars(idx.data(), idx.data() + idx.size(), index);
    mentions.push_back({static_cast<std::size_t>(it->position(0)), index});
  }
  std::size_t found = 0;
  for (std::size_t slot = 1; slot <= expected; ++slot) {
    std::optional<int> verdict;
    for (std::size_t m = 0; m < mentions.size(); ++m) {
      if (mentions[m].index != slot) continue;
      const std::size_t begin = mentions[m].pos;
      const std::size_t end = m + 1 < mentions.size() ? mentions[m + 1].pos : text.size();
      if (auto v = verdict_in(std::string_view(text).substr(begin, end - begin))) verdict = v;
    }
    if (verdict) {
      ++found;
      labels.push_back(*verdict);
    }
  }
  if (found == expected) return success(std::move(labels), ExtractionRule::trailing_reasoning);
  best_partial = std::max(best_partial, found);
  return std::nullopt;
}

}  // namespace

ExtractionResult extract_labels(std::string_view raw, std::size_t expected_count) {
  if (expected_count == 0) throw UsageError("extract_labels: expected_count must be at least 1");
  if (auto r = bare_integers(raw, expected_count)) return *r;
  std::size_t partial = 0;
  if (auto r = tagged_labels(raw, expected_count, partial)) return *r;
  if (auto r = trailing_reasoning(raw, expected_count, partial)) return *r;
  return failure("extraction_shortfall: found " + std::to_string(partial) + " of " +
                 std::to_string(expected_count) + " labels");
}

}  // namespace ujudge
