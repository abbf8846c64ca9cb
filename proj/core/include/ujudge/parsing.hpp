#pragma once

// Ordinal label extraction from raw model responses.
//
// Rules are tried in a fixed order and the first one that yields
// `expected_count` labels wins:
//   1. bare_integer        the whole response is exactly expected_count integers
//   2. tagged_label        "doc <i>: <n>" (placed by index), else "label: <n>" /
//                          "usefulness: <n>" in document order
//   3. trailing_reasoning  per slot, the last standalone 0..3 integer in the final
//                          sentence that mentions useful/usefulness/label
// Only standalone integer tokens are candidates: digits inside larger numbers,
// decimals, times, fractions and "out of N" denominators never are.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ujudge/session.hpp"

namespace ujudge {

struct ExtractionResult {
  std::vector<int> labels;             // empty on error
  std::vector<ExtractionRule> rules;   // parallel to labels
  std::optional<std::string> error;    // "extraction_shortfall: ..." or "label_out_of_range: ..."

  bool ok() const noexcept { return !error.has_value(); }
};

/// Throws UsageError when expected_count is 0.
ExtractionResult extract_labels(std::string_view raw, std::size_t expected_count);

}  // namespace ujudge
