#pragma once

// Stage 1a: rule-based cleaning of the mono corpus. Rules run in the fixed
// order of RejectReason; the first failing rule names the rejection.

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/domain.hpp"

namespace corpusforge {

struct FilterReport {
  std::int64_t input_count = 0;
  std::int64_t retained_count = 0;
  std::map<RejectReason, std::int64_t> rejections;

  std::int64_t rejected_count() const noexcept;
  friend bool operator==(const FilterReport&, const FilterReport&) = default;
};

struct FilterResult {
  std::vector<Segment> retained;  // verdict set to retained
  std::vector<Segment> all;       // every input segment, in input order, with its verdict
  FilterReport report;
};

/// Lowercase + NFC + collapsed, trimmed whitespace.
std::string normalize_for_dedup(std::string_view text);

/// Throws Error(validation) when two input segments share an id.
FilterResult filter_corpus(std::span<const Segment> segments, const FilterRuleSet& rules);

void to_json(json& j, const FilterReport& v);
void from_json(const json& j, FilterReport& v);

}  // namespace corpusforge
