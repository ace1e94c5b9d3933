#include "corpusforge/filtering.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "corpusforge/text.hpp"

namespace corpusforge {

namespace {

std::string primary_subtag(std::string_view lang) {
  std::string out;
  for (char c : lang) {
    if (c == '-' || c == '_') break;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

// Every rule but dedup, which needs the whole corpus.
std::optional<RejectReason> first_failing_rule(const Segment& segment, const FilterRuleSet& rules,
                                               const std::vector<std::string>* scripts) {
  const auto trimmed = text::decode(text::trim(segment.text));
  if (trimmed.empty()) return RejectReason::empty;
  const auto length = static_cast<std::int64_t>(trimmed.size());
  if (length < rules.min_chars) return RejectReason::too_short;
  if (length > rules.max_chars) return RejectReason::too_long;
  if (static_cast<std::int64_t>(text::split_tokens(segment.text).size()) > rules.max_token_count) {
    return RejectReason::too_many_tokens;
  }
  std::int64_t letters = 0;
  std::int64_t in_script = 0;
  for (char32_t c : trimmed) {
    if (!text::is_letter(c)) continue;
    ++letters;
    if (scripts != nullptr && std::find(scripts->begin(), scripts->end(), text::script_name(c)) != scripts->end()) {
      ++in_script;
    }
  }
  if (rules.drop_no_letter && letters == 0) return RejectReason::no_letters;
  if (scripts != nullptr && letters > 0 &&
      static_cast<double>(in_script) / static_cast<double>(letters) < rules.allowed_script_ratio) {
    return RejectReason::wrong_script;
  }
  return std::nullopt;
}

}  // namespace

std::int64_t FilterReport::rejected_count() const noexcept {
  std::int64_t total = 0;
  for (const auto& [reason, count] : rejections) total += count;
  return total;
}

std::string normalize_for_dedup(std::string_view text) {
  return text::collapse_whitespace(text::nfc(text::to_lower(text)));
}

FilterResult filter_corpus(std::span<const Segment> segments, const FilterRuleSet& rules) {
  validate(rules);
  {
    std::unordered_set<std::string_view> ids;
    for (const auto& s : segments) {
      if (!ids.insert(s.id).second) {
        throw Error(ErrorCode::validation, "duplicate segment id '" + s.id + "'", {{"id", s.id}});
      }
    }
  }

  FilterResult result;
  result.all.assign(segments.begin(), segments.end());
  std::vector<std::optional<RejectReason>> verdicts(segments.size());
  std::vector<std::string> keys(segments.size());
  // key -> index of the surviving candidate with the smallest origin_line
  std::unordered_map<std::string, std::size_t> first_by_key;

  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    const auto it = rules.scripts.find(primary_subtag(seg.lang));
    const auto* scripts = it != rules.scripts.end() && !it->second.empty() ? &it->second : nullptr;
    verdicts[i] = first_failing_rule(seg, rules, scripts);
    if (verdicts[i] || !rules.dedup) continue;
    keys[i] = normalize_for_dedup(seg.text);
    auto [slot, inserted] = first_by_key.try_emplace(keys[i], i);
    if (!inserted && seg.origin_line < segments[slot->second].origin_line) slot->second = i;
  }
  if (rules.dedup) {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (!verdicts[i] && first_by_key.at(keys[i]) != i) verdicts[i] = RejectReason::duplicate;
    }
  }

  result.report.input_count = static_cast<std::int64_t>(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    result.all[i].verdict = FilterVerdict{verdicts[i]};
    if (verdicts[i]) {
      ++result.report.rejections[*verdicts[i]];
    } else {
      result.retained.push_back(result.all[i]);
    }
  }
  result.report.retained_count = static_cast<std::int64_t>(result.retained.size());
  return result;
}

void to_json(json& j, const FilterReport& v) {
  json rejections = json::object();
  for (RejectReason r : kRejectReasons) {
    const auto it = v.rejections.find(r);
    rejections[std::string(to_string(r))] = it == v.rejections.end() ? 0 : it->second;
  }
  j = {{"input_count", v.input_count}, {"retained_count", v.retained_count}, {"rejections", rejections}};
}

void from_json(const json& j, FilterReport& v) {
  v.input_count = j.at("input_count").get<std::int64_t>();
  v.retained_count = j.at("retained_count").get<std::int64_t>();
  v.rejections.clear();
  for (const auto& [name, count] : j.at("rejections").items()) {
    const auto n = count.get<std::int64_t>();
    if (n != 0) v.rejections[parse_reject_reason(name)] = n;
  }
}

}  // namespace corpusforge
