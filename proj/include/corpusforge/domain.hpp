#pragma once

// Records shared by every stage of the corpus pipeline. All types are plain
// values; mutation of persisted state goes through the store.

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/error.hpp"
#include "json.hpp"

namespace corpusforge {

using nlohmann::json;

enum class QualityLevel { low, middle, high };

/// Total order low < middle < high.
std::strong_ordering level_order(QualityLevel a, QualityLevel b) noexcept;

enum class Stage { gec, nmt, ape, qe };
inline constexpr std::array<Stage, 4> kPipelineStages{Stage::gec, Stage::nmt, Stage::ape, Stage::qe};

enum class PairStatus { draft, auto_accepted, pending_review, in_review, accepted, edited, rejected };

/// Listed in rule evaluation order.
enum class RejectReason { empty, too_short, too_long, too_many_tokens, no_letters, wrong_script, duplicate };
inline constexpr std::array<RejectReason, 7> kRejectReasons{
    RejectReason::empty,      RejectReason::too_short,    RejectReason::too_long,  RejectReason::too_many_tokens,
    RejectReason::no_letters, RejectReason::wrong_script, RejectReason::duplicate};

enum class AdapterKind { builtin, remote };

std::string_view to_string(QualityLevel v) noexcept;
std::string_view to_string(Stage v) noexcept;
std::string_view to_string(PairStatus v) noexcept;
std::string_view to_string(RejectReason v) noexcept;
std::string_view to_string(AdapterKind v) noexcept;

// Parsers throw Error(validation) on unknown names.
QualityLevel parse_quality_level(std::string_view name);
Stage parse_stage(std::string_view name);
PairStatus parse_pair_status(std::string_view name);
RejectReason parse_reject_reason(std::string_view name);
AdapterKind parse_adapter_kind(std::string_view name);

/// Money in integer minor currency units (cents and the like).
struct MinorUnits {
  std::int64_t value = 0;
  friend auto operator<=>(const MinorUnits&, const MinorUnits&) = default;
};
// Checked arithmetic; overflow throws Error(validation).
MinorUnits operator+(MinorUnits a, MinorUnits b);
MinorUnits operator-(MinorUnits a, MinorUnits b);
MinorUnits operator*(MinorUnits price, std::int64_t count);

struct FilterVerdict {
  std::optional<RejectReason> rejection;

  bool retained() const noexcept { return !rejection.has_value(); }
  friend bool operator==(const FilterVerdict&, const FilterVerdict&) = default;
};

struct Segment {
  std::string id;
  std::string text;
  std::string lang;
  std::int64_t origin_line = 1;
  // Absent until the filter stage has looked at the segment.
  std::optional<FilterVerdict> verdict;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct StageTrace {
  Stage stage = Stage::gec;
  std::string adapter_id;
  bool changed = false;

  friend bool operator==(const StageTrace&, const StageTrace&) = default;
};

struct QualityScore {
  std::map<std::string, double> metric_scores;
  double final = 0.0;

  friend bool operator==(const QualityScore&, const QualityScore&) = default;
};

struct SentencePair {
  std::string segment_id;
  std::int64_t origin_line = 1;
  std::string source;      // post-GEC
  std::string target;      // post-APE
  std::string raw_target;  // NMT output
  std::vector<StageTrace> stage_trace;
  std::optional<QualityScore> score;
  std::optional<QualityLevel> level;
  PairStatus status = PairStatus::draft;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

/// Whether the pair status graph allows `from -> to`:
/// draft -> auto_accepted | pending_review, pending_review <-> in_review,
/// in_review -> accepted | edited | rejected.
bool pair_status_transition_allowed(PairStatus from, PairStatus to) noexcept;

struct PricingTable {
  std::string currency = "USD";
  MinorUnits high{0};
  MinorUnits middle{100};
  MinorUnits low{300};
  MinorUnits from_scratch{500};

  MinorUnits price_for(QualityLevel level) const noexcept;
  friend bool operator==(const PricingTable&, const PricingTable&) = default;
};

/// Expected Unicode scripts per primary language subtag.
std::map<std::string, std::vector<std::string>> default_script_map();

struct FilterRuleSet {
  std::int64_t min_chars = 2;
  std::int64_t max_chars = 1000;
  std::int64_t max_token_count = 150;
  bool dedup = true;
  bool drop_no_letter = true;
  double allowed_script_ratio = 0.5;
  std::map<std::string, std::vector<std::string>> scripts = default_script_map();

  friend bool operator==(const FilterRuleSet&, const FilterRuleSet&) = default;
};

enum class QuantizerMode { percentile, absolute };

struct QuantizerConfig {
  QuantizerMode mode = QuantizerMode::percentile;
  double high_fraction = 0.20;
  double low_fraction = 0.20;
  double high_threshold = 0.80;
  double low_threshold = 0.20;

  friend bool operator==(const QuantizerConfig&, const QuantizerConfig&) = default;
};

struct AdapterBinding {
  Stage stage = Stage::gec;
  AdapterKind kind = AdapterKind::builtin;
  std::string endpoint;  // http://host[:port][/path], remote only
  std::string adapter_id;
  std::int64_t timeout_ms = 10000;
  std::int64_t max_batch = 32;
  std::int64_t max_in_flight = 4;
  // Name of an environment variable holding a static bearer token.
  std::string bearer_token_env;

  friend bool operator==(const AdapterBinding&, const AdapterBinding&) = default;
};

AdapterBinding builtin_binding(Stage stage);

struct MetricSpec {
  std::string id;
  AdapterBinding binding;

  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

struct ProjectConfig {
  std::string source_lang = "en";
  std::string target_lang = "ko";
  FilterRuleSet filter_rules;
  QuantizerConfig quantizer;
  PricingTable pricing;
  std::map<Stage, AdapterBinding> adapters;
  // Empty means a single metric backed by the qe adapter.
  std::vector<MetricSpec> metrics;

  std::vector<MetricSpec> effective_metrics() const;
  friend bool operator==(const ProjectConfig&, const ProjectConfig&) = default;
};

ProjectConfig default_project_config();

// Invariant checks; each throws Error(validation) naming the broken rule.
void validate(const QualityScore& score);
void validate(const SentencePair& pair);
void validate(const PricingTable& pricing);
void validate(const FilterRuleSet& rules);
void validate(const QuantizerConfig& config);
void validate(const AdapterBinding& binding);
void validate(const ProjectConfig& config);

/// Project ids are used inside task ids and URLs: [A-Za-z0-9_-]{1,64}.
void validate_project_id(std::string_view id);

/// Stable hex digest (FNV-1a 64) of the canonical JSON form of a config.
std::string config_fingerprint(const ProjectConfig& config);

/// ISO-8601 UTC timestamp, second resolution.
std::string utc_now();

void to_json(json& j, QualityLevel v);
void from_json(const json& j, QualityLevel& v);
void to_json(json& j, Stage v);
void from_json(const json& j, Stage& v);
void to_json(json& j, PairStatus v);
void from_json(const json& j, PairStatus& v);
void to_json(json& j, RejectReason v);
void from_json(const json& j, RejectReason& v);
void to_json(json& j, AdapterKind v);
void from_json(const json& j, AdapterKind& v);
void to_json(json& j, const MinorUnits& v);
void from_json(const json& j, MinorUnits& v);
void to_json(json& j, const Segment& v);
void from_json(const json& j, Segment& v);
void to_json(json& j, const StageTrace& v);
void from_json(const json& j, StageTrace& v);
void to_json(json& j, const QualityScore& v);
void from_json(const json& j, QualityScore& v);
void to_json(json& j, const SentencePair& v);
void from_json(const json& j, SentencePair& v);
void to_json(json& j, const PricingTable& v);
void from_json(const json& j, PricingTable& v);
void to_json(json& j, const FilterRuleSet& v);
void from_json(const json& j, FilterRuleSet& v);
void to_json(json& j, const QuantizerConfig& v);
void from_json(const json& j, QuantizerConfig& v);
void to_json(json& j, const AdapterBinding& v);
void from_json(const json& j, AdapterBinding& v);
void to_json(json& j, const ProjectConfig& v);
void from_json(const json& j, ProjectConfig& v);

/// Parses a config document, filling defaults and validating the result.
/// Type errors and invariant violations surface as Error(validation).
ProjectConfig parse_project_config(const json& j);

}  // namespace corpusforge
