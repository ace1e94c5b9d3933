#include "corpusforge/domain.hpp"

#include <cctype>
#include <cmath>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <regex>
#include <set>
#include <utility>

namespace corpusforge {

namespace {

template <class E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<QualityLevel, 3> kLevelNames{{
    {QualityLevel::low, "low"}, {QualityLevel::middle, "middle"}, {QualityLevel::high, "high"}}};
constexpr NameTable<Stage, 4> kStageNames{{
    {Stage::gec, "gec"}, {Stage::nmt, "nmt"}, {Stage::ape, "ape"}, {Stage::qe, "qe"}}};
constexpr NameTable<PairStatus, 7> kStatusNames{{
    {PairStatus::draft, "draft"},
    {PairStatus::auto_accepted, "auto_accepted"},
    {PairStatus::pending_review, "pending_review"},
    {PairStatus::in_review, "in_review"},
    {PairStatus::accepted, "accepted"},
    {PairStatus::edited, "edited"},
    {PairStatus::rejected, "rejected"},
}};
constexpr NameTable<RejectReason, 7> kReasonNames{{
    {RejectReason::empty, "empty"},
    {RejectReason::too_short, "too_short"},
    {RejectReason::too_long, "too_long"},
    {RejectReason::too_many_tokens, "too_many_tokens"},
    {RejectReason::no_letters, "no_letters"},
    {RejectReason::wrong_script, "wrong_script"},
    {RejectReason::duplicate, "duplicate"},
}};
constexpr NameTable<AdapterKind, 2> kKindNames{{{AdapterKind::builtin, "builtin"}, {AdapterKind::remote, "remote"}}};
constexpr NameTable<QuantizerMode, 2> kModeNames{{
    {QuantizerMode::percentile, "percentile"}, {QuantizerMode::absolute, "absolute"}}};

template <class E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value) noexcept {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

template <class E, std::size_t N>
E value_of(const NameTable<E, N>& table, std::string_view name, const char* what) {
  for (const auto& [v, n] : table) {
    if (n == name) return v;
  }
  throw Error(ErrorCode::validation, "unknown " + std::string(what) + " '" + std::string(name) + "'");
}

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorCode::validation, message); }

template <class T>
void read_optional(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->template get<T>();
}

bool in_unit_interval(double x) noexcept { return x >= 0.0 && x <= 1.0; }

}  // namespace

std::strong_ordering level_order(QualityLevel a, QualityLevel b) noexcept {
  return static_cast<int>(a) <=> static_cast<int>(b);
}

std::string_view to_string(QualityLevel v) noexcept { return name_of(kLevelNames, v); }
std::string_view to_string(Stage v) noexcept { return name_of(kStageNames, v); }
std::string_view to_string(PairStatus v) noexcept { return name_of(kStatusNames, v); }
std::string_view to_string(RejectReason v) noexcept { return name_of(kReasonNames, v); }
std::string_view to_string(AdapterKind v) noexcept { return name_of(kKindNames, v); }

QualityLevel parse_quality_level(std::string_view name) { return value_of(kLevelNames, name, "quality level"); }
Stage parse_stage(std::string_view name) { return value_of(kStageNames, name, "stage"); }
PairStatus parse_pair_status(std::string_view name) { return value_of(kStatusNames, name, "pair status"); }
RejectReason parse_reject_reason(std::string_view name) { return value_of(kReasonNames, name, "reject reason"); }
AdapterKind parse_adapter_kind(std::string_view name) { return value_of(kKindNames, name, "adapter kind"); }

MinorUnits operator+(MinorUnits a, MinorUnits b) {
  MinorUnits out;
  if (__builtin_add_overflow(a.value, b.value, &out.value)) invalid("money overflow in addition");
  return out;
}

MinorUnits operator-(MinorUnits a, MinorUnits b) {
  MinorUnits out;
  if (__builtin_sub_overflow(a.value, b.value, &out.value)) invalid("money overflow in subtraction");
  return out;
}

MinorUnits operator*(MinorUnits price, std::int64_t count) {
  MinorUnits out;
  if (__builtin_mul_overflow(price.value, count, &out.value)) invalid("money overflow in multiplication");
  return out;
}

bool pair_status_transition_allowed(PairStatus from, PairStatus to) noexcept {
  using S = PairStatus;
  switch (from) {
    case S::draft:
      return to == S::auto_accepted || to == S::pending_review;
    case S::pending_review:
      return to == S::in_review;
    case S::in_review:
      return to == S::pending_review || to == S::accepted || to == S::edited || to == S::rejected;
    default:
      return false;
  }
}

MinorUnits PricingTable::price_for(QualityLevel level) const noexcept {
  switch (level) {
    case QualityLevel::high:
      return high;
    case QualityLevel::middle:
      return middle;
    case QualityLevel::low:
      return low;
  }
  return low;
}

std::map<std::string, std::vector<std::string>> default_script_map() {
  std::map<std::string, std::vector<std::string>> m;
  for (const char* lang : {"en", "de", "fr", "es", "it", "pt", "nl", "sv", "da", "no", "fi", "pl", "cs", "ro", "tr",
                           "id", "vi"}) {
    m[lang] = {"Latin"};
  }
  m["ko"] = {"Hangul", "Han"};
  m["ja"] = {"Hiragana", "Katakana", "Han"};
  m["zh"] = {"Han"};
  m["ru"] = {"Cyrillic"};
  m["uk"] = {"Cyrillic"};
  m["el"] = {"Greek"};
  m["ar"] = {"Arabic"};
  m["he"] = {"Hebrew"};
  m["hi"] = {"Devanagari"};
  m["th"] = {"Thai"};
  return m;
}

AdapterBinding builtin_binding(Stage stage) {
  AdapterBinding b;
  b.stage = stage;
  b.kind = AdapterKind::builtin;
  switch (stage) {
    case Stage::gec:
      b.adapter_id = "builtin_gec";
      break;
    case Stage::nmt:
      b.adapter_id = "builtin_nmt";
      break;
    case Stage::ape:
      b.adapter_id = "builtin_ape";
      break;
    case Stage::qe:
      b.adapter_id = "heuristic_qe";
      break;
  }
  return b;
}

std::vector<MetricSpec> ProjectConfig::effective_metrics() const {
  if (!metrics.empty()) return metrics;
  const auto it = adapters.find(Stage::qe);
  const AdapterBinding qe = it != adapters.end() ? it->second : builtin_binding(Stage::qe);
  return {MetricSpec{qe.adapter_id, qe}};
}

ProjectConfig default_project_config() {
  ProjectConfig c;
  for (Stage s : kPipelineStages) c.adapters[s] = builtin_binding(s);
  return c;
}

void validate(const QualityScore& score) {
  if (score.metric_scores.empty()) invalid("quality score has no metric scores");
  double sum = 0.0;
  for (const auto& [id, value] : score.metric_scores) {
    if (!in_unit_interval(value)) invalid("metric '" + id + "' score outside [0,1]");
    sum += value;
  }
  const double mean = sum / static_cast<double>(score.metric_scores.size());
  if (!in_unit_interval(score.final) || std::abs(score.final - mean) > 1e-9) {
    invalid("final score is not the mean of the metric scores");
  }
}

void validate(const SentencePair& pair) {
  if (pair.segment_id.empty()) invalid("pair has an empty segment id");
  if (pair.score.has_value() != pair.level.has_value()) invalid("pair level must be present iff score is present");
  if (pair.score) validate(*pair.score);
  if (pair.status == PairStatus::auto_accepted && pair.level != QualityLevel::high) {
    invalid("auto_accepted pair must have level high");
  }
  if ((pair.status == PairStatus::pending_review || pair.status == PairStatus::in_review) &&
      (!pair.level || *pair.level == QualityLevel::high)) {
    invalid("pair under review must have level middle or low");
  }
  if (pair.status != PairStatus::draft && !pair.level) invalid("non-draft pair must carry a level");
  if (pair.stage_trace.size() > kPipelineStages.size()) invalid("stage trace longer than the pipeline");
  for (std::size_t i = 0; i < pair.stage_trace.size(); ++i) {
    if (pair.stage_trace[i].stage != kPipelineStages[i]) invalid("stage trace out of pipeline order");
  }
}

void validate(const PricingTable& p) {
  if (p.high.value < 0 || p.middle.value < 0 || p.low.value < 0 || p.from_scratch.value < 0) {
    invalid("prices must be non-negative");
  }
  if (!(p.high <= p.middle && p.middle <= p.low)) invalid("pricing must satisfy high <= middle <= low");
  if (p.from_scratch < p.low) invalid("from_scratch price must be >= the low-level price");
}

void validate(const FilterRuleSet& r) {
  if (r.min_chars < 1) invalid("min_chars must be >= 1");
  if (r.min_chars > r.max_chars) invalid("min_chars must be <= max_chars");
  if (r.max_token_count < 1) invalid("max_token_count must be >= 1");
  if (!in_unit_interval(r.allowed_script_ratio)) invalid("allowed_script_ratio must lie in [0,1]");
}

void validate(const QuantizerConfig& q) {
  if (q.mode == QuantizerMode::percentile) {
    if (!(q.high_fraction >= 0.0 && q.high_fraction <= 0.5) || !(q.low_fraction >= 0.0 && q.low_fraction <= 0.5)) {
      invalid("quantizer fractions must lie in [0,0.5]");
    }
    if (q.high_fraction + q.low_fraction > 1.0) invalid("high_fraction + low_fraction must be <= 1");
  } else {
    if (!in_unit_interval(q.high_threshold) || !in_unit_interval(q.low_threshold)) {
      invalid("quantizer thresholds must lie in [0,1]");
    }
    if (q.low_threshold > q.high_threshold) invalid("low_threshold must be <= high_threshold");
  }
}

void validate(const AdapterBinding& b) {
  const std::string stage(to_string(b.stage));
  if (b.adapter_id.empty()) invalid("adapter binding for " + stage + " has an empty adapter_id");
  if (b.timeout_ms < 1) invalid("timeout_ms must be >= 1");
  if (b.max_batch < 1) invalid("max_batch must be >= 1");
  if (b.max_in_flight < 1) invalid("max_in_flight must be >= 1");
  if (b.kind == AdapterKind::remote) {
    static const std::regex kUrl(R"(^http://[A-Za-z0-9.\-]+(:[0-9]{1,5})?(/[^\s]*)?$)");
    if (!std::regex_match(b.endpoint, kUrl)) {
      invalid("remote " + stage + " binding needs an http://host[:port][/path] endpoint, got '" + b.endpoint + "'");
    }
  }
}

void validate_project_id(std::string_view id) {
  static const std::regex kId("^[A-Za-z0-9_-]{1,64}$");
  if (!std::regex_match(id.begin(), id.end(), kId)) {
    invalid("project id must match [A-Za-z0-9_-]{1,64}, got '" + std::string(id) + "'");
  }
}

void validate(const ProjectConfig& c) {
  if (c.source_lang.empty() || c.target_lang.empty()) invalid("source_lang and target_lang are required");
  validate(c.filter_rules);
  validate(c.quantizer);
  validate(c.pricing);
  for (Stage s : kPipelineStages) {
    const auto it = c.adapters.find(s);
    if (it == c.adapters.end()) invalid("no adapter binding for stage " + std::string(to_string(s)));
    if (it->second.stage != s) invalid("adapter binding stage does not match its key");
    validate(it->second);
  }
  std::set<std::string> ids;
  for (const auto& m : c.metrics) {
    if (m.id.empty()) invalid("metric id must be non-empty");
    if (!ids.insert(m.id).second) invalid("duplicate metric id '" + m.id + "'");
    if (m.binding.stage != Stage::qe) invalid("metric bindings must use stage qe");
    validate(m.binding);
  }
}

std::string config_fingerprint(const ProjectConfig& config) {
  const std::string canonical = json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---- JSON ------------------------------------------------------------------

void to_json(json& j, QualityLevel v) { j = to_string(v); }
void from_json(const json& j, QualityLevel& v) { v = parse_quality_level(j.get<std::string>()); }
void to_json(json& j, Stage v) { j = to_string(v); }
void from_json(const json& j, Stage& v) { v = parse_stage(j.get<std::string>()); }
void to_json(json& j, PairStatus v) { j = to_string(v); }
void from_json(const json& j, PairStatus& v) { v = parse_pair_status(j.get<std::string>()); }
void to_json(json& j, RejectReason v) { j = to_string(v); }
void from_json(const json& j, RejectReason& v) { v = parse_reject_reason(j.get<std::string>()); }
void to_json(json& j, AdapterKind v) { j = to_string(v); }
void from_json(const json& j, AdapterKind& v) { v = parse_adapter_kind(j.get<std::string>()); }

void to_json(json& j, const MinorUnits& v) { j = v.value; }
void from_json(const json& j, MinorUnits& v) { v.value = j.get<std::int64_t>(); }

void to_json(json& j, const Segment& v) {
  j = {{"id", v.id}, {"text", v.text}, {"lang", v.lang}, {"origin_line", v.origin_line}};
  if (!v.verdict) {
    j["verdict"] = nullptr;
  } else if (v.verdict->retained()) {
    j["verdict"] = "retained";
  } else {
    j["verdict"] = {{"rejected", *v.verdict->rejection}};
  }
}

void from_json(const json& j, Segment& v) {
  v.id = j.at("id").get<std::string>();
  v.text = j.at("text").get<std::string>();
  v.lang = j.at("lang").get<std::string>();
  v.origin_line = j.at("origin_line").get<std::int64_t>();
  const auto& verdict = j.at("verdict");
  if (verdict.is_null()) {
    v.verdict.reset();
  } else if (verdict.is_string() && verdict.get<std::string>() == "retained") {
    v.verdict = FilterVerdict{};
  } else {
    v.verdict = FilterVerdict{verdict.at("rejected").get<RejectReason>()};
  }
}

void to_json(json& j, const StageTrace& v) {
  j = {{"stage", v.stage}, {"adapter_id", v.adapter_id}, {"changed", v.changed}};
}

void from_json(const json& j, StageTrace& v) {
  v.stage = j.at("stage").get<Stage>();
  v.adapter_id = j.at("adapter_id").get<std::string>();
  v.changed = j.at("changed").get<bool>();
}

void to_json(json& j, const QualityScore& v) { j = {{"metrics", v.metric_scores}, {"final", v.final}}; }

void from_json(const json& j, QualityScore& v) {
  v.metric_scores = j.at("metrics").get<std::map<std::string, double>>();
  v.final = j.at("final").get<double>();
}

void to_json(json& j, const SentencePair& v) {
  j = {{"segment_id", v.segment_id},
       {"origin_line", v.origin_line},
       {"source", v.source},
       {"target", v.target},
       {"raw_target", v.raw_target},
       {"stage_trace", v.stage_trace},
       {"score", v.score ? json(*v.score) : json(nullptr)},
       {"level", v.level ? json(*v.level) : json(nullptr)},
       {"status", v.status}};
}

void from_json(const json& j, SentencePair& v) {
  v.segment_id = j.at("segment_id").get<std::string>();
  v.origin_line = j.at("origin_line").get<std::int64_t>();
  v.source = j.at("source").get<std::string>();
  v.target = j.at("target").get<std::string>();
  v.raw_target = j.at("raw_target").get<std::string>();
  v.stage_trace = j.at("stage_trace").get<std::vector<StageTrace>>();
  v.score = j.at("score").is_null() ? std::nullopt : std::optional(j.at("score").get<QualityScore>());
  v.level = j.at("level").is_null() ? std::nullopt : std::optional(j.at("level").get<QualityLevel>());
  v.status = j.at("status").get<PairStatus>();
}

void to_json(json& j, const PricingTable& v) {
  j = {{"currency", v.currency},
       {"per_segment", {{"high", v.high}, {"middle", v.middle}, {"low", v.low}}},
       {"from_scratch_per_segment", v.from_scratch}};
}

void from_json(const json& j, PricingTable& v) {
  read_optional(j, "currency", v.currency);
  if (auto it = j.find("per_segment"); it != j.end()) {
    read_optional(*it, "high", v.high);
    read_optional(*it, "middle", v.middle);
    read_optional(*it, "low", v.low);
  }
  read_optional(j, "from_scratch_per_segment", v.from_scratch);
}

void to_json(json& j, const FilterRuleSet& v) {
  j = {{"min_chars", v.min_chars},
       {"max_chars", v.max_chars},
       {"max_token_count", v.max_token_count},
       {"dedup", v.dedup},
       {"drop_no_letter", v.drop_no_letter},
       {"allowed_script_ratio", v.allowed_script_ratio},
       {"scripts", v.scripts}};
}

void from_json(const json& j, FilterRuleSet& v) {
  read_optional(j, "min_chars", v.min_chars);
  read_optional(j, "max_chars", v.max_chars);
  read_optional(j, "max_token_count", v.max_token_count);
  read_optional(j, "dedup", v.dedup);
  read_optional(j, "drop_no_letter", v.drop_no_letter);
  read_optional(j, "allowed_script_ratio", v.allowed_script_ratio);
  read_optional(j, "scripts", v.scripts);
}

void to_json(json& j, const QuantizerConfig& v) {
  j = {{"mode", name_of(kModeNames, v.mode)},
       {"high_fraction", v.high_fraction},
       {"low_fraction", v.low_fraction},
       {"high_threshold", v.high_threshold},
       {"low_threshold", v.low_threshold}};
}

void from_json(const json& j, QuantizerConfig& v) {
  if (auto it = j.find("mode"); it != j.end()) v.mode = value_of(kModeNames, it->get<std::string>(), "quantizer mode");
  read_optional(j, "high_fraction", v.high_fraction);
  read_optional(j, "low_fraction", v.low_fraction);
  read_optional(j, "high_threshold", v.high_threshold);
  read_optional(j, "low_threshold", v.low_threshold);
}

void to_json(json& j, const AdapterBinding& v) {
  j = {{"stage", v.stage},
       {"kind", v.kind},
       {"adapter_id", v.adapter_id},
       {"timeout_ms", v.timeout_ms},
       {"max_batch", v.max_batch},
       {"max_in_flight", v.max_in_flight}};
  if (v.kind == AdapterKind::remote) j["endpoint"] = v.endpoint;
  if (!v.bearer_token_env.empty()) j["bearer_token_env"] = v.bearer_token_env;
}

void from_json(const json& j, AdapterBinding& v) {
  read_optional(j, "stage", v.stage);
  read_optional(j, "kind", v.kind);
  read_optional(j, "endpoint", v.endpoint);
  read_optional(j, "adapter_id", v.adapter_id);
  read_optional(j, "timeout_ms", v.timeout_ms);
  read_optional(j, "max_batch", v.max_batch);
  read_optional(j, "max_in_flight", v.max_in_flight);
  read_optional(j, "bearer_token_env", v.bearer_token_env);
}

void to_json(json& j, const ProjectConfig& v) {
  json adapters = json::object();
  for (const auto& [stage, binding] : v.adapters) adapters[std::string(to_string(stage))] = binding;
  j = {{"source_lang", v.source_lang},
       {"target_lang", v.target_lang},
       {"filter_rules", v.filter_rules},
       {"quantizer", v.quantizer},
       {"pricing", v.pricing},
       {"adapters", adapters}};
  if (!v.metrics.empty()) {
    json metrics = json::array();
    for (const auto& m : v.metrics) metrics.push_back({{"id", m.id}, {"binding", m.binding}});
    j["metrics"] = metrics;
  }
}

void from_json(const json& j, ProjectConfig& v) {
  read_optional(j, "source_lang", v.source_lang);
  read_optional(j, "target_lang", v.target_lang);
  read_optional(j, "filter_rules", v.filter_rules);
  read_optional(j, "quantizer", v.quantizer);
  read_optional(j, "pricing", v.pricing);
  if (auto it = j.find("adapters"); it != j.end()) {
    for (const auto& [name, body] : it->items()) {
      const Stage stage = parse_stage(name);
      // Fields not given fall back to the built-in binding for the stage.
      AdapterBinding b = v.adapters.count(stage) ? v.adapters.at(stage) : builtin_binding(stage);
      if (body.contains("kind") && body.at("kind") == "remote" && !body.contains("adapter_id")) {
        b.adapter_id = "remote_" + name;
      }
      from_json(body, b);
      b.stage = stage;
      v.adapters[stage] = b;
    }
  }
  if (auto it = j.find("metrics"); it != j.end()) {
    v.metrics.clear();
    for (const auto& m : *it) {
      MetricSpec spec;
      spec.id = m.at("id").get<std::string>();
      spec.binding = builtin_binding(Stage::qe);
      if (auto b = m.find("binding"); b != m.end()) from_json(*b, spec.binding);
      spec.binding.stage = Stage::qe;
      v.metrics.push_back(std::move(spec));
    }
  }
}

ProjectConfig parse_project_config(const json& j) {
  if (!j.is_object()) invalid("config must be a JSON object");
  ProjectConfig config = default_project_config();
  try {
    from_json(j, config);
  } catch (const json::exception& e) {
    invalid(std::string("malformed config: ") + e.what());
  }
  validate(config);
  return config;
}

}  // namespace corpusforge
