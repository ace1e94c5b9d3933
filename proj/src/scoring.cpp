#include "corpusforge/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "corpusforge/text.hpp"

namespace corpusforge {

double heuristic_qe(std::string_view source, std::string_view target) {
  const auto target_tokens = text::split_tokens(text::fold_case(target));
  if (target_tokens.empty()) return 0.0;
  const auto source_tokens = text::split_tokens(text::fold_case(source));

  const double t = static_cast<double>(std::max<std::size_t>(1, target_tokens.size()));
  const double s = static_cast<double>(std::max<std::size_t>(1, source_tokens.size()));
  const double len_penalty = std::min(1.0, std::abs(std::log(t / s)));

  const std::unordered_set<std::string> source_types(source_tokens.begin(), source_tokens.end());
  const std::unordered_set<std::string> target_types(target_tokens.begin(), target_tokens.end());
  std::size_t shared = 0;
  for (const auto& type : target_types) shared += source_types.count(type);
  const double copy_rate = static_cast<double>(shared) / static_cast<double>(target_types.size());

  const double punct_mismatch = text::terminal_mark(source) == text::terminal_mark(target) ? 0.0 : 1.0;

  return std::clamp(1.0 - 0.5 * len_penalty - 0.3 * copy_rate - 0.2 * punct_mismatch, 0.0, 1.0);
}

QualityScore aggregate_metrics(const std::map<std::string, double>& metric_scores) {
  if (metric_scores.empty()) throw Error(ErrorCode::validation, "cannot aggregate an empty metric set");
  double mean = 0.0;
  double lo = 1.0;
  double hi = 0.0;
  std::size_t k = 0;
  for (const auto& [id, value] : metric_scores) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw Error(ErrorCode::validation, "metric '" + id + "' score outside [0,1]", {{"metric", id}});
    }
    // Running mean: exact for equal values and free of large partial sums.
    ++k;
    mean += (value - mean) / static_cast<double>(k);
    lo = std::min(lo, value);
    hi = std::max(hi, value);
  }
  return QualityScore{metric_scores, std::clamp(mean, lo, hi)};
}

std::vector<double> HeuristicMetric::score(std::span<const TextPairItem> items) const {
  std::vector<double> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(heuristic_qe(item.source, item.target));
  return out;
}

std::vector<double> AdapterMetric::score(std::span<const TextPairItem> items) const {
  if (items.empty()) return {};
  return qe_score(items, client_);
}

void MetricRegistry::add(std::string id, std::shared_ptr<const Metric> metric) {
  if (id.empty()) throw Error(ErrorCode::validation, "metric id must be non-empty");
  if (!metric) throw Error(ErrorCode::validation, "metric '" + id + "' has no scorer");
  for (const auto& [existing, m] : metrics_) {
    if (existing == id) throw Error(ErrorCode::validation, "duplicate metric id '" + id + "'");
  }
  metrics_.emplace_back(std::move(id), std::move(metric));
}

std::vector<std::string> MetricRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, m] : metrics_) out.push_back(id);
  return out;
}

std::vector<QualityScore> MetricRegistry::score_batch(std::span<const TextPairItem> items) const {
  if (metrics_.empty()) throw Error(ErrorCode::validation, "metric registry is empty");
  std::vector<std::map<std::string, double>> per_item(items.size());
  for (const auto& [id, metric] : metrics_) {
    const auto values = metric->score(items);
    if (values.size() != items.size()) {
      throw Error(ErrorCode::stage_failure, "metric '" + id + "' returned the wrong number of scores");
    }
    for (std::size_t i = 0; i < items.size(); ++i) per_item[i][id] = values[i];
  }
  std::vector<QualityScore> out;
  out.reserve(items.size());
  for (const auto& scores : per_item) out.push_back(aggregate_metrics(scores));
  return out;
}

MetricRegistry make_registry(const ProjectConfig& config, const AdapterFactory& factory) {
  MetricRegistry registry;
  for (const auto& spec : config.effective_metrics()) {
    StageClient client(spec.binding, factory(spec.binding), config.source_lang, config.target_lang);
    registry.add(spec.id, std::make_shared<AdapterMetric>(std::move(client)));
  }
  return registry;
}

namespace {

TextPairItem to_item(const SentencePair& pair) {
  if (pair.source.empty()) {
    throw Error(ErrorCode::validation, "pair '" + pair.segment_id + "' has no source to score");
  }
  return {pair.segment_id, pair.source, pair.target};
}

}  // namespace

QualityScore score_pair(const SentencePair& pair, const MetricRegistry& registry) {
  const TextPairItem item = to_item(pair);
  return registry.score_batch(std::span(&item, 1)).front();
}

std::vector<QualityScore> score_pairs(std::span<const SentencePair> pairs, const MetricRegistry& registry) {
  std::vector<TextPairItem> items;
  items.reserve(pairs.size());
  for (const auto& p : pairs) items.push_back(to_item(p));
  if (items.empty()) return {};
  return registry.score_batch(items);
}

}  // namespace corpusforge
