#pragma once

// Stage 4: per-metric sentence quality scores and their aggregate.

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/adapters.hpp"
#include "corpusforge/domain.hpp"

namespace corpusforge {

/// Reference-free heuristic in [0,1]:
///   clamp01(1 - 0.5*len_penalty - 0.3*copy_rate - 0.2*punct_mismatch)
/// len_penalty    = min(1, |ln(max(1,|T|) / max(1,|S|))|) over whitespace tokens
/// copy_rate      = share of case-folded target token types that also occur in the source
/// punct_mismatch = 0 iff both sides end with the same mark in {. ! ?} or neither does
/// A target without tokens scores 0.
double heuristic_qe(std::string_view source, std::string_view target);

/// Mean of the per-metric scores. Throws Error(validation) on an empty map or
/// a value outside [0,1].
QualityScore aggregate_metrics(const std::map<std::string, double>& metric_scores);

/// A batch scorer producing one value in [0,1] per (source, target) item.
class Metric {
 public:
  virtual ~Metric() = default;
  virtual std::vector<double> score(std::span<const TextPairItem> items) const = 0;
};

class HeuristicMetric final : public Metric {
 public:
  std::vector<double> score(std::span<const TextPairItem> items) const override;
};

/// Scores through a qe stage adapter (builtin or remote).
class AdapterMetric final : public Metric {
 public:
  explicit AdapterMetric(StageClient client) : client_(std::move(client)) {}
  std::vector<double> score(std::span<const TextPairItem> items) const override;

 private:
  StageClient client_;
};

class MetricRegistry {
 public:
  /// Throws Error(validation) on an empty or duplicate id.
  void add(std::string id, std::shared_ptr<const Metric> metric);

  std::size_t size() const noexcept { return metrics_.size(); }
  std::vector<std::string> ids() const;

  /// One QualityScore per item. Any metric failure propagates; partial metric
  /// sets are never averaged.
  std::vector<QualityScore> score_batch(std::span<const TextPairItem> items) const;

 private:
  std::vector<std::pair<std::string, std::shared_ptr<const Metric>>> metrics_;
};

MetricRegistry make_registry(const ProjectConfig& config, const AdapterFactory& factory);

QualityScore score_pair(const SentencePair& pair, const MetricRegistry& registry);
std::vector<QualityScore> score_pairs(std::span<const SentencePair> pairs, const MetricRegistry& registry);

}  // namespace corpusforge
