#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "corpusforge/domain.hpp"
#include "corpusforge/filtering.hpp"
#include "corpusforge/triage.hpp"

namespace corpusforge {

struct StageCounts {
  std::int64_t ingested = 0;
  std::int64_t filtered_out = 0;
  std::int64_t gec_changed = 0;
  std::int64_t translated = 0;
  std::int64_t ape_changed = 0;
  std::int64_t scored = 0;

  friend bool operator==(const StageCounts&, const StageCounts&) = default;
};

/// Summary of one pipeline run. Holds ingested = filtered_out + scored and
/// sum(level_histogram) = scored.
struct PipelineReport {
  std::string project_id;
  StageCounts stage_counts;
  std::map<QualityLevel, std::int64_t> level_histogram;
  CostSummary cost;
  std::map<Stage, std::string> adapter_ids;
  std::string started_at;
  std::string finished_at;
  std::string config_fingerprint;
  FilterReport filter_report;

  friend bool operator==(const PipelineReport&, const PipelineReport&) = default;
};

/// Throws Error(validation) naming the first violated conservation law.
void validate(const PipelineReport& report);

void to_json(json& j, const StageCounts& v);
void from_json(const json& j, StageCounts& v);
void to_json(json& j, const PipelineReport& v);
void from_json(const json& j, PipelineReport& v);

}  // namespace corpusforge
