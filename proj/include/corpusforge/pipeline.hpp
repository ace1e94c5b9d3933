#pragma once

// Runs the five stages over a project corpus:
//   filter -> gec -> nmt -> ape -> score -> quantize -> tasks + cost
// and commits every intermediate result in a single store transaction, so a
// failed run leaves the project exactly as it was.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/adapters.hpp"
#include "corpusforge/report.hpp"
#include "corpusforge/repository.hpp"

namespace corpusforge {

/// Errors: not_found (project), state (no corpus, or review work that a
/// re-run would discard), conflict (a run already in progress), stage_failure
/// (adapter or metric failure; the store is left untouched).
PipelineReport run_pipeline(Repository& repo, std::string_view project_id,
                            const AdapterFactory& factory = make_adapter);

/// {"stage": ..., "done": ..., "total": ...} while a run is in progress.
std::optional<json> run_progress(const Repository& repo, std::string_view project_id);

struct PreviewRow {
  std::string id;
  std::string before;
  std::string after;
  std::optional<double> score;  // qe only

  friend bool operator==(const PreviewRow&, const PreviewRow&) = default;
};

/// Runs one stage (filter, gec, nmt, ape or qe) on the first `sample_size`
/// inputs without persisting anything. nmt/ape/qe read the previous stage's
/// output from a completed run; without one the call fails with Error(state)
/// listing the missing stages in details.missing_stages.
std::vector<PreviewRow> preview_stage(const Repository& repo, std::string_view project_id, std::string_view stage,
                                      std::int64_t sample_size, const AdapterFactory& factory = make_adapter);

void to_json(json& j, const PreviewRow& v);

}  // namespace corpusforge
