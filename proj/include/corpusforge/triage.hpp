#pragma once

// Stage 5: quantize final scores into levels, price the editing work and
// track the human review lifecycle of middle/low pairs.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/domain.hpp"

namespace corpusforge {

struct ScoredItem {
  std::string pair_id;
  double score = 0.0;
};

/// Percentile mode: rank by (score desc, pair_id asc); the first
/// floor(high_fraction*n) are high, the last floor(low_fraction*n) are low.
/// Absolute mode: score >= high_threshold is high, score < low_threshold is low.
/// Throws Error(validation) on duplicate ids or scores outside [0,1].
std::map<std::string, QualityLevel> quantize(std::span<const ScoredItem> scored, const QuantizerConfig& config);

/// floor(fraction * n), guarded against products like 0.29*100 = 28.999...
std::size_t fraction_count(double fraction, std::size_t n) noexcept;

struct CostSummary {
  std::map<QualityLevel, std::int64_t> per_level_counts;
  std::map<QualityLevel, MinorUnits> per_level_cost;
  MinorUnits total_editing_cost;
  MinorUnits from_scratch_cost;
  MinorUnits estimated_savings;

  friend bool operator==(const CostSummary&, const CostSummary&) = default;
};

CostSummary estimate_cost(const std::map<std::string, QualityLevel>& levels, const PricingTable& pricing);
CostSummary estimate_cost(const std::map<QualityLevel, std::int64_t>& counts, const PricingTable& pricing);

enum class TaskState { pending, in_review, resolved_accept, resolved_edit, resolved_reject };
enum class TaskAction { claim, release, accept, edit, reject };
inline constexpr std::array<TaskState, 5> kTaskStates{TaskState::pending, TaskState::in_review,
                                                      TaskState::resolved_accept, TaskState::resolved_edit,
                                                      TaskState::resolved_reject};
inline constexpr std::array<TaskAction, 5> kTaskActions{TaskAction::claim, TaskAction::release, TaskAction::accept,
                                                        TaskAction::edit, TaskAction::reject};

std::string_view to_string(TaskState v) noexcept;
std::string_view to_string(TaskAction v) noexcept;
TaskState parse_task_state(std::string_view name);
TaskAction parse_task_action(std::string_view name);

/// The transition table; nullopt for an illegal (state, action) pair.
std::optional<TaskState> next_task_state(TaskState state, TaskAction action) noexcept;
bool is_terminal(TaskState state) noexcept;
/// Pair status mirrored by a task state.
PairStatus pair_status_for(TaskState state) noexcept;

struct ReviewTask {
  std::string task_id;
  std::string project_id;
  std::string pair_id;
  QualityLevel level = QualityLevel::middle;
  MinorUnits price;
  TaskState state = TaskState::pending;
  std::optional<std::string> assignee;
  std::optional<std::string> edited_target;
  std::uint64_t version = 0;

  friend bool operator==(const ReviewTask&, const ReviewTask&) = default;
};

void validate(const ReviewTask& task);

/// "<project>.<origin_line>"; unique across projects.
std::string task_id_for(std::string_view project_id, std::int64_t origin_line);
/// Inverse of task_id_for's project part; throws Error(not_found) if malformed.
std::string project_of_task(std::string_view task_id);

/// Moves every draft pair out of draft: high pairs become auto_accepted, the
/// rest pending_review with one priced task each. A pair that already has a
/// live task is a conflict.
std::vector<ReviewTask> create_review_tasks(std::span<SentencePair> pairs, const PricingTable& pricing,
                                            std::string_view project_id);

/// Pure transition. Throws Error(state) on an illegal transition and
/// Error(validation) when an edit carries an empty target.
ReviewTask apply_action(const ReviewTask& task, TaskAction action, const std::optional<std::string>& edited_target,
                        const std::optional<std::string>& assignee);

void to_json(json& j, TaskState v);
void from_json(const json& j, TaskState& v);
void to_json(json& j, const CostSummary& v);
void from_json(const json& j, CostSummary& v);
void to_json(json& j, const ReviewTask& v);
void from_json(const json& j, ReviewTask& v);

}  // namespace corpusforge
