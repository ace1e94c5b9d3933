#include "corpusforge/triage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "corpusforge/text.hpp"

namespace corpusforge {

namespace {

constexpr std::array<std::pair<TaskState, std::string_view>, 5> kStateNames{{
    {TaskState::pending, "pending"},
    {TaskState::in_review, "in_review"},
    {TaskState::resolved_accept, "resolved_accept"},
    {TaskState::resolved_edit, "resolved_edit"},
    {TaskState::resolved_reject, "resolved_reject"},
}};
constexpr std::array<std::pair<TaskAction, std::string_view>, 5> kActionNames{{
    {TaskAction::claim, "claim"},
    {TaskAction::release, "release"},
    {TaskAction::accept, "accept"},
    {TaskAction::edit, "edit"},
    {TaskAction::reject, "reject"},
}};

constexpr std::array<QualityLevel, 3> kLevels{QualityLevel::high, QualityLevel::middle, QualityLevel::low};

}  // namespace

std::size_t fraction_count(double fraction, std::size_t n) noexcept {
  const double exact = fraction * static_cast<double>(n);
  return static_cast<std::size_t>(std::floor(exact + 1e-9));
}

std::map<std::string, QualityLevel> quantize(std::span<const ScoredItem> scored, const QuantizerConfig& config) {
  validate(config);
  std::unordered_set<std::string_view> ids;
  for (const auto& item : scored) {
    if (!ids.insert(item.pair_id).second) {
      throw Error(ErrorCode::validation, "duplicate pair id '" + item.pair_id + "'", {{"id", item.pair_id}});
    }
    if (!(item.score >= 0.0 && item.score <= 1.0)) {
      throw Error(ErrorCode::validation, "score for '" + item.pair_id + "' outside [0,1]", {{"id", item.pair_id}});
    }
  }

  std::map<std::string, QualityLevel> levels;
  if (config.mode == QuantizerMode::absolute) {
    for (const auto& item : scored) {
      QualityLevel level = QualityLevel::middle;
      if (item.score >= config.high_threshold) {
        level = QualityLevel::high;
      } else if (item.score < config.low_threshold) {
        level = QualityLevel::low;
      }
      levels.emplace(item.pair_id, level);
    }
    return levels;
  }

  std::vector<const ScoredItem*> ranked;
  ranked.reserve(scored.size());
  for (const auto& item : scored) ranked.push_back(&item);
  std::sort(ranked.begin(), ranked.end(), [](const ScoredItem* a, const ScoredItem* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->pair_id < b->pair_id;
  });
  const std::size_t n = ranked.size();
  const std::size_t high = fraction_count(config.high_fraction, n);
  const std::size_t low = fraction_count(config.low_fraction, n);
  for (std::size_t i = 0; i < n; ++i) {
    QualityLevel level = QualityLevel::middle;
    if (i < high) {
      level = QualityLevel::high;
    } else if (i >= n - low) {
      level = QualityLevel::low;
    }
    levels.emplace(ranked[i]->pair_id, level);
  }
  return levels;
}

CostSummary estimate_cost(const std::map<QualityLevel, std::int64_t>& counts, const PricingTable& pricing) {
  validate(pricing);
  CostSummary summary;
  std::int64_t total_count = 0;
  for (QualityLevel level : kLevels) {
    const auto it = counts.find(level);
    const std::int64_t count = it == counts.end() ? 0 : it->second;
    if (count < 0) throw Error(ErrorCode::validation, "negative level count");
    summary.per_level_counts[level] = count;
    summary.per_level_cost[level] = pricing.price_for(level) * count;
    summary.total_editing_cost = summary.total_editing_cost + summary.per_level_cost[level];
    if (__builtin_add_overflow(total_count, count, &total_count)) {
      throw Error(ErrorCode::validation, "level count overflow");
    }
  }
  summary.from_scratch_cost = pricing.from_scratch * total_count;
  summary.estimated_savings = summary.from_scratch_cost - summary.total_editing_cost;
  return summary;
}

CostSummary estimate_cost(const std::map<std::string, QualityLevel>& levels, const PricingTable& pricing) {
  std::map<QualityLevel, std::int64_t> counts;
  for (const auto& [id, level] : levels) ++counts[level];
  return estimate_cost(counts, pricing);
}

std::string_view to_string(TaskState v) noexcept {
  for (const auto& [s, name] : kStateNames) {
    if (s == v) return name;
  }
  return "?";
}

std::string_view to_string(TaskAction v) noexcept {
  for (const auto& [a, name] : kActionNames) {
    if (a == v) return name;
  }
  return "?";
}

TaskState parse_task_state(std::string_view name) {
  for (const auto& [s, n] : kStateNames) {
    if (n == name) return s;
  }
  throw Error(ErrorCode::validation, "unknown task state '" + std::string(name) + "'");
}

TaskAction parse_task_action(std::string_view name) {
  for (const auto& [a, n] : kActionNames) {
    if (n == name) return a;
  }
  throw Error(ErrorCode::validation, "unknown task action '" + std::string(name) + "'");
}

std::optional<TaskState> next_task_state(TaskState state, TaskAction action) noexcept {
  switch (state) {
    case TaskState::pending:
      if (action == TaskAction::claim) return TaskState::in_review;
      return std::nullopt;
    case TaskState::in_review:
      switch (action) {
        case TaskAction::release:
          return TaskState::pending;
        case TaskAction::accept:
          return TaskState::resolved_accept;
        case TaskAction::edit:
          return TaskState::resolved_edit;
        case TaskAction::reject:
          return TaskState::resolved_reject;
        case TaskAction::claim:
          return std::nullopt;
      }
      return std::nullopt;
    default:
      return std::nullopt;
  }
}

bool is_terminal(TaskState state) noexcept {
  return state == TaskState::resolved_accept || state == TaskState::resolved_edit ||
         state == TaskState::resolved_reject;
}

PairStatus pair_status_for(TaskState state) noexcept {
  switch (state) {
    case TaskState::pending:
      return PairStatus::pending_review;
    case TaskState::in_review:
      return PairStatus::in_review;
    case TaskState::resolved_accept:
      return PairStatus::accepted;
    case TaskState::resolved_edit:
      return PairStatus::edited;
    case TaskState::resolved_reject:
      return PairStatus::rejected;
  }
  return PairStatus::pending_review;
}

void validate(const ReviewTask& task) {
  if (task.task_id.empty() || task.pair_id.empty()) throw Error(ErrorCode::validation, "task lacks an id");
  if (task.level == QualityLevel::high) throw Error(ErrorCode::validation, "high pairs never get review tasks");
  if (task.price.value < 0) throw Error(ErrorCode::validation, "task price must be non-negative");
  const bool has_edit = task.edited_target && !task.edited_target->empty();
  if (has_edit != (task.state == TaskState::resolved_edit)) {
    throw Error(ErrorCode::validation, "edited_target must be present exactly when the task is resolved_edit");
  }
}

std::string task_id_for(std::string_view project_id, std::int64_t origin_line) {
  return std::string(project_id) + "." + std::to_string(origin_line);
}

std::string project_of_task(std::string_view task_id) {
  const auto dot = task_id.rfind('.');
  if (dot == std::string_view::npos || dot == 0) {
    throw Error(ErrorCode::not_found, "no task '" + std::string(task_id) + "'");
  }
  return std::string(task_id.substr(0, dot));
}

std::vector<ReviewTask> create_review_tasks(std::span<SentencePair> pairs, const PricingTable& pricing,
                                            std::string_view project_id) {
  validate(pricing);
  for (const auto& pair : pairs) {
    if (!pair.level) {
      throw Error(ErrorCode::validation, "pair '" + pair.segment_id + "' has no level", {{"id", pair.segment_id}});
    }
    if (pair.status == PairStatus::pending_review || pair.status == PairStatus::in_review) {
      throw Error(ErrorCode::conflict, "pair '" + pair.segment_id + "' already has a live review task",
                  {{"id", pair.segment_id}});
    }
    if (pair.status != PairStatus::draft) {
      throw Error(ErrorCode::state, "pair '" + pair.segment_id + "' is no longer a draft", {{"id", pair.segment_id}});
    }
  }
  std::vector<ReviewTask> tasks;
  for (auto& pair : pairs) {
    if (*pair.level == QualityLevel::high) {
      pair.status = PairStatus::auto_accepted;
      continue;
    }
    pair.status = PairStatus::pending_review;
    ReviewTask task;
    task.task_id = task_id_for(project_id, pair.origin_line);
    task.project_id = std::string(project_id);
    task.pair_id = pair.segment_id;
    task.level = *pair.level;
    task.price = pricing.price_for(*pair.level);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

ReviewTask apply_action(const ReviewTask& task, TaskAction action, const std::optional<std::string>& edited_target,
                        const std::optional<std::string>& assignee) {
  const auto next = next_task_state(task.state, action);
  if (!next) {
    throw Error(ErrorCode::state,
                "cannot " + std::string(to_string(action)) + " a task in state " + std::string(to_string(task.state)),
                {{"state", to_string(task.state)}, {"action", to_string(action)}});
  }
  ReviewTask out = task;
  out.state = *next;
  switch (action) {
    case TaskAction::claim:
      out.assignee = assignee;
      break;
    case TaskAction::release:
      out.assignee.reset();
      break;
    case TaskAction::edit:
      if (!edited_target || text::trim(*edited_target).empty()) {
        throw Error(ErrorCode::validation, "edit requires a non-empty edited_target");
      }
      out.edited_target = edited_target;
      break;
    case TaskAction::accept:
    case TaskAction::reject:
      break;
  }
  return out;
}

void to_json(json& j, TaskState v) { j = to_string(v); }
void from_json(const json& j, TaskState& v) { v = parse_task_state(j.get<std::string>()); }

void to_json(json& j, const CostSummary& v) {
  json counts = json::object();
  json costs = json::object();
  for (QualityLevel level : kLevels) {
    const std::string name(to_string(level));
    counts[name] = v.per_level_counts.count(level) ? v.per_level_counts.at(level) : 0;
    costs[name] = v.per_level_cost.count(level) ? v.per_level_cost.at(level).value : 0;
  }
  j = {{"per_level_counts", counts},
       {"per_level_cost", costs},
       {"total_editing_cost", v.total_editing_cost},
       {"from_scratch_cost", v.from_scratch_cost},
       {"estimated_savings", v.estimated_savings}};
}

void from_json(const json& j, CostSummary& v) {
  v = CostSummary{};
  for (const auto& [name, count] : j.at("per_level_counts").items()) {
    v.per_level_counts[parse_quality_level(name)] = count.get<std::int64_t>();
  }
  for (const auto& [name, cost] : j.at("per_level_cost").items()) {
    v.per_level_cost[parse_quality_level(name)] = cost.get<MinorUnits>();
  }
  v.total_editing_cost = j.at("total_editing_cost").get<MinorUnits>();
  v.from_scratch_cost = j.at("from_scratch_cost").get<MinorUnits>();
  v.estimated_savings = j.at("estimated_savings").get<MinorUnits>();
}

void to_json(json& j, const ReviewTask& v) {
  j = {{"task_id", v.task_id},
       {"project_id", v.project_id},
       {"pair_id", v.pair_id},
       {"level", v.level},
       {"price", v.price},
       {"state", v.state},
       {"assignee", v.assignee ? json(*v.assignee) : json(nullptr)},
       {"edited_target", v.edited_target ? json(*v.edited_target) : json(nullptr)},
       {"version", v.version}};
}

void from_json(const json& j, ReviewTask& v) {
  v.task_id = j.at("task_id").get<std::string>();
  v.project_id = j.at("project_id").get<std::string>();
  v.pair_id = j.at("pair_id").get<std::string>();
  v.level = j.at("level").get<QualityLevel>();
  v.price = j.at("price").get<MinorUnits>();
  v.state = j.at("state").get<TaskState>();
  const auto& assignee = j.at("assignee");
  v.assignee = assignee.is_null() ? std::nullopt : std::optional(assignee.get<std::string>());
  const auto& edited = j.at("edited_target");
  v.edited_target = edited.is_null() ? std::nullopt : std::optional(edited.get<std::string>());
  v.version = j.value("version", std::uint64_t{0});
}

}  // namespace corpusforge
