#pragma once

// Store-backed review task transitions.

#include <optional>
#include <string>
#include <string_view>

#include "corpusforge/adapters.hpp"
#include "corpusforge/repository.hpp"
#include "corpusforge/triage.hpp"

namespace corpusforge {

struct TransitionRequest {
  TaskAction action = TaskAction::claim;
  std::uint64_t expected_version = 0;
  std::optional<std::string> edited_target;  // edit only
  std::optional<std::string> assignee;       // claim only
};

/// Applies one review action under optimistic concurrency. The task and its
/// pair are updated in one commit; an edit replaces the pair target and
/// re-scores it with the project's metric registry.
/// Errors: not_found, conflict (stale version), state (illegal transition),
/// validation (empty edit), stage_failure (re-scoring).
ReviewTask transition_task(Repository& repo, std::string_view task_id, const TransitionRequest& request,
                           const AdapterFactory& factory = make_adapter);

}  // namespace corpusforge
