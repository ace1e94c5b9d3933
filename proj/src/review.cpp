#include "corpusforge/review.hpp"

#include "corpusforge/scoring.hpp"

namespace corpusforge {

ReviewTask transition_task(Repository& repo, std::string_view task_id, const TransitionRequest& request,
                           const AdapterFactory& factory) {
  const auto [task, task_version] = repo.get_task(task_id);
  if (task_version != request.expected_version) {
    throw Error(ErrorCode::conflict, "task '" + std::string(task_id) + "' is at version " +
                                         std::to_string(task_version) + ", not " +
                                         std::to_string(request.expected_version),
                {{"task_id", task_id}, {"current_version", task_version}});
  }
  ReviewTask next = apply_action(task, request.action, request.edited_target, request.assignee);

  auto [pair, pair_version] = repo.get_pair(task.project_id, task.pair_id);
  const PairStatus status = pair_status_for(next.state);
  if (!pair_status_transition_allowed(pair.status, status)) {
    throw Error(ErrorCode::state, "pair '" + pair.segment_id + "' cannot move from " +
                                      std::string(to_string(pair.status)) + " to " + std::string(to_string(status)));
  }
  pair.status = status;
  if (request.action == TaskAction::edit) {
    const auto project = repo.get_project(task.project_id);
    pair.target = *next.edited_target;
    pair.score = score_pair(pair, make_registry(project.value.config, factory));
  }
  validate(pair);
  validate(next);

  next.version = task_version + 1;
  Transaction txn;
  txn.put(Repository::task_key(task.project_id, task.task_id), json(next), task_version);
  txn.put(Repository::pair_key(task.project_id, pair.segment_id), json(pair), pair_version);
  next.version = repo.store().commit(txn).front();
  return next;
}

}  // namespace corpusforge
