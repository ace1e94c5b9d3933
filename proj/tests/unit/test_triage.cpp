#include <algorithm>
#include <random>

#include "corpusforge/triage.hpp"
#include "doctest.h"

using namespace corpusforge;

namespace {

std::vector<ScoredItem> items(const std::vector<std::pair<std::string, double>>& v) {
  std::vector<ScoredItem> out;
  for (const auto& [id, s] : v) out.push_back({id, s});
  return out;
}

QuantizerConfig absolute() {
  QuantizerConfig c;
  c.mode = QuantizerMode::absolute;
  return c;
}

SentencePair leveled(const std::string& id, std::int64_t line, QualityLevel level) {
  SentencePair p;
  p.segment_id = id;
  p.origin_line = line;
  p.score = QualityScore{{{"m", 0.5}}, 0.5};
  p.level = level;
  return p;
}

}  // namespace

TEST_CASE("percentile quantization") {
  const auto levels = quantize(items({{"a", 0.1}, {"b", 0.3}, {"c", 0.5}, {"d", 0.7}, {"e", 0.9}}), QuantizerConfig{});
  CHECK(levels.at("e") == QualityLevel::high);
  CHECK(levels.at("a") == QualityLevel::low);
  CHECK(levels.at("b") == QualityLevel::middle);
  CHECK(levels.at("c") == QualityLevel::middle);
  CHECK(levels.at("d") == QualityLevel::middle);

  const auto three = quantize(items({{"a", 0.1}, {"b", 0.5}, {"c", 0.9}}), QuantizerConfig{});
  for (const auto& [id, level] : three) CHECK(level == QualityLevel::middle);
  CHECK(quantize({}, QuantizerConfig{}).empty());
}

TEST_CASE("ties break by pair id") {
  const auto levels = quantize(items({{"b", 0.5}, {"a", 0.5}, {"c", 0.5}, {"d", 0.5}, {"e", 0.5}}), QuantizerConfig{});
  CHECK(levels.at("a") == QualityLevel::high);
  CHECK(levels.at("e") == QualityLevel::low);
}

TEST_CASE("absolute thresholds use >= for the upper boundary") {
  const auto levels = quantize(items({{"a", 0.80}, {"b", 0.19}, {"c", 0.20}, {"d", 1.0}, {"e", 0.0}}), absolute());
  CHECK(levels.at("a") == QualityLevel::high);
  CHECK(levels.at("b") == QualityLevel::low);
  CHECK(levels.at("c") == QualityLevel::middle);
  CHECK(levels.at("d") == QualityLevel::high);
  CHECK(levels.at("e") == QualityLevel::low);
}

TEST_CASE("quantize input validation") {
  CHECK_THROWS_AS(quantize(items({{"a", 0.1}, {"a", 0.2}}), QuantizerConfig{}), Error);
  CHECK_THROWS_AS(quantize(items({{"a", 1.1}}), QuantizerConfig{}), Error);
}

TEST_CASE("fraction counts are not thrown off by rounding") {
  CHECK(fraction_count(0.29, 100) == 29);
  CHECK(fraction_count(0.2, 5) == 1);
  CHECK(fraction_count(0.2, 3) == 0);
  CHECK(fraction_count(0.5, 7) == 3);
  CHECK(fraction_count(0.0, 10) == 0);
}

TEST_CASE("cost estimate") {
  const auto c = estimate_cost(std::map<QualityLevel, std::int64_t>{{QualityLevel::high, 10}, {QualityLevel::middle, 5},
                                                                    {QualityLevel::low, 2}},
                               PricingTable{});
  CHECK(c.total_editing_cost.value == 1100);
  CHECK(c.from_scratch_cost.value == 8500);
  CHECK(c.estimated_savings.value == 7400);
  CHECK(c.per_level_cost.at(QualityLevel::middle).value == 500);

  const auto zero = estimate_cost(std::map<std::string, QualityLevel>{}, PricingTable{});
  CHECK(zero.total_editing_cost.value == 0);
  CHECK(zero.from_scratch_cost.value == 0);
  CHECK(zero.estimated_savings.value == 0);

  const auto all_high =
      estimate_cost(std::map<std::string, QualityLevel>{{"a", QualityLevel::high}, {"b", QualityLevel::high}},
                    PricingTable{});
  CHECK(all_high.total_editing_cost.value == 0);
  CHECK(json(c).get<CostSummary>() == c);
}

TEST_CASE("review tasks only for middle and low pairs") {
  std::vector<SentencePair> pairs{leveled("p1", 1, QualityLevel::high), leveled("p2", 2, QualityLevel::middle),
                                  leveled("p3", 3, QualityLevel::low)};
  const auto tasks = create_review_tasks(pairs, PricingTable{}, "proj");
  REQUIRE(tasks.size() == 2);
  CHECK(tasks[0].pair_id == "p2");
  CHECK(tasks[0].price.value == 100);
  CHECK(tasks[0].task_id == "proj.2");
  CHECK(tasks[1].pair_id == "p3");
  CHECK(tasks[1].price.value == 300);
  CHECK(pairs[0].status == PairStatus::auto_accepted);
  CHECK(pairs[1].status == PairStatus::pending_review);
  for (const auto& t : tasks) CHECK(t.state == TaskState::pending);

  std::vector<SentencePair> none;
  CHECK(create_review_tasks(none, PricingTable{}, "proj").empty());

  // The middle and low pairs now have live tasks.
  std::span<SentencePair> reviewed(pairs.data() + 1, 2);
  try {
    create_review_tasks(reviewed, PricingTable{}, "proj");
    FAIL("expected conflict");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::conflict);
  }
  CHECK(project_of_task("proj.2") == "proj");
}

TEST_CASE("task prices follow the pricing table") {
  std::mt19937_64 rng(41);
  for (int round = 0; round < 100; ++round) {
    PricingTable pricing;
    pricing.high = MinorUnits{static_cast<std::int64_t>(rng() % 50)};
    pricing.middle = MinorUnits{pricing.high.value + static_cast<std::int64_t>(rng() % 50)};
    pricing.low = MinorUnits{pricing.middle.value + static_cast<std::int64_t>(rng() % 50)};
    pricing.from_scratch = MinorUnits{pricing.low.value + static_cast<std::int64_t>(rng() % 50)};
    std::vector<SentencePair> pairs;
    for (int i = 0; i < 20; ++i) {
      pairs.push_back(leveled("p" + std::to_string(i), i + 1, static_cast<QualityLevel>(rng() % 3)));
    }
    for (const auto& t : create_review_tasks(pairs, pricing, "x")) CHECK(t.price == pricing.price_for(t.level));
  }
}

TEST_CASE("task transitions") {
  ReviewTask t;
  t.task_id = "p.1";
  t.pair_id = "p:1";
  CHECK_THROWS_AS(apply_action(t, TaskAction::accept, std::nullopt, std::nullopt), Error);
  const auto claimed = apply_action(t, TaskAction::claim, std::nullopt, std::string("ana"));
  CHECK(claimed.state == TaskState::in_review);
  CHECK(claimed.assignee == "ana");
  const auto released = apply_action(claimed, TaskAction::release, std::nullopt, std::nullopt);
  CHECK(released.state == TaskState::pending);
  CHECK_FALSE(released.assignee.has_value());
  const auto edited = apply_action(claimed, TaskAction::edit, std::string("fixed target."), std::nullopt);
  CHECK(edited.state == TaskState::resolved_edit);
  CHECK(edited.edited_target == "fixed target.");
  CHECK_NOTHROW(validate(edited));
  try {
    apply_action(claimed, TaskAction::edit, std::string("  "), std::nullopt);
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::validation);
  }
  for (auto action : kTaskActions) CHECK_FALSE(next_task_state(TaskState::resolved_reject, action).has_value());
  CHECK(pair_status_for(TaskState::resolved_edit) == PairStatus::edited);
  CHECK(pair_status_for(TaskState::resolved_reject) == PairStatus::rejected);
  CHECK(pair_status_for(TaskState::in_review) == PairStatus::in_review);
  CHECK(json(edited).get<ReviewTask>() == edited);
}
