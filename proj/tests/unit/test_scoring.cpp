#include <algorithm>
#include <numeric>
#include <random>

#include "corpusforge/scoring.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace corpusforge;

namespace {

class ConstantMetric final : public Metric {
 public:
  explicit ConstantMetric(double v) : v_(v) {}
  std::vector<double> score(std::span<const TextPairItem> items) const override {
    return std::vector<double>(items.size(), v_);
  }

 private:
  double v_;
};

SentencePair pair_of(const std::string& source, const std::string& target) {
  SentencePair p;
  p.segment_id = "p:1";
  p.source = source;
  p.target = target;
  p.raw_target = target;
  return p;
}

}  // namespace

TEST_CASE("heuristic qe reference values") {
  CHECK(heuristic_qe("the cat sat.", "the cat sat.") == 0.7);
  CHECK(heuristic_qe("the the cat.", "the the cat.") == 0.7);
  CHECK(heuristic_qe("one two three.", "uno dos tres.") == 1.0);
  CHECK(heuristic_qe("Hello.", "") == 0.0);
  CHECK(heuristic_qe("Hello.", "   ") == 0.0);
  // Only the punctuation term differs.
  CHECK(heuristic_qe("a b c.", "x y z!") == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(heuristic_qe("a b c.", "x y z") == doctest::Approx(0.8).epsilon(1e-15));
  // Length penalty saturates at 1: 0.5 left, minus nothing else.
  CHECK(heuristic_qe("a", "p q r s t u v w") == doctest::Approx(0.5));
  // Case-folded overlap: one of two target types copied.
  CHECK(heuristic_qe("The dog", "THE cat") == doctest::Approx(1.0 - 0.3 * 0.5));
}

TEST_CASE("heuristic qe stays in range on arbitrary input") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 2000; ++i) {
    const auto s = cftest::random_text(rng, 30, true);
    const auto t = cftest::random_text(rng, 30, true);
    const double v = heuristic_qe(s, t);
    CHECK((v >= 0.0 && v <= 1.0));
    CHECK(heuristic_qe(s, t) == v);
  }
}

TEST_CASE("punctuation mismatch never raises the score") {
  // Disjoint vocabularies keep the copy rate at 0 whatever the marks are.
  std::mt19937_64 rng(23);
  const std::vector<std::string> src{"a", "b", "c", "d"};
  const std::vector<std::string> tgt{"w", "x", "y", "z"};
  for (int i = 0; i < 500; ++i) {
    std::string s, t;
    for (int k = 0, n = 1 + static_cast<int>(rng() % 6); k < n; ++k) s += (k ? " " : "") + src[rng() % 4];
    for (int k = 0, n = 1 + static_cast<int>(rng() % 6); k < n; ++k) t += (k ? " " : "") + tgt[rng() % 4];
    CHECK(heuristic_qe(s + ".", t + "!") <= heuristic_qe(s + ".", t + "."));
    CHECK(heuristic_qe(s + ".", t) <= heuristic_qe(s + ".", t + "."));
    CHECK(heuristic_qe(s, t + "?") <= heuristic_qe(s, t));
  }
}

TEST_CASE("aggregate is the mean and stays within the metric range") {
  const auto q = aggregate_metrics({{"m1", 0.2}, {"m2", 0.4}, {"m3", 0.9}});
  CHECK(q.final == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(aggregate_metrics({{"m1", 0.7}}).final == 0.7);
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double x = unit(rng);
    CHECK(aggregate_metrics({{"a", x}, {"b", x}, {"c", x}}).final == x);
  }
  CHECK_THROWS_AS(aggregate_metrics({}), Error);
  CHECK_THROWS_AS(aggregate_metrics({{"m", 1.5}}), Error);
  CHECK_THROWS_AS(aggregate_metrics({{"m", -0.1}}), Error);
}

TEST_CASE("registry scoring") {
  MetricRegistry single;
  single.add("heuristic_qe", std::make_shared<HeuristicMetric>());
  const auto q = score_pair(pair_of("the cat sat.", "the cat sat."), single);
  CHECK(q.final == 0.7);
  CHECK(q.metric_scores == std::map<std::string, double>{{"heuristic_qe", 0.7}});

  MetricRegistry constants;
  constants.add("a", std::make_shared<ConstantMetric>(0.5));
  constants.add("b", std::make_shared<ConstantMetric>(0.5));
  constants.add("c", std::make_shared<ConstantMetric>(0.5));
  CHECK(score_pair(pair_of("x.", "y."), constants).final == 0.5);
  CHECK_THROWS_AS(constants.add("a", std::make_shared<ConstantMetric>(0.1)), Error);
  CHECK_THROWS_AS(constants.add("", std::make_shared<ConstantMetric>(0.1)), Error);

  MetricRegistry empty;
  CHECK_THROWS_AS(score_pair(pair_of("x.", "y."), empty), Error);
}

TEST_CASE("registry order does not change the final score") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<std::pair<std::string, double>> metrics{{"pearson", unit(rng)}, {"mae", unit(rng)}, {"rmse", unit(rng)},
                                                        {"heur", -1}};
    MetricRegistry forward, backward;
    for (const auto& [id, v] : metrics) {
      forward.add(id, v < 0 ? std::shared_ptr<const Metric>(std::make_shared<HeuristicMetric>())
                            : std::make_shared<ConstantMetric>(v));
    }
    std::reverse(metrics.begin(), metrics.end());
    for (const auto& [id, v] : metrics) {
      backward.add(id, v < 0 ? std::shared_ptr<const Metric>(std::make_shared<HeuristicMetric>())
                             : std::make_shared<ConstantMetric>(v));
    }
    const auto p = pair_of("one two three.", "tres dos one.");
    CHECK(score_pair(p, forward).final == score_pair(p, backward).final);
  }
}

TEST_CASE("registry from config uses the qe binding by default") {
  const auto registry = make_registry(default_project_config(), make_adapter);
  CHECK(registry.ids() == std::vector<std::string>{"heuristic_qe"});

  auto config = default_project_config();
  for (const char* id : {"pearson", "mae", "rmse"}) config.metrics.push_back({id, builtin_binding(Stage::qe)});
  const auto three = make_registry(config, make_adapter);
  CHECK(three.size() == 3);
  const auto q = score_pair(pair_of("the cat sat.", "the cat sat."), three);
  CHECK(q.metric_scores.size() == 3);
  CHECK(q.final == 0.7);
}

TEST_CASE("a failing metric fails the whole batch") {
  auto config = default_project_config();
  cftest::FaultInjectingFactory faults(cftest::FaultPlan{Stage::qe, 1});
  const auto registry = make_registry(config, faults.factory());
  const std::vector<SentencePair> pairs{pair_of("a b.", "b a.")};
  try {
    score_pairs(pairs, registry);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::stage_failure);
  }
}
