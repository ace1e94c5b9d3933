#include <random>
#include <set>

#include "corpusforge/filtering.hpp"
#include "corpusforge/repository.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace corpusforge;

namespace {

std::vector<Segment> segments_of(const std::vector<std::string>& texts, const std::string& lang = "en") {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back({"p:" + std::to_string(i + 1), texts[i], lang, static_cast<std::int64_t>(i + 1), std::nullopt});
  }
  return out;
}

std::vector<std::string> texts_of(const std::vector<Segment>& segments) {
  std::vector<std::string> out;
  for (const auto& s : segments) out.push_back(s.text);
  return out;
}

std::int64_t rejected(const FilterReport& r, RejectReason reason) {
  const auto it = r.rejections.find(reason);
  return it == r.rejections.end() ? 0 : it->second;
}

}  // namespace

TEST_CASE("dedup key normalization") {
  CHECK(normalize_for_dedup("Hello   World ") == "hello world");
  CHECK(normalize_for_dedup("") == "");
  CHECK(normalize_for_dedup("A\tB") == "a b");
  CHECK(normalize_for_dedup("Cafe\xCC\x81") == normalize_for_dedup("CAFÉ"));
}

TEST_CASE("duplicates and empties") {
  const auto result = filter_corpus(segments_of({"Hello world.", "Hello world.", ""}), FilterRuleSet{});
  CHECK(texts_of(result.retained) == std::vector<std::string>{"Hello world."});
  CHECK(rejected(result.report, RejectReason::duplicate) == 1);
  CHECK(rejected(result.report, RejectReason::empty) == 1);
  CHECK(result.report.rejected_count() == 2);
  CHECK(result.report.input_count == 3);
  CHECK(result.report.retained_count == 1);
  REQUIRE(result.all.size() == 3);
  CHECK(result.all[1].verdict == FilterVerdict{RejectReason::duplicate});
}

TEST_CASE("each rule names its reason") {
  FilterRuleSet rules;
  rules.max_token_count = 5;
  const auto result = filter_corpus(
      segments_of({"   ", "a", std::string(1500, 'x'), "one two three four five six", "123 456 !!", "Это русский текст.",
                   "Fine sentence here."}),
      rules);
  REQUIRE(result.all.size() == 7);
  CHECK(result.all[0].verdict->rejection == RejectReason::empty);
  CHECK(result.all[1].verdict->rejection == RejectReason::too_short);
  CHECK(result.all[2].verdict->rejection == RejectReason::too_long);
  CHECK(result.all[3].verdict->rejection == RejectReason::too_many_tokens);
  CHECK(result.all[4].verdict->rejection == RejectReason::no_letters);
  CHECK(result.all[5].verdict->rejection == RejectReason::wrong_script);
  CHECK(result.all[6].verdict->retained());
}

TEST_CASE("rule toggles") {
  FilterRuleSet rules;
  rules.dedup = false;
  rules.drop_no_letter = false;
  const auto result = filter_corpus(segments_of({"x y.", "x y.", "12 34"}), rules);
  CHECK(result.retained.size() == 3);
}

TEST_CASE("script rule uses the primary language subtag and skips unknown tags") {
  const auto ko = filter_corpus(segments_of({"한국어 문장입니다.", "This is English."}, "ko-KR"), FilterRuleSet{});
  CHECK(texts_of(ko.retained) == std::vector<std::string>{"한국어 문장입니다."});
  const auto unknown = filter_corpus(segments_of({"한국어 문장입니다.", "This is English."}, "tlh"), FilterRuleSet{});
  CHECK(unknown.retained.size() == 2);
}

TEST_CASE("first occurrence by origin line wins") {
  auto segs = segments_of({"Same text.", "Same  TEXT.", "Other."});
  segs[0].origin_line = 9;
  const auto result = filter_corpus(segs, FilterRuleSet{});
  CHECK(result.all[0].verdict->rejection == RejectReason::duplicate);
  CHECK(result.all[1].verdict->retained());
}

TEST_CASE("duplicate segment ids are rejected") {
  auto segs = segments_of({"a b.", "c d."});
  segs[1].id = segs[0].id;
  CHECK_THROWS_AS(filter_corpus(segs, FilterRuleSet{}), Error);
}

TEST_CASE("filtering properties over random corpora") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 200; ++round) {
    const auto corpus = cftest::random_corpus(rng, round % 60);
    const auto segs = parse_corpus("p", corpus, CorpusFormat::txt, "en");
    const auto first = filter_corpus(segs, FilterRuleSet{});
    const auto& r = first.report;
    CHECK(r.input_count == static_cast<std::int64_t>(segs.size()));
    CHECK(r.input_count == r.retained_count + r.rejected_count());
    CHECK(r.retained_count == static_cast<std::int64_t>(first.retained.size()));

    // Retained is a subsequence of the input with unchanged text.
    std::size_t cursor = 0;
    for (const auto& kept : first.retained) {
      while (cursor < segs.size() && segs[cursor].id != kept.id) ++cursor;
      REQUIRE(cursor < segs.size());
      CHECK(segs[cursor].text == kept.text);
    }
    std::set<std::string> keys;
    for (const auto& kept : first.retained) CHECK(keys.insert(normalize_for_dedup(kept.text)).second);

    const auto second = filter_corpus(first.retained, FilterRuleSet{});
    CHECK(second.report.rejected_count() == 0);
    CHECK(texts_of(second.retained) == texts_of(first.retained));
  }
}

TEST_CASE("filter report json lists every reason") {
  const auto result = filter_corpus(segments_of({""}), FilterRuleSet{});
  const json j = result.report;
  CHECK(j["rejections"].size() == kRejectReasons.size());
  CHECK(j["rejections"]["empty"] == 1);
  CHECK(j.get<FilterReport>() == result.report);
}
