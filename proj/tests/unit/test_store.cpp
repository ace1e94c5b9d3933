#include <sys/wait.h>
#include <unistd.h>

#include <barrier>
#include <thread>

#include "corpusforge/store.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace corpusforge;

namespace {

RecordKey key(const std::string& k, const std::string& table = "item") { return {table, "p", k}; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::state;
}

}  // namespace

TEST_CASE("versions and compare-and-set") {
  auto store = Store::in_memory();
  Transaction create;
  create.put(key("a"), {{"n", 1}}, 0);
  CHECK(store->commit(create) == std::vector<std::uint64_t>{1});
  CHECK(code_of([&] { store->commit(create); }) == ErrorCode::conflict);

  CHECK(store->update(key("a"), 1, [](json& j) { j["n"] = 2; }) == 2);
  CHECK(store->get(key("a"))->body["n"] == 2);
  CHECK(code_of([&] { store->update(key("a"), 1, [](json& j) { j["n"] = 3; }); }) == ErrorCode::conflict);
  CHECK(store->get(key("a"))->body["n"] == 2);
  CHECK(code_of([&] { store->update(key("missing"), 1, [](json&) {}); }) == ErrorCode::not_found);

  Transaction erase;
  erase.erase(key("a"), 2);
  CHECK(store->commit(erase) == std::vector<std::uint64_t>{0});
  CHECK_FALSE(store->get(key("a")).has_value());
}

TEST_CASE("multi-record commits are all or nothing") {
  auto store = Store::in_memory();
  Transaction seed;
  seed.put(key("a"), 1, 0).put(key("b"), 1, 0);
  store->commit(seed);
  Transaction txn;
  txn.put(key("a"), 2, 1).put(key("b"), 2, 7);
  CHECK(code_of([&] { store->commit(txn); }) == ErrorCode::conflict);
  CHECK(store->get(key("a"))->body == 1);
  CHECK(store->get(key("a"))->version == 1);

  Transaction chained;
  chained.put(key("c"), 1, 0).put(key("c"), 2, 1);
  CHECK(store->commit(chained) == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("scan is ordered by key and limited to the project") {
  auto store = Store::in_memory();
  Transaction txn;
  txn.put({"t", "p", "b"}, 1, 0).put({"t", "p", "a"}, 2, 0).put({"t", "q", "c"}, 3, 0).put({"u", "p", "d"}, 4, 0);
  store->commit(txn);
  const auto rows = store->scan("t", "p");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].first.key == "a");
  CHECK(rows[1].first.key == "b");
  CHECK(store->scan_table("t").size() == 3);
}

TEST_CASE("durable store reopens with the same records") {
  cftest::TempDir dir;
  std::string before;
  {
    auto store = Store::open(dir.path());
    CHECK(store->durable());
    Transaction txn;
    txn.put(key("a"), {{"score", 0.1 + 0.2}}, 0).put(key("lease", "_lease"), true, 0);
    store->commit(txn);
    store->update(key("a"), 1, [](json& j) { j["x"] = "é한"; });
    before = store->dump("p");
  }
  auto reopened = Store::open(dir.path());
  CHECK(reopened->dump("p") == before);
  CHECK(reopened->get(key("a"))->version == 2);
  CHECK(reopened->get(key("a"))->body["score"].get<double>() == 0.1 + 0.2);
  CHECK_FALSE(reopened->get(key("lease", "_lease")).has_value());
}

TEST_CASE("a second opener is refused") {
  cftest::TempDir dir;
  auto store = Store::open(dir.path());
  CHECK(code_of([&] { Store::open(dir.path()); }) == ErrorCode::conflict);
}

TEST_CASE("a committed mutation survives a crash") {
  cftest::TempDir dir;
  const pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    auto store = Store::open(dir.path());
    Transaction txn;
    txn.put(key("a"), "committed", 0);
    store->commit(txn);
    _exit(0);  // no destructors, no flush beyond what commit did
  }
  int status = 0;
  waitpid(pid, &status, 0);
  REQUIRE(WIFEXITED(status));
  auto store = Store::open(dir.path());
  REQUIRE(store->get(key("a")).has_value());
  CHECK(store->get(key("a"))->body == "committed");
}

TEST_CASE("a torn final line is discarded, other damage is a format error") {
  cftest::TempDir dir;
  {
    auto store = Store::open(dir.path());
    Transaction txn;
    txn.put(key("a"), 1, 0);
    store->commit(txn);
  }
  const auto file = dir.path() / Store::kFileName;
  const auto good = cftest::read_file(file);
  cftest::write_file(file, good + R"({"seq":2,"ops":[{"t":"item","p":"p","k":"b","v":1,"d")");
  {
    auto store = Store::open(dir.path());
    CHECK(store->get(key("a")).has_value());
    CHECK_FALSE(store->get(key("b")).has_value());
    Transaction txn;
    txn.put(key("c"), 3, 0);
    store->commit(txn);
  }
  {
    auto store = Store::open(dir.path());
    CHECK(store->get(key("c")).has_value());
  }

  const auto lines = cftest::read_file(file);
  const auto first_nl = lines.find('\n');
  cftest::write_file(file, lines.substr(0, first_nl + 1) + "garbage\n" + lines.substr(first_nl + 1));
  CHECK(code_of([&] { Store::open(dir.path()); }) == ErrorCode::format);

  cftest::write_file(file, R"({"format":"corpusforge-store","format_version":99})" "\n");
  CHECK(code_of([&] { Store::open(dir.path()); }) == ErrorCode::format);
  cftest::write_file(file, "hello\n");
  CHECK(code_of([&] { Store::open(dir.path()); }) == ErrorCode::format);
}

TEST_CASE("compaction keeps the state") {
  cftest::TempDir dir;
  std::string before;
  {
    auto store = Store::open(dir.path());
    Transaction txn;
    txn.put(key("a"), 0, 0);
    store->commit(txn);
    for (std::uint64_t v = 1; v <= 50; ++v) store->update(key("a"), v, [v](json& j) { j = v; });
    CHECK(store->journal_entries() == 51);
    before = store->dump("p");
    store->compact();
    CHECK(store->journal_entries() == 1);
    CHECK(store->dump("p") == before);
    store->update(key("a"), 51, [](json& j) { j = "after"; });
  }
  auto store = Store::open(dir.path());
  CHECK(store->get(key("a"))->body == "after");
  CHECK(store->get(key("a"))->version == 52);
}

TEST_CASE("concurrent compare-and-set writers lose no updates") {
  auto store = Store::in_memory();
  Transaction txn;
  txn.put(key("counter"), 0, 0);
  store->commit(txn);
  constexpr int kThreads = 4;
  constexpr int kIncrements = 200;
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < kThreads; ++t) {
      threads.emplace_back([&] {
        for (int i = 0; i < kIncrements;) {
          const auto current = store->get(key("counter"));
          try {
            store->update(key("counter"), current->version, [](json& j) { j = j.get<int>() + 1; });
            ++i;
          } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::conflict);
          }
        }
      });
    }
  }
  CHECK(store->get(key("counter"))->body == kThreads * kIncrements);
  CHECK(store->get(key("counter"))->version == 1 + kThreads * kIncrements);
}

TEST_CASE("two barrier-synchronized writers on one version: exactly one wins") {
  for (int round = 0; round < 50; ++round) {
    auto store = Store::in_memory();
    Transaction txn;
    txn.put(key("task"), "pending", 0);
    store->commit(txn);
    std::barrier sync(2);
    std::atomic<int> wins{0}, conflicts{0};
    {
      std::vector<std::jthread> threads;
      for (int t = 0; t < 2; ++t) {
        threads.emplace_back([&, t] {
          sync.arrive_and_wait();
          try {
            store->update(key("task"), 1, [t](json& j) { j = "claimed by " + std::to_string(t); });
            ++wins;
          } catch (const Error& e) {
            if (e.code() == ErrorCode::conflict) ++conflicts;
          }
        });
      }
    }
    CHECK(wins == 1);
    CHECK(conflicts == 1);
  }
}
