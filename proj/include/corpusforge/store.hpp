#pragma once

// Embedded record store: versioned JSON records keyed by (table, project, key),
// multi-record compare-and-set commits and an append-only journal file that
// is fsynced before a commit becomes visible.
//
// Tables whose name starts with '_' are ephemeral: kept in memory only, never
// journaled and never part of a dump. Run leases and progress counters live
// there; the exclusive file lock guarantees a single owning process, so they
// cannot outlive it.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/error.hpp"
#include "json.hpp"

namespace corpusforge {

struct RecordKey {
  std::string table;
  std::string project;
  std::string key;

  friend auto operator<=>(const RecordKey&, const RecordKey&) = default;
};

struct Record {
  std::uint64_t version = 0;  // 1 on creation, +1 per update
  nlohmann::json body;
};

class Transaction {
 public:
  /// expected_version 0 means the record must not exist yet.
  Transaction& put(RecordKey key, nlohmann::json body, std::uint64_t expected_version);
  Transaction& erase(RecordKey key, std::uint64_t expected_version);

  bool empty() const noexcept { return ops_.empty(); }
  std::size_t size() const noexcept { return ops_.size(); }

 private:
  friend class Store;
  struct Op {
    RecordKey key;
    std::optional<nlohmann::json> body;  // nullopt = erase
    std::uint64_t expected_version = 0;
  };
  std::vector<Op> ops_;
};

class Store {
 public:
  inline static constexpr int kFormatVersion = 1;
  inline static constexpr const char* kFileName = "corpusforge.db";

  /// Volatile store for tests and one-shot CLI runs.
  static std::shared_ptr<Store> in_memory();
  /// Opens (creating if needed) <data_dir>/corpusforge.db. A torn final
  /// journal line is discarded; any other damage is Error(format). Another
  /// process holding the file is Error(conflict).
  static std::shared_ptr<Store> open(const std::filesystem::path& data_dir);

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;
  ~Store();

  std::optional<Record> get(const RecordKey& key) const;
  /// Records of one table and project, ordered by key.
  std::vector<std::pair<RecordKey, Record>> scan(std::string_view table, std::string_view project) const;
  /// Records of one table across projects.
  std::vector<std::pair<RecordKey, Record>> scan_table(std::string_view table) const;

  /// All-or-nothing. Version mismatch -> Error(conflict); an update or erase of
  /// a missing record -> Error(not_found). Returns the new version per op
  /// (0 for erases).
  std::vector<std::uint64_t> commit(const Transaction& txn);

  /// Compare-and-set read-modify-write of a single existing record.
  std::uint64_t update(const RecordKey& key, std::uint64_t expected_version,
                       const std::function<void(nlohmann::json&)>& mutation);

  /// Canonical, byte-comparable listing of a project's durable records.
  std::string dump(std::string_view project) const;

  /// Rewrites the journal as a single snapshot commit.
  void compact();

  bool durable() const noexcept { return fd_ >= 0; }
  std::size_t journal_entries() const noexcept { return journal_entries_; }

 private:
  Store() = default;
  void load();
  void append_line(const std::string& line);

  mutable std::shared_mutex mutex_;
  std::map<RecordKey, Record> records_;
  std::filesystem::path file_;
  int fd_ = -1;
  std::uint64_t seq_ = 0;
  std::size_t journal_entries_ = 0;
};

}  // namespace corpusforge
