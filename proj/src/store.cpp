#include "corpusforge/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

namespace corpusforge {

namespace {

using nlohmann::json;

bool ephemeral(std::string_view table) noexcept { return !table.empty() && table.front() == '_'; }

json header_json() { return {{"format", "corpusforge-store"}, {"format_version", Store::kFormatVersion}}; }

json op_json(const RecordKey& key, std::uint64_t version, const std::optional<json>& body) {
  return {{"t", key.table}, {"p", key.project}, {"k", key.key}, {"v", version}, {"d", body ? *body : json(nullptr)}};
}

[[noreturn]] void io_failure(const std::string& what) {
  throw Error(ErrorCode::state, what + ": " + std::strerror(errno));
}

void write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_failure("journal write failed");
    }
    off += static_cast<std::size_t>(n);
  }
}

void sync_directory(const std::filesystem::path& dir) {
  const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

int open_locked(const std::filesystem::path& file, int extra_flags) {
  const int fd = ::open(file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC | extra_flags, 0644);
  if (fd < 0) io_failure("cannot open store file " + file.string());
  if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd);
    throw Error(ErrorCode::conflict, "store file " + file.string() + " is in use by another process");
  }
  return fd;
}

}  // namespace

Transaction& Transaction::put(RecordKey key, json body, std::uint64_t expected_version) {
  ops_.push_back({std::move(key), std::move(body), expected_version});
  return *this;
}

Transaction& Transaction::erase(RecordKey key, std::uint64_t expected_version) {
  ops_.push_back({std::move(key), std::nullopt, expected_version});
  return *this;
}

std::shared_ptr<Store> Store::in_memory() { return std::shared_ptr<Store>(new Store()); }

std::shared_ptr<Store> Store::open(const std::filesystem::path& data_dir) {
  std::error_code ec;
  std::filesystem::create_directories(data_dir, ec);
  if (ec) throw Error(ErrorCode::state, "cannot create data dir " + data_dir.string() + ": " + ec.message());
  auto store = std::shared_ptr<Store>(new Store());
  store->file_ = data_dir / kFileName;
  store->fd_ = open_locked(store->file_, 0);
  store->load();
  return store;
}

Store::~Store() {
  if (fd_ >= 0) ::close(fd_);
}

void Store::load() {
  std::ifstream in(file_, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();

  if (content.empty()) {
    append_line(header_json().dump());
    journal_entries_ = 0;
    return;
  }

  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::size_t good_end = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    const bool complete = nl != std::string::npos;
    const std::string_view line(content.data() + pos, (complete ? nl : content.size()) - pos);
    const std::size_t next = complete ? nl + 1 : content.size();
    ++line_no;
    json parsed = json::parse(line, nullptr, false);
    if (!complete || parsed.is_discarded()) {
      if (next >= content.size() && line_no > 1) break;  // torn tail of an interrupted append
      throw Error(ErrorCode::format, "store journal is corrupt at line " + std::to_string(line_no),
                  {{"line", line_no}});
    }
    if (line_no == 1) {
      if (parsed.value("format", "") != "corpusforge-store") {
        throw Error(ErrorCode::format, file_.string() + " is not a corpusforge store");
      }
      if (parsed.value("format_version", 0) != kFormatVersion) {
        throw Error(ErrorCode::format, "unsupported store format version",
                    {{"found", parsed.value("format_version", 0)}, {"expected", kFormatVersion}});
      }
    } else {
      try {
        seq_ = parsed.at("seq").get<std::uint64_t>();
        for (const auto& op : parsed.at("ops")) {
          RecordKey key{op.at("t").get<std::string>(), op.at("p").get<std::string>(), op.at("k").get<std::string>()};
          if (op.at("d").is_null()) {
            records_.erase(key);
          } else {
            records_[key] = Record{op.at("v").get<std::uint64_t>(), op.at("d")};
          }
        }
      } catch (const json::exception& e) {
        throw Error(ErrorCode::format, "store journal line " + std::to_string(line_no) + " is malformed: " + e.what());
      }
      ++journal_entries_;
    }
    good_end = next;
    pos = next;
  }
  if (good_end < content.size()) {
    if (::ftruncate(fd_, static_cast<off_t>(good_end)) != 0) io_failure("cannot truncate torn journal tail");
  }
  if (journal_entries_ > 1000 && journal_entries_ > 4 * (records_.size() + 1)) compact();
}

void Store::append_line(const std::string& line) {
  if (fd_ < 0) return;
  if (::lseek(fd_, 0, SEEK_END) < 0) io_failure("journal seek failed");
  write_all(fd_, line + "\n");
  if (::fdatasync(fd_) != 0) io_failure("journal fsync failed");
}

std::optional<Record> Store::get(const RecordKey& key) const {
  std::shared_lock lock(mutex_);
  const auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::pair<RecordKey, Record>> Store::scan(std::string_view table, std::string_view project) const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<RecordKey, Record>> out;
  const RecordKey first{std::string(table), std::string(project), ""};
  for (auto it = records_.lower_bound(first); it != records_.end(); ++it) {
    if (it->first.table != table || it->first.project != project) break;
    out.emplace_back(it->first, it->second);
  }
  return out;
}

std::vector<std::pair<RecordKey, Record>> Store::scan_table(std::string_view table) const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<RecordKey, Record>> out;
  for (auto it = records_.lower_bound(RecordKey{std::string(table), "", ""}); it != records_.end(); ++it) {
    if (it->first.table != table) break;
    out.emplace_back(it->first, it->second);
  }
  return out;
}

std::vector<std::uint64_t> Store::commit(const Transaction& txn) {
  std::unique_lock lock(mutex_);

  // Validate against the current state, tracking effects of earlier ops in
  // the same transaction.
  std::map<RecordKey, std::uint64_t> pending;
  std::vector<std::uint64_t> versions;
  versions.reserve(txn.ops_.size());
  for (const auto& op : txn.ops_) {
    std::uint64_t current = 0;
    if (const auto p = pending.find(op.key); p != pending.end()) {
      current = p->second;
    } else if (const auto r = records_.find(op.key); r != records_.end()) {
      current = r->second.version;
    }
    const auto describe = [&] { return op.key.table + " '" + op.key.project + "/" + op.key.key + "'"; };
    if (current == 0 && op.expected_version != 0) {
      throw Error(ErrorCode::not_found, describe() + " does not exist", {{"table", op.key.table}, {"key", op.key.key}});
    }
    if (current != op.expected_version) {
      throw Error(ErrorCode::conflict, describe() + " changed concurrently",
                  {{"table", op.key.table},
                   {"key", op.key.key},
                   {"expected_version", op.expected_version},
                   {"current_version", current}});
    }
    const std::uint64_t next = op.body ? current + 1 : 0;
    pending[op.key] = next;
    versions.push_back(next);
  }

  json ops = json::array();
  for (std::size_t i = 0; i < txn.ops_.size(); ++i) {
    const auto& op = txn.ops_[i];
    if (!ephemeral(op.key.table)) ops.push_back(op_json(op.key, versions[i], op.body));
  }
  if (!ops.empty() && fd_ >= 0) {
    append_line(json{{"seq", seq_ + 1}, {"ops", ops}}.dump());
    ++seq_;
    ++journal_entries_;
  }

  for (std::size_t i = 0; i < txn.ops_.size(); ++i) {
    const auto& op = txn.ops_[i];
    if (op.body) {
      records_[op.key] = Record{versions[i], *op.body};
    } else {
      records_.erase(op.key);
    }
  }
  return versions;
}

std::uint64_t Store::update(const RecordKey& key, std::uint64_t expected_version,
                            const std::function<void(json&)>& mutation) {
  auto current = get(key);
  if (!current) throw Error(ErrorCode::not_found, key.table + " '" + key.key + "' does not exist");
  if (current->version != expected_version) {
    throw Error(ErrorCode::conflict, key.table + " '" + key.key + "' changed concurrently",
                {{"expected_version", expected_version}, {"current_version", current->version}});
  }
  mutation(current->body);
  Transaction txn;
  txn.put(key, std::move(current->body), expected_version);
  return commit(txn).front();
}

std::string Store::dump(std::string_view project) const {
  std::shared_lock lock(mutex_);
  std::string out;
  for (const auto& [key, record] : records_) {
    if (key.project != project || ephemeral(key.table)) continue;
    out += key.table;
    out += '\t';
    out += key.key;
    out += '\t';
    out += std::to_string(record.version);
    out += '\t';
    out += record.body.dump();
    out += '\n';
  }
  return out;
}

void Store::compact() {
  if (fd_ < 0) return;
  std::unique_lock lock(mutex_);
  const auto tmp = std::filesystem::path(file_.string() + ".compact");
  const int fd = open_locked(tmp, O_TRUNC);
  json ops = json::array();
  for (const auto& [key, record] : records_) {
    if (!ephemeral(key.table)) ops.push_back(op_json(key, record.version, record.body));
  }
  try {
    write_all(fd, header_json().dump() + "\n");
    write_all(fd, json{{"seq", seq_}, {"ops", ops}}.dump() + "\n");
    if (::fsync(fd) != 0) io_failure("snapshot fsync failed");
  } catch (...) {
    ::close(fd);
    throw;
  }
  if (::rename(tmp.c_str(), file_.c_str()) != 0) {
    ::close(fd);
    io_failure("snapshot rename failed");
  }
  sync_directory(file_.parent_path());
  ::close(fd_);
  fd_ = fd;
  journal_entries_ = 1;
}

}  // namespace corpusforge
