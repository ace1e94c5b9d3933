#pragma once
// Shared helpers for the unit and acceptance suites.

#include <array>
#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "corpusforge/adapters.hpp"
#include "corpusforge/domain.hpp"

namespace httplib {
class Server;
struct Request;
struct Response;
}  // namespace httplib

namespace cftest {

using corpusforge::json;

std::filesystem::path source_dir();
std::filesystem::path cli_path();
std::filesystem::path sample_corpus_path();

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs a program to completion. `env` entries are added to the inherited
/// environment; an empty value unsets the variable.
ProcessResult run_process(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env = {});

/// Adapter wrapper that fails with a transport error from call number
/// `fail_from_call` (1-based) on, for bindings of `stage`.
struct FaultPlan {
  corpusforge::Stage stage = corpusforge::Stage::gec;
  int fail_from_call = 1;
};

class FaultInjectingFactory {
 public:
  explicit FaultInjectingFactory(std::optional<FaultPlan> plan) : plan_(plan) {}
  corpusforge::AdapterFactory factory();
  int calls(corpusforge::Stage stage) const { return counters_->at(static_cast<int>(stage)).load(); }

 private:
  std::optional<FaultPlan> plan_;
  std::shared_ptr<std::array<std::atomic<int>, 4>> counters_ = std::make_shared<std::array<std::atomic<int>, 4>>();
};

/// Adapter answering every call with a fixed function.
class LambdaAdapter final : public corpusforge::StageAdapter {
 public:
  using Fn = std::function<corpusforge::AdapterResponse(const corpusforge::AdapterRequest&)>;
  LambdaAdapter(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string adapter_id() const override { return id_; }
  corpusforge::AdapterResponse call(const corpusforge::AdapterRequest& request) override { return fn_(request); }

 private:
  std::string id_;
  Fn fn_;
};

/// An httplib server on 127.0.0.1 with a random port, torn down on destruction.
class HttpFixture {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  HttpFixture();
  ~HttpFixture();
  void post(const std::string& path, Handler handler);
  void start();
  int port() const noexcept { return port_; }
  std::string url(const std::string& path) const;

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

/// Validates against a subset of JSON Schema: type, properties, required,
/// additionalProperties, items, enum, const, minimum, maximum, minLength,
/// pattern, minItems, oneOf, anyOf and local $ref. Returns the violations.
class SchemaValidator {
 public:
  explicit SchemaValidator(json root) : root_(std::move(root)) {}
  static SchemaValidator load(const std::filesystem::path& path);
  std::vector<std::string> validate(const json& instance, const std::string& ref) const;

 private:
  void check(const json& schema, const json& instance, const std::string& where,
             std::vector<std::string>& errors) const;
  const json& resolve(const std::string& ref) const;
  json root_;
};

/// Random mono corpus: mixes normal sentences, duplicates, empties, overly
/// long lines, punctuation-only lines and foreign-script lines.
std::string random_corpus(std::mt19937_64& rng, std::size_t lines);

/// Random UTF-8-ish string, including invalid bytes when `allow_invalid`.
std::string random_text(std::mt19937_64& rng, std::size_t max_len, bool allow_invalid);

}  // namespace cftest
