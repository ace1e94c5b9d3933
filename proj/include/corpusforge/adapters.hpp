#pragma once

// Pluggable stage adapters for GEC, NMT, APE and QE. Every adapter speaks the
// same request/response shape; StageClient adds batching, bounded concurrency,
// one retry on transport failure and response validation on top.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/domain.hpp"

namespace corpusforge {

struct AdapterItem {
  std::string id;
  std::string source_text;
  std::optional<std::string> target_text;  // ape and qe only
};

struct AdapterRequest {
  Stage stage = Stage::gec;
  std::string source_lang;
  std::string target_lang;
  std::vector<AdapterItem> items;
};

struct AdapterResultItem {
  std::string id;
  std::optional<std::string> output_text;  // gec, nmt, ape
  std::optional<double> score;             // qe
};

struct AdapterResponse {
  std::string adapter_id;
  std::vector<AdapterResultItem> items;
};

/// Connection refused, timeouts: retried once.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent responses: never retried.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wire format (JSON over HTTP POST).
json to_wire(const AdapterRequest& request);
AdapterRequest request_from_wire(const json& body);
json to_wire(const AdapterResponse& response);
/// Throws ProtocolError when the body does not match the response shape for `stage`.
AdapterResponse response_from_wire(const json& body, Stage stage);

class StageAdapter {
 public:
  virtual ~StageAdapter() = default;
  virtual std::string adapter_id() const = 0;
  /// Processes one batch. Throws TransportError or ProtocolError.
  virtual AdapterResponse call(const AdapterRequest& request) = 0;
};

// Deterministic reference transforms behind the builtin adapters.

/// Trim, collapse whitespace, drop spaces before . , ! ? ; : and ensure one
/// space after those marks when a letter follows.
std::string builtin_gec(std::string_view sentence);
/// Offline mock translation: reverse token order, keeping a trailing . ! ?
/// in final position.
std::string builtin_nmt(std::string_view sentence);
struct ApeResult {
  std::string text;
  bool changed = false;
};
ApeResult builtin_ape(std::string_view source, std::string_view raw_target);

class BuiltinAdapter final : public StageAdapter {
 public:
  BuiltinAdapter(Stage stage, std::string adapter_id);
  std::string adapter_id() const override { return adapter_id_; }
  AdapterResponse call(const AdapterRequest& request) override;

 private:
  Stage stage_;
  std::string adapter_id_;
};

class RemoteAdapter final : public StageAdapter {
 public:
  /// `binding.kind` must be remote with a valid http endpoint.
  explicit RemoteAdapter(AdapterBinding binding);
  std::string adapter_id() const override { return binding_.adapter_id; }
  AdapterResponse call(const AdapterRequest& request) override;

 private:
  AdapterBinding binding_;
  std::string host_port_;
  std::string path_;
};

using AdapterFactory = std::function<std::shared_ptr<StageAdapter>(const AdapterBinding&)>;

/// Builtin or remote adapter for a binding.
std::shared_ptr<StageAdapter> make_adapter(const AdapterBinding& binding);

/// Shareable handle that runs arbitrarily long item lists through one adapter.
class StageClient {
 public:
  StageClient(AdapterBinding binding, std::shared_ptr<StageAdapter> adapter, std::string source_lang,
              std::string target_lang);

  const AdapterBinding& binding() const noexcept { return binding_; }
  std::string adapter_id() const { return adapter_->adapter_id(); }

  /// Results in input order. A failure in any batch surfaces as
  /// Error(stage_failure) whose details list every unprocessed id.
  std::vector<AdapterResultItem> run(std::span<const AdapterItem> items) const;

 private:
  AdapterResponse call_with_retry(const AdapterRequest& request) const;

  AdapterBinding binding_;
  std::shared_ptr<StageAdapter> adapter_;
  std::string source_lang_;
  std::string target_lang_;
};

struct TextItem {
  std::string id;
  std::string text;
};

struct TextPairItem {
  std::string id;
  std::string source;
  std::string target;
};

// Typed stage calls. Each requires a non-empty batch and returns outputs in
// input order.
std::vector<std::string> gec_correct(std::span<const TextItem> batch, const StageClient& client);
std::vector<std::string> nmt_translate(std::span<const TextItem> batch, const StageClient& client);
std::vector<std::string> ape_edit(std::span<const TextPairItem> batch, const StageClient& client);
std::vector<double> qe_score(std::span<const TextPairItem> batch, const StageClient& client);

}  // namespace corpusforge
