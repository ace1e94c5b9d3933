#include "corpusforge/adapters.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <utility>

#include "corpusforge/scoring.hpp"
#include "corpusforge/text.hpp"
#include "httplib.h"

namespace corpusforge {

namespace {

bool is_gec_mark(char32_t c) noexcept {
  return c == U'.' || c == U',' || c == U'!' || c == U'?' || c == U';' || c == U':';
}

bool is_terminal(char c) noexcept { return c == '.' || c == '!' || c == '?'; }

bool needs_target(Stage stage) noexcept { return stage == Stage::ape || stage == Stage::qe; }

[[noreturn]] void protocol(const std::string& message) { throw ProtocolError(message); }

}  // namespace

// ---- reference transforms ---------------------------------------------------

std::string builtin_gec(std::string_view sentence) {
  const auto collapsed = text::decode(text::collapse_whitespace(sentence));

  std::u32string no_space_before;
  no_space_before.reserve(collapsed.size());
  for (std::size_t i = 0; i < collapsed.size(); ++i) {
    if (collapsed[i] == U' ' && i + 1 < collapsed.size() && is_gec_mark(collapsed[i + 1])) continue;
    no_space_before.push_back(collapsed[i]);
  }

  std::u32string out;
  out.reserve(no_space_before.size() + 8);
  for (std::size_t i = 0; i < no_space_before.size(); ++i) {
    out.push_back(no_space_before[i]);
    if (is_gec_mark(no_space_before[i]) && i + 1 < no_space_before.size() && text::is_letter(no_space_before[i + 1])) {
      out.push_back(U' ');
    }
  }
  return text::encode(out);
}

std::string builtin_nmt(std::string_view sentence) {
  auto tokens = text::split_tokens(sentence);
  if (tokens.empty()) return {};
  std::optional<char> mark;
  if (is_terminal(tokens.back().back())) {
    mark = tokens.back().back();
    tokens.back().pop_back();
    if (tokens.back().empty()) tokens.pop_back();
  }
  std::reverse(tokens.begin(), tokens.end());
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  if (mark) out.push_back(*mark);
  return out;
}

ApeResult builtin_ape(std::string_view source, std::string_view raw_target) {
  std::string target = text::collapse_whitespace(raw_target);
  if (target.empty()) return {std::string(source), true};
  const auto source_mark = text::terminal_mark(source);
  if (source_mark && !text::terminal_mark(target)) target.push_back(*source_mark);
  const bool changed = target != raw_target;
  return {std::move(target), changed};
}

// ---- wire format -----------------------------------------------------------

json to_wire(const AdapterRequest& request) {
  json items = json::array();
  for (const auto& item : request.items) {
    json j = {{"id", item.id}, {"source_text", item.source_text}};
    if (needs_target(request.stage)) j["target_text"] = item.target_text.value_or("");
    items.push_back(std::move(j));
  }
  return {{"stage", request.stage},
          {"source_lang", request.source_lang},
          {"target_lang", request.target_lang},
          {"items", std::move(items)}};
}

AdapterRequest request_from_wire(const json& body) {
  try {
    AdapterRequest request;
    request.stage = body.at("stage").get<Stage>();
    request.source_lang = body.at("source_lang").get<std::string>();
    request.target_lang = body.at("target_lang").get<std::string>();
    for (const auto& item : body.at("items")) {
      AdapterItem a;
      a.id = item.at("id").get<std::string>();
      a.source_text = item.at("source_text").get<std::string>();
      if (auto it = item.find("target_text"); it != item.end()) a.target_text = it->get<std::string>();
      request.items.push_back(std::move(a));
    }
    return request;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::validation, std::string("malformed adapter request: ") + e.what());
  }
}

json to_wire(const AdapterResponse& response) {
  json items = json::array();
  for (const auto& item : response.items) {
    json j = {{"id", item.id}};
    if (item.score) j["score"] = *item.score;
    if (item.output_text) j["output_text"] = *item.output_text;
    items.push_back(std::move(j));
  }
  return {{"adapter_id", response.adapter_id}, {"items", std::move(items)}};
}

AdapterResponse response_from_wire(const json& body, Stage stage) {
  if (!body.is_object()) protocol("response body is not a JSON object");
  const auto id = body.find("adapter_id");
  const auto items = body.find("items");
  if (id == body.end() || !id->is_string()) protocol("response lacks a string adapter_id");
  if (items == body.end() || !items->is_array()) protocol("response lacks an items array");
  AdapterResponse response;
  response.adapter_id = id->get<std::string>();
  for (const auto& item : *items) {
    if (!item.is_object() || !item.contains("id") || !item.at("id").is_string()) protocol("response item lacks an id");
    AdapterResultItem out;
    out.id = item.at("id").get<std::string>();
    if (stage == Stage::qe) {
      const auto score = item.find("score");
      if (score == item.end() || !score->is_number()) protocol("qe item '" + out.id + "' lacks a numeric score");
      out.score = score->get<double>();
    } else {
      const auto text = item.find("output_text");
      if (text == item.end() || !text->is_string()) protocol("item '" + out.id + "' lacks output_text");
      out.output_text = text->get<std::string>();
    }
    response.items.push_back(std::move(out));
  }
  return response;
}

// ---- adapters ----------------------------------------------------------------

BuiltinAdapter::BuiltinAdapter(Stage stage, std::string adapter_id)
    : stage_(stage), adapter_id_(std::move(adapter_id)) {}

AdapterResponse BuiltinAdapter::call(const AdapterRequest& request) {
  AdapterResponse response;
  response.adapter_id = adapter_id_;
  response.items.reserve(request.items.size());
  for (const auto& item : request.items) {
    AdapterResultItem out{item.id, std::nullopt, std::nullopt};
    const std::string_view target = item.target_text ? std::string_view(*item.target_text) : std::string_view();
    switch (stage_) {
      case Stage::gec:
        out.output_text = builtin_gec(item.source_text);
        break;
      case Stage::nmt:
        out.output_text = builtin_nmt(item.source_text);
        break;
      case Stage::ape:
        out.output_text = builtin_ape(item.source_text, target).text;
        break;
      case Stage::qe:
        out.score = heuristic_qe(item.source_text, target);
        break;
    }
    response.items.push_back(std::move(out));
  }
  return response;
}

RemoteAdapter::RemoteAdapter(AdapterBinding binding) : binding_(std::move(binding)) {
  validate(binding_);
  if (binding_.kind != AdapterKind::remote) {
    throw Error(ErrorCode::validation, "RemoteAdapter needs a remote binding");
  }
  const std::string_view rest = std::string_view(binding_.endpoint).substr(std::string_view("http://").size());
  const auto slash = rest.find('/');
  host_port_ = "http://" + std::string(rest.substr(0, slash));
  path_ = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
}

AdapterResponse RemoteAdapter::call(const AdapterRequest& request) {
  httplib::Client client(host_port_);
  const auto timeout = std::chrono::milliseconds(binding_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!binding_.bearer_token_env.empty()) {
    if (const char* token = std::getenv(binding_.bearer_token_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  auto res = client.Post(path_, headers, to_wire(request).dump(), "application/json");
  if (!res) throw TransportError("request to " + binding_.endpoint + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) protocol("adapter returned HTTP " + std::to_string(res->status));
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::parse_error& e) {
    protocol(std::string("adapter returned malformed JSON: ") + e.what());
  }
  return response_from_wire(body, request.stage);
}

std::shared_ptr<StageAdapter> make_adapter(const AdapterBinding& binding) {
  validate(binding);
  if (binding.kind == AdapterKind::remote) return std::make_shared<RemoteAdapter>(binding);
  return std::make_shared<BuiltinAdapter>(binding.stage, binding.adapter_id);
}

// ---- client ------------------------------------------------------------------

StageClient::StageClient(AdapterBinding binding, std::shared_ptr<StageAdapter> adapter, std::string source_lang,
                         std::string target_lang)
    : binding_(std::move(binding)),
      adapter_(std::move(adapter)),
      source_lang_(std::move(source_lang)),
      target_lang_(std::move(target_lang)) {
  validate(binding_);
  if (!adapter_) throw Error(ErrorCode::validation, "StageClient needs an adapter");
}

AdapterResponse StageClient::call_with_retry(const AdapterRequest& request) const {
  try {
    return adapter_->call(request);
  } catch (const TransportError&) {
    return adapter_->call(request);
  }
}

std::vector<AdapterResultItem> StageClient::run(std::span<const AdapterItem> items) const {
  const Stage stage = binding_.stage;
  {
    std::unordered_map<std::string_view, int> seen;
    for (const auto& item : items) {
      if (seen[item.id]++ > 0) throw Error(ErrorCode::validation, "duplicate item id '" + item.id + "'");
    }
  }

  const auto batch_size = static_cast<std::size_t>(binding_.max_batch);
  const std::size_t batch_count = (items.size() + batch_size - 1) / batch_size;
  std::vector<std::optional<std::vector<AdapterResultItem>>> done(batch_count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::string first_error;

  auto process = [&](std::size_t b) {
    const auto begin = b * batch_size;
    const auto end = std::min(items.size(), begin + batch_size);
    AdapterRequest request{stage, source_lang_, target_lang_, {items.begin() + begin, items.begin() + end}};
    try {
      auto response = call_with_retry(request);
      if (response.items.size() != request.items.size()) {
        protocol("adapter returned " + std::to_string(response.items.size()) + " items for a batch of " +
                 std::to_string(request.items.size()));
      }
      std::unordered_map<std::string_view, std::size_t> index;
      for (std::size_t i = 0; i < request.items.size(); ++i) index.emplace(request.items[i].id, i);
      std::vector<std::optional<AdapterResultItem>> ordered(request.items.size());
      for (auto& item : response.items) {
        const auto it = index.find(item.id);
        if (it == index.end()) protocol("adapter returned unknown id '" + item.id + "'");
        if (ordered[it->second]) protocol("adapter returned id '" + item.id + "' twice");
        if (stage == Stage::qe) {
          if (!item.score || !std::isfinite(*item.score) || *item.score < 0.0 || *item.score > 1.0) {
            protocol("qe score for id '" + item.id + "' is outside [0,1]");
          }
        } else if (!item.output_text) {
          protocol("item '" + item.id + "' lacks output_text");
        }
        ordered[it->second] = std::move(item);
      }
      std::vector<AdapterResultItem> out;
      out.reserve(ordered.size());
      for (auto& o : ordered) out.push_back(std::move(*o));
      done[b] = std::move(out);
    } catch (const std::exception& e) {
      failed = true;
      std::lock_guard lock(error_mutex);
      if (first_error.empty()) first_error = e.what();
    }
  };

  auto worker = [&] {
    for (std::size_t b = next++; b < batch_count && !failed; b = next++) process(b);
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(binding_.max_in_flight), batch_count);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  }

  if (failed) {
    json failed_ids = json::array();
    for (std::size_t b = 0; b < batch_count; ++b) {
      if (done[b]) continue;
      const auto end = std::min(items.size(), (b + 1) * batch_size);
      for (auto i = b * batch_size; i < end; ++i) failed_ids.push_back(items[i].id);
    }
    throw Error(ErrorCode::stage_failure,
                std::string(to_string(stage)) + " adapter '" + adapter_->adapter_id() + "' failed: " + first_error,
                {{"stage", stage}, {"adapter_id", adapter_->adapter_id()}, {"failed_ids", failed_ids}});
  }

  std::vector<AdapterResultItem> results;
  results.reserve(items.size());
  for (auto& batch : done) {
    for (auto& item : *batch) results.push_back(std::move(item));
  }
  return results;
}

namespace {

void require_stage(const StageClient& client, Stage stage) {
  if (client.binding().stage != stage) {
    throw Error(ErrorCode::validation, "client is bound to stage " + std::string(to_string(client.binding().stage)) +
                                           ", not " + std::string(to_string(stage)));
  }
}

template <class T>
void require_non_empty(std::span<const T> batch) {
  if (batch.empty()) throw Error(ErrorCode::validation, "adapter batch must be non-empty");
}

std::vector<std::string> run_text_stage(std::span<const TextItem> batch, const StageClient& client, Stage stage) {
  require_stage(client, stage);
  require_non_empty(batch);
  std::vector<AdapterItem> items;
  items.reserve(batch.size());
  for (const auto& b : batch) items.push_back({b.id, b.text, std::nullopt});
  std::vector<std::string> out;
  out.reserve(batch.size());
  for (auto& r : client.run(items)) out.push_back(std::move(*r.output_text));
  return out;
}

std::vector<AdapterResultItem> run_pair_stage(std::span<const TextPairItem> batch, const StageClient& client,
                                              Stage stage) {
  require_stage(client, stage);
  require_non_empty(batch);
  std::vector<AdapterItem> items;
  items.reserve(batch.size());
  for (const auto& b : batch) items.push_back({b.id, b.source, b.target});
  return client.run(items);
}

}  // namespace

std::vector<std::string> gec_correct(std::span<const TextItem> batch, const StageClient& client) {
  return run_text_stage(batch, client, Stage::gec);
}

std::vector<std::string> nmt_translate(std::span<const TextItem> batch, const StageClient& client) {
  return run_text_stage(batch, client, Stage::nmt);
}

std::vector<std::string> ape_edit(std::span<const TextPairItem> batch, const StageClient& client) {
  std::vector<std::string> out;
  out.reserve(batch.size());
  for (auto& r : run_pair_stage(batch, client, Stage::ape)) out.push_back(std::move(*r.output_text));
  return out;
}

std::vector<double> qe_score(std::span<const TextPairItem> batch, const StageClient& client) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& r : run_pair_stage(batch, client, Stage::qe)) out.push_back(*r.score);
  return out;
}

}  // namespace corpusforge
