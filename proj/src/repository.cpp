#include "corpusforge/repository.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "corpusforge/text.hpp"

namespace corpusforge {

namespace {

constexpr std::string_view kProjects = "project";
constexpr std::string_view kSegments = "segment";
constexpr std::string_view kPairs = "pair";
constexpr std::string_view kTasks = "task";

template <class T>
std::vector<Versioned<T>> load_all(const Store& store, std::string_view table, std::string_view project) {
  std::vector<Versioned<T>> out;
  for (auto& [key, record] : store.scan(table, project)) {
    out.push_back({record.body.template get<T>(), record.version});
  }
  return out;
}

std::string export_cell(const std::string& value, const std::string& id) {
  if (value.find_first_of("\t\n\r") != std::string::npos) {
    throw Error(ErrorCode::format, "pair '" + id + "' contains a tab or newline and cannot be written as tsv",
                {{"id", id}});
  }
  return value;
}

}  // namespace

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "txt") return CorpusFormat::txt;
  if (name == "jsonl") return CorpusFormat::jsonl;
  throw Error(ErrorCode::validation, "unknown corpus format '" + std::string(name) + "' (txt|jsonl)");
}

ExportFormat parse_export_format(std::string_view name) {
  if (name == "jsonl") return ExportFormat::jsonl;
  if (name == "tsv") return ExportFormat::tsv;
  throw Error(ErrorCode::validation, "unknown export format '" + std::string(name) + "' (jsonl|tsv)");
}

std::set<PairStatus> default_export_statuses() {
  return {PairStatus::auto_accepted, PairStatus::accepted, PairStatus::edited};
}

std::string render_export_jsonl(std::span<const ExportRecord> records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
    for (const auto& [id, value] : r.metrics) metrics[id] = value;
    nlohmann::ordered_json line;
    line["id"] = r.id;
    line["source"] = r.source;
    line["target"] = r.target;
    line["score"] = r.score;
    line["level"] = to_string(r.level);
    line["status"] = to_string(r.status);
    line["metrics"] = std::move(metrics);
    line["cost"] = r.cost.value;
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<ExportRecord> parse_export_jsonl(std::string_view payload) {
  std::vector<ExportRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < payload.size()) {
    const auto nl = payload.find('\n', pos);
    const auto line = payload.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? payload.size() : nl + 1;
    ++line_no;
    try {
      const auto j = json::parse(line);
      ExportRecord r;
      r.id = j.at("id").get<std::string>();
      r.source = j.at("source").get<std::string>();
      r.target = j.at("target").get<std::string>();
      r.score = j.at("score").get<double>();
      r.level = j.at("level").get<QualityLevel>();
      r.status = j.at("status").get<PairStatus>();
      r.metrics = j.at("metrics").get<std::map<std::string, double>>();
      r.cost = j.at("cost").get<MinorUnits>();
      if (j.size() != 8) throw Error(ErrorCode::format, "unexpected fields");
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::format, "export line " + std::to_string(line_no) + " is malformed: " + e.what(),
                  {{"line", line_no}});
    }
  }
  return out;
}

std::string render_export_tsv(std::span<const ExportRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += export_cell(r.id, r.id) + '\t' + export_cell(r.source, r.id) + '\t' + export_cell(r.target, r.id) + '\t' +
           json(r.score).dump() + '\t' + std::string(to_string(r.level)) + '\t' + std::string(to_string(r.status)) +
           '\n';
  }
  return out;
}

std::vector<Segment> parse_corpus(std::string_view project_id, std::string_view payload, CorpusFormat format,
                                  std::string_view lang) {
  if (const auto bad = text::find_invalid_utf8(payload)) {
    throw Error(ErrorCode::format, "corpus is not valid UTF-8 at byte " + std::to_string(*bad),
                {{"byte_offset", *bad}});
  }
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < payload.size()) {
    const auto nl = payload.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(payload.substr(pos));
      break;
    }
    lines.push_back(payload.substr(pos, nl - pos));
    pos = nl + 1;
  }

  std::vector<Segment> segments;
  segments.reserve(lines.size());
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line_no = static_cast<std::int64_t>(i + 1);
    std::string_view line = lines[i];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    Segment seg;
    seg.lang = std::string(lang);
    seg.origin_line = line_no;
    seg.id = std::string(project_id) + ":" + std::to_string(line_no);
    if (format == CorpusFormat::txt) {
      seg.text = std::string(line);
    } else {
      const auto j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        throw Error(ErrorCode::format, "jsonl line " + std::to_string(line_no) + " is not a JSON object",
                    {{"line", line_no}});
      }
      const auto t = j.find("text");
      if (t == j.end() || !t->is_string()) {
        throw Error(ErrorCode::format, "jsonl line " + std::to_string(line_no) + " lacks a string \"text\"",
                    {{"line", line_no}});
      }
      seg.text = t->get<std::string>();
      if (seg.text.find_first_of("\n\r") != std::string::npos) {
        throw Error(ErrorCode::format, "jsonl line " + std::to_string(line_no) + " text contains a line break",
                    {{"line", line_no}});
      }
      if (const auto id = j.find("id"); id != j.end()) {
        if (!id->is_string() || id->get<std::string>().empty()) {
          throw Error(ErrorCode::format, "jsonl line " + std::to_string(line_no) + " has a non-string or empty id",
                      {{"line", line_no}});
        }
        seg.id = id->get<std::string>();
      }
    }
    if (!ids.insert(seg.id).second) {
      throw Error(ErrorCode::validation, "duplicate segment id '" + seg.id + "'", {{"line", line_no}, {"id", seg.id}});
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

Repository::Repository(std::shared_ptr<Store> store) : store_(std::move(store)) {
  if (!store_) throw Error(ErrorCode::validation, "repository needs a store");
}

RecordKey Repository::project_key(std::string_view project_id) {
  return {std::string(kProjects), std::string(project_id), ""};
}
RecordKey Repository::segment_key(std::string_view project_id, std::string_view segment_id) {
  return {std::string(kSegments), std::string(project_id), std::string(segment_id)};
}
RecordKey Repository::pair_key(std::string_view project_id, std::string_view pair_id) {
  return {std::string(kPairs), std::string(project_id), std::string(pair_id)};
}
RecordKey Repository::task_key(std::string_view project_id, std::string_view task_id) {
  return {std::string(kTasks), std::string(project_id), std::string(task_id)};
}
RecordKey Repository::lease_key(std::string_view project_id) { return {"_lease", std::string(project_id), "run"}; }
RecordKey Repository::progress_key(std::string_view project_id) {
  return {"_progress", std::string(project_id), "run"};
}

ProjectRecord Repository::create_project(std::string_view project_id, std::string_view name,
                                         const ProjectConfig& config) {
  validate_project_id(project_id);
  if (name.empty()) throw Error(ErrorCode::validation, "project name must be non-empty");
  validate(config);
  ProjectRecord record{std::string(project_id), std::string(name), config, utc_now(), false, std::nullopt};
  Transaction txn;
  txn.put(project_key(project_id), json(record), 0);
  try {
    store_->commit(txn);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::conflict) {
      throw Error(ErrorCode::conflict, "project '" + std::string(project_id) + "' already exists",
                  {{"project_id", project_id}});
    }
    throw;
  }
  return record;
}

std::optional<Versioned<ProjectRecord>> Repository::find_project(std::string_view project_id) const {
  const auto record = store_->get(project_key(project_id));
  if (!record) return std::nullopt;
  return Versioned<ProjectRecord>{record->body.get<ProjectRecord>(), record->version};
}

Versioned<ProjectRecord> Repository::get_project(std::string_view project_id) const {
  auto found = find_project(project_id);
  if (!found) {
    throw Error(ErrorCode::not_found, "no project '" + std::string(project_id) + "'", {{"project_id", project_id}});
  }
  return std::move(*found);
}

std::vector<ProjectRecord> Repository::list_projects() const {
  std::vector<ProjectRecord> out;
  for (auto& [key, record] : store_->scan_table(kProjects)) out.push_back(record.body.get<ProjectRecord>());
  return out;
}

std::int64_t Repository::ingest_corpus(std::string_view project_id, std::string_view payload, CorpusFormat format) {
  auto project = get_project(project_id);
  if (project.value.last_report) {
    throw Error(ErrorCode::conflict, "project '" + std::string(project_id) + "' already ran; its corpus is frozen");
  }
  const auto fresh = parse_corpus(project_id, payload, format, project.value.config.source_lang);

  std::unordered_map<std::string, std::uint64_t> existing;
  for (const auto& [key, record] : store_->scan(kSegments, project_id)) existing.emplace(key.key, record.version);

  Transaction txn;
  for (const auto& seg : fresh) {
    const auto it = existing.find(seg.id);
    txn.put(segment_key(project_id, seg.id), json(seg), it == existing.end() ? 0 : it->second);
    if (it != existing.end()) existing.erase(it);
  }
  for (const auto& [id, version] : existing) txn.erase(segment_key(project_id, id), version);
  project.value.corpus_ingested = true;
  txn.put(project_key(project_id), json(project.value), project.version);
  store_->commit(txn);
  return static_cast<std::int64_t>(fresh.size());
}

std::vector<Versioned<Segment>> Repository::segments(std::string_view project_id) const {
  auto out = load_all<Segment>(*store_, kSegments, project_id);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.value.origin_line < b.value.origin_line; });
  return out;
}

std::vector<Versioned<SentencePair>> Repository::pairs(std::string_view project_id) const {
  auto out = load_all<SentencePair>(*store_, kPairs, project_id);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.value.origin_line < b.value.origin_line; });
  return out;
}

std::vector<Versioned<ReviewTask>> Repository::tasks(std::string_view project_id) const {
  auto out = load_all<ReviewTask>(*store_, kTasks, project_id);
  for (auto& t : out) t.value.version = t.version;
  return out;
}

Versioned<ReviewTask> Repository::get_task(std::string_view task_id) const {
  const auto record = store_->get(task_key(project_of_task(task_id), task_id));
  if (!record) throw Error(ErrorCode::not_found, "no task '" + std::string(task_id) + "'", {{"task_id", task_id}});
  auto task = record->body.get<ReviewTask>();
  task.version = record->version;
  return {std::move(task), record->version};
}

Versioned<SentencePair> Repository::get_pair(std::string_view project_id, std::string_view pair_id) const {
  const auto record = store_->get(pair_key(project_id, pair_id));
  if (!record) throw Error(ErrorCode::not_found, "no pair '" + std::string(pair_id) + "'", {{"pair_id", pair_id}});
  return {record->body.get<SentencePair>(), record->version};
}

std::vector<ExportRecord> Repository::export_records(std::string_view project_id,
                                                     const std::set<PairStatus>& include) const {
  const auto project = get_project(project_id);
  if (!project.value.last_report) {
    throw Error(ErrorCode::state, "project '" + std::string(project_id) + "' has no completed run to export");
  }
  const auto& pricing = project.value.config.pricing;
  std::vector<ExportRecord> out;
  for (const auto& [pair, version] : pairs(project_id)) {
    if (!include.count(pair.status) || !pair.score || !pair.level) continue;
    out.push_back({pair.segment_id, pair.source, pair.target, pair.score->final, *pair.level, pair.status,
                   pair.score->metric_scores, pricing.price_for(*pair.level)});
  }
  return out;
}

std::string Repository::export_dataset(std::string_view project_id, ExportFormat format,
                                       const std::set<PairStatus>& include) const {
  const auto records = export_records(project_id, include);
  return format == ExportFormat::jsonl ? render_export_jsonl(records) : render_export_tsv(records);
}

std::string Repository::export_corpus(std::string_view project_id, CorpusFormat format) const {
  get_project(project_id);
  std::string out;
  for (const auto& [seg, version] : segments(project_id)) {
    if (format == CorpusFormat::txt) {
      out += seg.text;
    } else {
      out += json{{"id", seg.id}, {"text", seg.text}}.dump();
    }
    out += '\n';
  }
  return out;
}

void to_json(json& j, const ProjectRecord& v) {
  j = {{"project_id", v.project_id},
       {"name", v.name},
       {"config", v.config},
       {"created_at", v.created_at},
       {"corpus_ingested", v.corpus_ingested},
       {"last_report", v.last_report ? json(*v.last_report) : json(nullptr)}};
}

void from_json(const json& j, ProjectRecord& v) {
  v.project_id = j.at("project_id").get<std::string>();
  v.name = j.at("name").get<std::string>();
  v.config = default_project_config();
  from_json(j.at("config"), v.config);
  v.created_at = j.at("created_at").get<std::string>();
  v.corpus_ingested = j.at("corpus_ingested").get<bool>();
  const auto& report = j.at("last_report");
  v.last_report = report.is_null() ? std::nullopt : std::optional(report.get<PipelineReport>());
}

}  // namespace corpusforge
