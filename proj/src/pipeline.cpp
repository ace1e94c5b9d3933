#include "corpusforge/pipeline.hpp"

#include <algorithm>
#include <unordered_map>

#include "corpusforge/filtering.hpp"
#include "corpusforge/scoring.hpp"
#include "corpusforge/triage.hpp"

namespace corpusforge {

namespace {

constexpr std::array<QualityLevel, 3> kLevels{QualityLevel::high, QualityLevel::middle, QualityLevel::low};

// Holds the per-project run lease for the duration of a run.
class RunLease {
 public:
  RunLease(Store& store, std::string_view project_id) : store_(store), project_id_(project_id) {
    Transaction txn;
    txn.put(Repository::lease_key(project_id), json{{"started_at", utc_now()}}, 0);
    try {
      store_.commit(txn);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::conflict) throw;
      throw Error(ErrorCode::conflict, "a run is already in progress for project '" + project_id_ + "'",
                  {{"project_id", project_id_}});
    }
  }

  RunLease(const RunLease&) = delete;
  RunLease& operator=(const RunLease&) = delete;

  ~RunLease() {
    try {
      Transaction txn;
      if (const auto p = store_.get(Repository::progress_key(project_id_))) {
        txn.erase(Repository::progress_key(project_id_), p->version);
      }
      if (const auto l = store_.get(Repository::lease_key(project_id_))) {
        txn.erase(Repository::lease_key(project_id_), l->version);
      }
      store_.commit(txn);
    } catch (...) {
    }
  }

  void progress(std::string_view stage, std::int64_t done, std::int64_t total) {
    const auto key = Repository::progress_key(project_id_);
    const auto current = store_.get(key);
    Transaction txn;
    txn.put(key, json{{"stage", stage}, {"done", done}, {"total", total}}, current ? current->version : 0);
    store_.commit(txn);
  }

 private:
  Store& store_;
  std::string project_id_;
};

StageClient client_for(const ProjectConfig& config, Stage stage, const AdapterFactory& factory) {
  const auto& binding = config.adapters.at(stage);
  return StageClient(binding, factory(binding), config.source_lang, config.target_lang);
}

std::vector<std::string> missing_before(std::string_view stage) {
  if (stage == "nmt") return {"gec"};
  if (stage == "ape") return {"gec", "nmt"};
  return {"gec", "nmt", "ape"};
}

}  // namespace

PipelineReport run_pipeline(Repository& repo, std::string_view project_id, const AdapterFactory& factory) {
  const auto project = repo.get_project(project_id);
  if (!project.value.corpus_ingested) {
    throw Error(ErrorCode::state, "project '" + std::string(project_id) + "' has no ingested corpus");
  }
  RunLease lease(repo.store(), project_id);

  PipelineReport report;
  report.project_id = std::string(project_id);
  report.started_at = utc_now();
  const ProjectConfig& config = project.value.config;
  validate(config);
  report.config_fingerprint = config_fingerprint(config);

  const auto stored_segments = repo.segments(project_id);
  const auto stored_pairs = repo.pairs(project_id);
  const auto stored_tasks = repo.tasks(project_id);
  for (const auto& [task, version] : stored_tasks) {
    if (task.state != TaskState::pending) {
      throw Error(ErrorCode::state, "task '" + task.task_id + "' has review work that a re-run would discard",
                  {{"task_id", task.task_id}, {"state", to_string(task.state)}});
    }
  }

  std::vector<Segment> segments;
  segments.reserve(stored_segments.size());
  for (const auto& s : stored_segments) segments.push_back(s.value);
  const auto total = static_cast<std::int64_t>(segments.size());

  lease.progress("filter", 0, total);
  const FilterResult filtered = filter_corpus(segments, config.filter_rules);
  report.filter_report = filtered.report;
  report.stage_counts.ingested = total;
  report.stage_counts.filtered_out = filtered.report.rejected_count();
  const auto& retained = filtered.retained;
  const auto kept = static_cast<std::int64_t>(retained.size());

  // Clients are created even for an empty corpus so that binding errors surface.
  const StageClient gec = client_for(config, Stage::gec, factory);
  const StageClient nmt = client_for(config, Stage::nmt, factory);
  const StageClient ape = client_for(config, Stage::ape, factory);
  const MetricRegistry registry = make_registry(config, factory);
  report.adapter_ids = {{Stage::gec, gec.adapter_id()},
                        {Stage::nmt, nmt.adapter_id()},
                        {Stage::ape, ape.adapter_id()},
                        {Stage::qe, config.adapters.at(Stage::qe).adapter_id}};

  std::vector<SentencePair> pairs(retained.size());
  for (std::size_t i = 0; i < retained.size(); ++i) {
    pairs[i].segment_id = retained[i].id;
    pairs[i].origin_line = retained[i].origin_line;
  }

  if (!retained.empty()) {
    lease.progress("gec", 0, kept);
    std::vector<TextItem> items;
    items.reserve(retained.size());
    for (const auto& s : retained) items.push_back({s.id, s.text});
    const auto corrected = gec_correct(items, gec);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      pairs[i].source = corrected[i];
      const bool changed = corrected[i] != retained[i].text;
      report.stage_counts.gec_changed += changed ? 1 : 0;
      pairs[i].stage_trace.push_back({Stage::gec, gec.adapter_id(), changed});
    }

    lease.progress("nmt", 0, kept);
    for (std::size_t i = 0; i < pairs.size(); ++i) items[i].text = pairs[i].source;
    const auto translated = nmt_translate(items, nmt);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      pairs[i].raw_target = translated[i];
      pairs[i].stage_trace.push_back({Stage::nmt, nmt.adapter_id(), translated[i] != pairs[i].source});
    }
    report.stage_counts.translated = kept;

    lease.progress("ape", 0, kept);
    std::vector<TextPairItem> pair_items;
    pair_items.reserve(pairs.size());
    for (const auto& p : pairs) pair_items.push_back({p.segment_id, p.source, p.raw_target});
    const auto edited = ape_edit(pair_items, ape);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      pairs[i].target = edited[i];
      const bool changed = edited[i] != pairs[i].raw_target;
      report.stage_counts.ape_changed += changed ? 1 : 0;
      pairs[i].stage_trace.push_back({Stage::ape, ape.adapter_id(), changed});
    }

    lease.progress("qe", 0, kept);
    const auto scores = score_pairs(pairs, registry);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      pairs[i].score = scores[i];
      pairs[i].stage_trace.push_back({Stage::qe, report.adapter_ids.at(Stage::qe), false});
    }
  }
  report.stage_counts.scored = static_cast<std::int64_t>(pairs.size());

  lease.progress("triage", 0, kept);
  std::vector<ScoredItem> scored;
  scored.reserve(pairs.size());
  for (const auto& p : pairs) scored.push_back({p.segment_id, p.score->final});
  const auto levels = quantize(scored, config.quantizer);
  for (auto& p : pairs) p.level = levels.at(p.segment_id);
  const auto tasks = create_review_tasks(pairs, config.pricing, project_id);
  report.cost = estimate_cost(levels, config.pricing);
  for (QualityLevel level : kLevels) report.level_histogram[level] = 0;
  for (const auto& [id, level] : levels) ++report.level_histogram[level];
  report.finished_at = utc_now();
  validate(report);

  // One commit: segment verdicts, replaced pairs and tasks, and the report.
  Transaction txn;
  std::unordered_map<std::string, std::uint64_t> segment_versions;
  for (const auto& s : stored_segments) segment_versions.emplace(s.value.id, s.version);
  for (const auto& s : filtered.all) {
    txn.put(Repository::segment_key(project_id, s.id), json(s), segment_versions.at(s.id));
  }

  std::unordered_map<std::string, std::uint64_t> old_pairs;
  for (const auto& p : stored_pairs) old_pairs.emplace(p.value.segment_id, p.version);
  for (const auto& p : pairs) {
    validate(p);
    const auto it = old_pairs.find(p.segment_id);
    txn.put(Repository::pair_key(project_id, p.segment_id), json(p), it == old_pairs.end() ? 0 : it->second);
    if (it != old_pairs.end()) old_pairs.erase(it);
  }
  for (const auto& [id, version] : old_pairs) txn.erase(Repository::pair_key(project_id, id), version);

  std::unordered_map<std::string, std::uint64_t> old_tasks;
  for (const auto& t : stored_tasks) old_tasks.emplace(t.value.task_id, t.version);
  for (auto task : tasks) {
    const auto it = old_tasks.find(task.task_id);
    const std::uint64_t expected = it == old_tasks.end() ? 0 : it->second;
    task.version = expected + 1;
    txn.put(Repository::task_key(project_id, task.task_id), json(task), expected);
    if (it != old_tasks.end()) old_tasks.erase(it);
  }
  for (const auto& [id, version] : old_tasks) txn.erase(Repository::task_key(project_id, id), version);

  auto updated = project.value;
  updated.last_report = report;
  txn.put(Repository::project_key(project_id), json(updated), project.version);
  repo.store().commit(txn);
  return report;
}

std::optional<json> run_progress(const Repository& repo, std::string_view project_id) {
  if (!repo.store().get(Repository::lease_key(project_id))) return std::nullopt;
  const auto progress = repo.store().get(Repository::progress_key(project_id));
  return progress ? progress->body : json{{"stage", "starting"}, {"done", 0}, {"total", 0}};
}

std::vector<PreviewRow> preview_stage(const Repository& repo, std::string_view project_id, std::string_view stage,
                                      std::int64_t sample_size, const AdapterFactory& factory) {
  static constexpr std::array<std::string_view, 5> kStages{"filter", "gec", "nmt", "ape", "qe"};
  if (std::find(kStages.begin(), kStages.end(), stage) == kStages.end()) {
    throw Error(ErrorCode::validation, "unknown preview stage '" + std::string(stage) + "'",
                {{"allowed", kStages}});
  }
  if (sample_size < 1) throw Error(ErrorCode::validation, "sample size must be >= 1");
  const auto n = static_cast<std::size_t>(sample_size);
  const auto project = repo.get_project(project_id);
  const auto& config = project.value.config;

  std::vector<PreviewRow> rows;
  if (stage == "filter" || stage == "gec") {
    std::vector<Segment> segments;
    for (const auto& s : repo.segments(project_id)) segments.push_back(s.value);
    const auto filtered = filter_corpus(segments, config.filter_rules);
    if (stage == "filter") {
      for (std::size_t i = 0; i < std::min(n, filtered.all.size()); ++i) {
        const auto& s = filtered.all[i];
        const auto verdict = s.verdict->retained() ? std::string("retained")
                                                   : "rejected:" + std::string(to_string(*s.verdict->rejection));
        rows.push_back({s.id, s.text, verdict, std::nullopt});
      }
      return rows;
    }
    std::vector<TextItem> items;
    for (std::size_t i = 0; i < std::min(n, filtered.retained.size()); ++i) {
      items.push_back({filtered.retained[i].id, filtered.retained[i].text});
    }
    if (items.empty()) return rows;
    const auto out = gec_correct(items, client_for(config, Stage::gec, factory));
    for (std::size_t i = 0; i < items.size(); ++i) rows.push_back({items[i].id, items[i].text, out[i], std::nullopt});
    return rows;
  }

  if (!project.value.last_report) {
    const auto missing = missing_before(stage);
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw Error(ErrorCode::state,
                "preview of stage '" + std::string(stage) + "' needs output that has not been produced yet: " + names,
                {{"stage", stage}, {"missing_stages", missing}});
  }
  auto stored = repo.pairs(project_id);
  if (stored.size() > n) stored.resize(n);
  if (stored.empty()) return rows;

  if (stage == "nmt") {
    std::vector<TextItem> items;
    for (const auto& p : stored) items.push_back({p.value.segment_id, p.value.source});
    const auto out = nmt_translate(items, client_for(config, Stage::nmt, factory));
    for (std::size_t i = 0; i < items.size(); ++i) rows.push_back({items[i].id, items[i].text, out[i], std::nullopt});
  } else if (stage == "ape") {
    std::vector<TextPairItem> items;
    for (const auto& p : stored) items.push_back({p.value.segment_id, p.value.source, p.value.raw_target});
    const auto out = ape_edit(items, client_for(config, Stage::ape, factory));
    for (std::size_t i = 0; i < items.size(); ++i) rows.push_back({items[i].id, items[i].target, out[i], std::nullopt});
  } else {
    std::vector<SentencePair> pairs;
    for (const auto& p : stored) pairs.push_back(p.value);
    const auto scores = score_pairs(pairs, make_registry(config, factory));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      rows.push_back({pairs[i].segment_id, pairs[i].target, pairs[i].target, scores[i].final});
    }
  }
  return rows;
}

void to_json(json& j, const PreviewRow& v) {
  j = {{"id", v.id}, {"before", v.before}, {"after", v.after}};
  if (v.score) j["score"] = *v.score;
}

// ---- report ----------------------------------------------------------------

void validate(const PipelineReport& r) {
  const auto& c = r.stage_counts;
  if (c.ingested != c.filtered_out + c.scored) {
    throw Error(ErrorCode::validation, "report breaks ingested = filtered_out + scored");
  }
  std::int64_t histogram = 0;
  for (const auto& [level, count] : r.level_histogram) histogram += count;
  if (histogram != c.scored) throw Error(ErrorCode::validation, "report histogram does not sum to scored");
  if (r.filter_report.input_count != r.filter_report.retained_count + r.filter_report.rejected_count()) {
    throw Error(ErrorCode::validation, "filter report breaks input = retained + rejected");
  }
  if (r.cost.total_editing_cost + r.cost.estimated_savings != r.cost.from_scratch_cost) {
    throw Error(ErrorCode::validation, "cost summary breaks savings = from_scratch - editing");
  }
}

void to_json(json& j, const StageCounts& v) {
  j = {{"ingested", v.ingested},       {"filtered_out", v.filtered_out}, {"gec_changed", v.gec_changed},
       {"translated", v.translated},   {"ape_changed", v.ape_changed},   {"scored", v.scored}};
}

void from_json(const json& j, StageCounts& v) {
  v.ingested = j.at("ingested").get<std::int64_t>();
  v.filtered_out = j.at("filtered_out").get<std::int64_t>();
  v.gec_changed = j.at("gec_changed").get<std::int64_t>();
  v.translated = j.at("translated").get<std::int64_t>();
  v.ape_changed = j.at("ape_changed").get<std::int64_t>();
  v.scored = j.at("scored").get<std::int64_t>();
}

void to_json(json& j, const PipelineReport& v) {
  json histogram = json::object();
  for (QualityLevel level : kLevels) {
    histogram[std::string(to_string(level))] = v.level_histogram.count(level) ? v.level_histogram.at(level) : 0;
  }
  json adapters = json::object();
  for (const auto& [stage, id] : v.adapter_ids) adapters[std::string(to_string(stage))] = id;
  j = {{"project_id", v.project_id},
       {"stage_counts", v.stage_counts},
       {"level_histogram", histogram},
       {"cost", v.cost},
       {"adapter_ids", adapters},
       {"started_at", v.started_at},
       {"finished_at", v.finished_at},
       {"config_fingerprint", v.config_fingerprint},
       {"filter_report", v.filter_report}};
}

void from_json(const json& j, PipelineReport& v) {
  v.project_id = j.at("project_id").get<std::string>();
  v.stage_counts = j.at("stage_counts").get<StageCounts>();
  v.level_histogram.clear();
  for (const auto& [name, count] : j.at("level_histogram").items()) {
    v.level_histogram[parse_quality_level(name)] = count.get<std::int64_t>();
  }
  v.cost = j.at("cost").get<CostSummary>();
  v.adapter_ids.clear();
  for (const auto& [name, id] : j.at("adapter_ids").items()) v.adapter_ids[parse_stage(name)] = id.get<std::string>();
  v.started_at = j.at("started_at").get<std::string>();
  v.finished_at = j.at("finished_at").get<std::string>();
  v.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  v.filter_report = j.at("filter_report").get<FilterReport>();
}

}  // namespace corpusforge
