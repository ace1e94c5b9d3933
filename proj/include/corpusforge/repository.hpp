#pragma once

// Typed access to projects, segments, pairs, tasks and reports on top of the
// record store, plus corpus ingestion and dataset export.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/domain.hpp"
#include "corpusforge/report.hpp"
#include "corpusforge/store.hpp"
#include "corpusforge/triage.hpp"

namespace corpusforge {

template <class T>
struct Versioned {
  T value;
  std::uint64_t version = 0;
};

struct ProjectRecord {
  std::string project_id;
  std::string name;
  ProjectConfig config;
  std::string created_at;
  bool corpus_ingested = false;
  std::optional<PipelineReport> last_report;
};

enum class CorpusFormat { txt, jsonl };
enum class ExportFormat { jsonl, tsv };

CorpusFormat parse_corpus_format(std::string_view name);
ExportFormat parse_export_format(std::string_view name);

/// One line of a dataset export.
struct ExportRecord {
  std::string id;
  std::string source;
  std::string target;
  double score = 0.0;
  QualityLevel level = QualityLevel::middle;
  PairStatus status = PairStatus::draft;
  std::map<std::string, double> metrics;
  MinorUnits cost;

  friend bool operator==(const ExportRecord&, const ExportRecord&) = default;
};

std::string render_export_jsonl(std::span<const ExportRecord> records);
std::vector<ExportRecord> parse_export_jsonl(std::string_view payload);
/// Columns: id, source, target, score, level, status. No header.
std::string render_export_tsv(std::span<const ExportRecord> records);

std::set<PairStatus> default_export_statuses();

/// Splits a corpus payload into segments numbered from 1. Blank txt lines are
/// kept (the filter rejects them). Invalid UTF-8 -> Error(format) with the byte
/// offset; a bad jsonl line -> Error(format) with the line number.
std::vector<Segment> parse_corpus(std::string_view project_id, std::string_view payload, CorpusFormat format,
                                  std::string_view lang);

class Repository {
 public:
  explicit Repository(std::shared_ptr<Store> store);

  Store& store() const noexcept { return *store_; }
  const std::shared_ptr<Store>& store_ptr() const noexcept { return store_; }

  static RecordKey project_key(std::string_view project_id);
  static RecordKey segment_key(std::string_view project_id, std::string_view segment_id);
  static RecordKey pair_key(std::string_view project_id, std::string_view pair_id);
  static RecordKey task_key(std::string_view project_id, std::string_view task_id);
  static RecordKey lease_key(std::string_view project_id);
  static RecordKey progress_key(std::string_view project_id);

  /// Throws Error(conflict) if the id is taken.
  ProjectRecord create_project(std::string_view project_id, std::string_view name, const ProjectConfig& config);
  Versioned<ProjectRecord> get_project(std::string_view project_id) const;
  std::optional<Versioned<ProjectRecord>> find_project(std::string_view project_id) const;
  std::vector<ProjectRecord> list_projects() const;

  /// Replaces the corpus; refused with Error(conflict) once a run completed.
  std::int64_t ingest_corpus(std::string_view project_id, std::string_view payload, CorpusFormat format);

  std::vector<Versioned<Segment>> segments(std::string_view project_id) const;      // by origin_line
  std::vector<Versioned<SentencePair>> pairs(std::string_view project_id) const;    // by origin_line
  std::vector<Versioned<ReviewTask>> tasks(std::string_view project_id) const;      // by task id
  Versioned<ReviewTask> get_task(std::string_view task_id) const;
  Versioned<SentencePair> get_pair(std::string_view project_id, std::string_view pair_id) const;

  /// Requires a completed run (Error(state) otherwise). Sorted by origin_line.
  std::vector<ExportRecord> export_records(std::string_view project_id, const std::set<PairStatus>& include) const;
  std::string export_dataset(std::string_view project_id, ExportFormat format,
                             const std::set<PairStatus>& include = default_export_statuses()) const;
  /// The ingested corpus as txt (one text per line) or jsonl ({"id","text"}).
  std::string export_corpus(std::string_view project_id, CorpusFormat format) const;

 private:
  std::shared_ptr<Store> store_;
};

void to_json(json& j, const ProjectRecord& v);
void from_json(const json& j, ProjectRecord& v);

}  // namespace corpusforge
