#include "corpusforge/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "corpusforge/pipeline.hpp"
#include "corpusforge/repository.hpp"
#include "corpusforge/service.hpp"

namespace corpusforge {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::validation, "cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Writes through a temporary file so a failed command never leaves a partial output.
void write_file_atomically(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::validation, "cannot write " + path);
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::validation, "cannot write " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::validation, "cannot write " + path + ": " + ec.message());
}

ProjectConfig load_config(const std::string& path) {
  if (path.empty()) return default_project_config();
  const auto body = json::parse(read_file(path), nullptr, false);
  if (body.is_discarded()) throw Error(ErrorCode::validation, "config " + path + " is not valid JSON");
  return parse_project_config(body);
}

std::string resolve_data_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("CORPUSFORGE_DATA_DIR")) return env;
  return {};
}

std::shared_ptr<Store> open_store(const std::string& flag, bool allow_memory) {
  const auto dir = resolve_data_dir(flag);
  if (dir.empty()) {
    if (allow_memory) return Store::in_memory();
    throw Error(ErrorCode::validation, "no data dir: pass --data-dir or set CORPUSFORGE_DATA_DIR");
  }
  return Store::open(dir);
}

CorpusFormat format_for(const std::string& flag, const std::string& input) {
  if (!flag.empty()) return parse_corpus_format(flag);
  return input.size() >= 6 && input.compare(input.size() - 6, 6, ".jsonl") == 0 ? CorpusFormat::jsonl
                                                                                 : CorpusFormat::txt;
}

std::set<PairStatus> parse_statuses(const std::vector<std::string>& names) {
  if (names.empty()) return default_export_statuses();
  std::set<PairStatus> out;
  for (const auto& n : names) out.insert(parse_pair_status(n));
  return out;
}

void ensure_project(Repository& repo, const std::string& project, const std::string& name,
                    const ProjectConfig& config) {
  if (!repo.find_project(project)) repo.create_project(project, name.empty() ? project : name, config);
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::validation:
    case ErrorCode::format:
    case ErrorCode::not_found:
      return 1;
    case ErrorCode::stage_failure:
      return 2;
    case ErrorCode::conflict:
    case ErrorCode::state:
      return 3;
  }
  return 1;
}

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const AdapterFactory& factory) {
  CLI::App app{"Build a reviewed parallel corpus from a monolingual corpus", "corpusforge"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string data_dir, project = "corpus", name, input, input_format, config_path, out_path;
  std::string export_format = "jsonl", stage, bind = "127.0.0.1:8080", ui_dir;
  std::vector<std::string> include;
  std::int64_t sample = 5;

  auto* ingest = app.add_subcommand("ingest", "Create a project if needed and load its corpus");
  ingest->add_option("--data-dir", data_dir, "Store directory (or CORPUSFORGE_DATA_DIR)");
  ingest->add_option("--project", project, "Project id")->required();
  ingest->add_option("--name", name, "Project name for a new project");
  ingest->add_option("--input", input, "Corpus file")->required();
  ingest->add_option("--input-format", input_format, "txt or jsonl (default: by extension)");
  ingest->add_option("--config", config_path, "Project config JSON for a new project");

  auto* run = app.add_subcommand("run", "Ingest, run the pipeline and export in one go");
  run->add_option("--input", input, "Corpus file")->required();
  run->add_option("--input-format", input_format, "txt or jsonl (default: by extension)");
  run->add_option("--config", config_path, "Project config JSON (default: builtin adapters)");
  run->add_option("--out", out_path, "Dataset output file");
  run->add_option("--format", export_format, "jsonl or tsv");
  run->add_option("--include", include, "Statuses to export");
  run->add_option("--data-dir", data_dir, "Store directory (default: in-memory)");
  run->add_option("--project", project, "Project id");

  auto* exp = app.add_subcommand("export", "Export the reviewed dataset");
  exp->add_option("--data-dir", data_dir, "Store directory (or CORPUSFORGE_DATA_DIR)");
  exp->add_option("--project", project, "Project id")->required();
  exp->add_option("--out", out_path, "Output file (default: stdout)");
  exp->add_option("--format", export_format, "jsonl or tsv");
  exp->add_option("--include", include, "Statuses to export");

  auto* report = app.add_subcommand("report", "Print the last pipeline report");
  report->add_option("--data-dir", data_dir, "Store directory (or CORPUSFORGE_DATA_DIR)");
  report->add_option("--project", project, "Project id")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--bind", bind, "host:port");
  serve->add_option("--data-dir", data_dir, "Store directory (or CORPUSFORGE_DATA_DIR)");
  serve->add_option("--config", config_path, "Default project config JSON");
  serve->add_option("--ui-dir", ui_dir, "Static review UI assets");

  auto* preview = app.add_subcommand("preview", "Run one stage on a sample without persisting");
  preview->add_option("--data-dir", data_dir, "Store directory (or CORPUSFORGE_DATA_DIR)");
  preview->add_option("--project", project, "Project id")->required();
  preview->add_option("--stage", stage, "filter, gec, nmt, ape or qe")->required();
  preview->add_option("--n", sample, "Sample size");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) {
      Repository repo(open_store(data_dir, false));
      ensure_project(repo, project, name, load_config(config_path));
      const auto count = repo.ingest_corpus(project, read_file(input), format_for(input_format, input));
      out << json{{"project_id", project}, {"ingested", count}}.dump() << "\n";
    } else if (*run) {
      const auto config = load_config(config_path);
      const auto payload = read_file(input);
      Repository repo(open_store(data_dir, true));
      ensure_project(repo, project, name, config);
      repo.ingest_corpus(project, payload, format_for(input_format, input));
      const auto result = run_pipeline(repo, project, factory);
      if (!out_path.empty()) {
        write_file_atomically(out_path,
                              repo.export_dataset(project, parse_export_format(export_format), parse_statuses(include)));
      }
      out << json(result).dump(2) << "\n";
    } else if (*exp) {
      Repository repo(open_store(data_dir, false));
      const auto data = repo.export_dataset(project, parse_export_format(export_format), parse_statuses(include));
      if (out_path.empty()) {
        out << data;
      } else {
        write_file_atomically(out_path, data);
      }
    } else if (*report) {
      Repository repo(open_store(data_dir, false));
      const auto record = repo.get_project(project);
      if (!record.value.last_report) throw Error(ErrorCode::state, "project '" + project + "' has no report yet");
      out << json(*record.value.last_report).dump(2) << "\n";
    } else if (*preview) {
      Repository repo(open_store(data_dir, false));
      out << json(preview_stage(repo, project, stage, sample, factory)).dump(2) << "\n";
    } else if (*serve) {
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorCode::validation, "--bind must be host:port");
      int port = 0;
      try {
        port = std::stoi(bind.substr(colon + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::validation, "--bind port is not a number");
      }
      ServiceOptions options;
      if (const char* token = std::getenv("CORPUSFORGE_TOKEN")) options.token = token;
      if (!ui_dir.empty()) options.ui_dir = ui_dir;
      options.default_config = load_config(config_path);
      options.factory = factory;
      Service service(open_store(data_dir, false), options);
      const int bound = service.bind(bind.substr(0, colon), port);

      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      std::jthread stopper([&service, signals] {
        int sig = 0;
        sigwait(&signals, &sig);
        service.stop();
      });
      err << "corpusforge " << kVersion << " listening on " << bind.substr(0, colon) << ":" << bound << "\n";
      service.listen();
      pthread_kill(stopper.native_handle(), SIGTERM);
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    if (!e.details().is_null()) err << e.details().dump() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace corpusforge
