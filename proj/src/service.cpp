#include "corpusforge/service.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>

#include "corpusforge/pipeline.hpp"
#include "corpusforge/repository.hpp"
#include "corpusforge/review.hpp"
#include "httplib.h"

namespace corpusforge {

namespace {

using httplib::Request;
using httplib::Response;

constexpr const char* kJson = "application/json";
constexpr std::int64_t kDefaultPageSize = 50;
constexpr std::int64_t kMaxPageSize = 500;

constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>corpusforge</title></head>"
    "<body><h1>corpusforge</h1><p>The review UI is not installed. The API lives under /api.</p></body></html>";

void send_json(Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(Response& res, const Error& e) { send_json(res, http_status(e.code()), e.to_json()); }

json parse_body(const Request& req) {
  if (req.body.empty()) return json::object();
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded()) throw Error(ErrorCode::validation, "request body is not valid JSON");
  if (!body.is_object()) throw Error(ErrorCode::validation, "request body must be a JSON object");
  return body;
}

std::int64_t int_param(const Request& req, const char* name, std::int64_t fallback) {
  if (!req.has_param(name)) return fallback;
  const auto value = req.get_param_value(name);
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::validation, std::string("query parameter '") + name + "' must be an integer");
  }
  return out;
}

template <class T>
T body_field(const json& body, const char* name) {
  const auto it = body.find(name);
  if (it == body.end()) throw Error(ErrorCode::validation, std::string("missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::validation, std::string("field '") + name + "' has the wrong type");
  }
}

std::optional<std::string> optional_string(const json& body, const char* name) {
  const auto it = body.find(name);
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(ErrorCode::validation, std::string("field '") + name + "' must be a string");
  return it->get<std::string>();
}

json project_view(const ProjectRecord& p) {
  return {{"project_id", p.project_id},
          {"name", p.name},
          {"created_at", p.created_at},
          {"corpus_ingested", p.corpus_ingested},
          {"has_report", p.last_report.has_value()},
          {"config", p.config}};
}

json task_view(const Repository& repo, const ReviewTask& task) {
  json view = task;
  const auto pair = repo.get_pair(task.project_id, task.pair_id).value;
  view["source"] = pair.source;
  view["target"] = pair.target;
  view["raw_target"] = pair.raw_target;
  view["pair_status"] = pair.status;
  view["score"] = pair.score ? json(pair.score->final) : json(nullptr);
  view["metrics"] = pair.score ? json(pair.score->metric_scores) : json::object();
  return view;
}

}  // namespace

struct Service::Impl {
  Impl(std::shared_ptr<Store> store, ServiceOptions opts) : repo(std::move(store)), options(std::move(opts)) {}

  Repository repo;
  ServiceOptions options;
  httplib::Server server;
  std::atomic<bool> bound{false};

  template <class Fn>
  httplib::Server::Handler guarded(Fn fn, bool mutating) {
    return [this, fn, mutating](const Request& req, Response& res) {
      try {
        if (mutating && !options.token.empty()) {
          const auto header = req.get_header_value("Authorization");
          if (header != "Bearer " + options.token) {
            throw Error(ErrorCode::validation, "missing or invalid bearer token", {{"header", "Authorization"}});
          }
        }
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const std::exception& e) {
        send_json(res, 500, {{"code", "state"}, {"message", std::string("internal error: ") + e.what()}});
      }
    };
  }

  void routes() {
    server.Get("/api/health", guarded([](const Request&, Response& res) {
                 send_json(res, 200, {{"status", "ok"}, {"version", kVersion}});
               }, false));

    server.Post("/api/projects", guarded([this](const Request& req, Response& res) {
                  const auto body = parse_body(req);
                  const auto name = body_field<std::string>(body, "name");
                  std::string id;
                  if (const auto given = optional_string(body, "project_id")) {
                    id = *given;
                  } else {
                    id = "p" + std::to_string(repo.list_projects().size() + 1);
                  }
                  ProjectConfig config = options.default_config;
                  if (const auto it = body.find("config"); it != body.end() && !it->is_null()) {
                    config = parse_project_config(*it);
                  }
                  send_json(res, 201, project_view(repo.create_project(id, name, config)));
                }, true));

    server.Get("/api/projects", guarded([this](const Request&, Response& res) {
                 json items = json::array();
                 for (const auto& p : repo.list_projects()) items.push_back(project_view(p));
                 send_json(res, 200, {{"items", items}});
               }, false));

    server.Get(R"(/api/projects/([^/]+))", guarded([this](const Request& req, Response& res) {
                 send_json(res, 200, project_view(repo.get_project(req.matches[1].str()).value));
               }, false));

    server.Post(R"(/api/projects/([^/]+)/corpus)", guarded([this](const Request& req, Response& res) {
                  const std::string id = req.matches[1];
                  CorpusFormat format = CorpusFormat::txt;
                  const auto type = req.get_header_value("Content-Type");
                  if (req.has_param("format")) {
                    format = parse_corpus_format(req.get_param_value("format"));
                  } else if (type.rfind("application/x-ndjson", 0) == 0) {
                    format = CorpusFormat::jsonl;
                  } else if (!type.empty() && type.rfind("text/plain", 0) != 0) {
                    throw Error(ErrorCode::validation, "corpus upload must be text/plain or application/x-ndjson");
                  }
                  const auto count = repo.ingest_corpus(id, req.body, format);
                  send_json(res, 200, {{"project_id", id}, {"ingested", count}});
                }, true));

    server.Post(R"(/api/projects/([^/]+)/run)", guarded([this](const Request& req, Response& res) {
                  send_json(res, 200, run_pipeline(repo, req.matches[1].str(), options.factory));
                }, true));

    server.Get(R"(/api/projects/([^/]+)/report)", guarded([this](const Request& req, Response& res) {
                 const std::string id = req.matches[1];
                 const auto project = repo.get_project(id);
                 if (const auto progress = run_progress(repo, id)) {
                   send_json(res, 200, {{"project_id", id}, {"status", "running"}, {"progress", *progress}});
                   return;
                 }
                 if (!project.value.last_report) {
                   throw Error(ErrorCode::not_found, "project '" + id + "' has no report yet");
                 }
                 send_json(res, 200, *project.value.last_report);
               }, false));

    server.Get(R"(/api/projects/([^/]+)/preview)", guarded([this](const Request& req, Response& res) {
                 const std::string id = req.matches[1];
                 if (!req.has_param("stage")) throw Error(ErrorCode::validation, "query parameter 'stage' is required");
                 const auto stage = req.get_param_value("stage");
                 const auto rows = preview_stage(repo, id, stage, int_param(req, "n", 5), options.factory);
                 send_json(res, 200, {{"stage", stage}, {"rows", rows}});
               }, false));

    server.Get(R"(/api/projects/([^/]+)/tasks)", guarded([this](const Request& req, Response& res) {
                 const std::string id = req.matches[1];
                 repo.get_project(id);
                 const auto page = int_param(req, "page", 1);
                 const auto page_size = int_param(req, "page_size", kDefaultPageSize);
                 if (page < 1) throw Error(ErrorCode::validation, "page must be >= 1");
                 if (page_size < 1 || page_size > kMaxPageSize) {
                   throw Error(ErrorCode::validation, "page_size must lie in [1, 500]");
                 }
                 std::optional<QualityLevel> level;
                 std::optional<TaskState> state;
                 if (req.has_param("level") && !req.get_param_value("level").empty()) {
                   level = parse_quality_level(req.get_param_value("level"));
                 }
                 if (req.has_param("state") && !req.get_param_value("state").empty()) {
                   state = parse_task_state(req.get_param_value("state"));
                 }
                 std::vector<ReviewTask> matching;
                 for (const auto& [task, version] : repo.tasks(id)) {
                   if (level && task.level != *level) continue;
                   if (state && task.state != *state) continue;
                   matching.push_back(task);
                 }
                 // Task ids end in the pair's origin line; list in corpus order.
                 const auto line_of = [](const ReviewTask& t) {
                   return std::stoll(t.task_id.substr(t.task_id.rfind('.') + 1));
                 };
                 std::sort(matching.begin(), matching.end(),
                           [&](const ReviewTask& a, const ReviewTask& b) { return line_of(a) < line_of(b); });
                 json items = json::array();
                 const auto begin = static_cast<std::size_t>((page - 1) * page_size);
                 for (std::size_t i = begin; i < matching.size() && i < begin + static_cast<std::size_t>(page_size); ++i) {
                   items.push_back(task_view(repo, matching[i]));
                 }
                 send_json(res, 200,
                           {{"items", items}, {"page", page}, {"page_size", page_size}, {"total", matching.size()}});
               }, false));

    auto task_action = [this](std::optional<TaskAction> fixed) {
      return [this, fixed](const Request& req, Response& res) {
        const auto body = parse_body(req);
        TransitionRequest request;
        request.action = fixed ? *fixed : parse_task_action(body_field<std::string>(body, "action"));
        if (!fixed && request.action != TaskAction::accept && request.action != TaskAction::edit &&
            request.action != TaskAction::reject) {
          throw Error(ErrorCode::validation, "resolve action must be accept, edit or reject");
        }
        request.expected_version = body_field<std::uint64_t>(body, "expected_version");
        request.edited_target = optional_string(body, "edited_target");
        request.assignee = optional_string(body, "assignee");
        const auto task = transition_task(repo, req.matches[1].str(), request, options.factory);
        send_json(res, 200, task_view(repo, task));
      };
    };
    server.Post(R"(/api/tasks/([^/]+)/claim)", guarded(task_action(TaskAction::claim), true));
    server.Post(R"(/api/tasks/([^/]+)/release)", guarded(task_action(TaskAction::release), true));
    server.Post(R"(/api/tasks/([^/]+)/resolve)", guarded(task_action(std::nullopt), true));

    server.Get(R"(/api/projects/([^/]+)/export)", guarded([this](const Request& req, Response& res) {
                 const std::string id = req.matches[1];
                 const auto format = parse_export_format(req.has_param("format") ? req.get_param_value("format") : "jsonl");
                 auto include = default_export_statuses();
                 if (req.has_param("include")) {
                   include.clear();
                   const auto list = req.get_param_value("include");
                   std::size_t pos = 0;
                   while (pos <= list.size()) {
                     const auto comma = std::min(list.find(',', pos), list.size());
                     if (comma > pos) include.insert(parse_pair_status(list.substr(pos, comma - pos)));
                     pos = comma + 1;
                   }
                 }
                 res.status = 200;
                 res.set_content(repo.export_dataset(id, format, include),
                                 format == ExportFormat::jsonl ? "application/x-ndjson" : "text/tab-separated-values");
               }, false));

    if (options.ui_dir && std::filesystem::is_directory(*options.ui_dir)) {
      server.set_mount_point("/", options.ui_dir->string());
    } else {
      server.Get("/", [](const Request&, Response& res) { res.set_content(kPlaceholderPage, "text/html"); });
    }

    server.set_error_handler([](const Request&, Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      const auto code = res.status == 404 ? ErrorCode::not_found : ErrorCode::validation;
      const Error e(code, res.status == 404 ? "no such route" : "bad request");
      res.set_content(e.to_json().dump(), kJson);
      return httplib::Server::HandlerResponse::Handled;
    });
  }
};

Service::Service(std::shared_ptr<Store> store, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(store), std::move(options))) {
  validate(impl_->options.default_config);
  // httplib's defaults add SO_REUSEPORT, which lets a second server share the port.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::state, "cannot bind " + host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::state, "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  return bound;
}

void Service::listen() {
  if (!impl_->bound) throw Error(ErrorCode::state, "service is not bound");
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (impl_) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace corpusforge
