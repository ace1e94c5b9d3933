#include "support.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "httplib.h"

extern char** environ;

namespace cftest {

using namespace corpusforge;

std::filesystem::path source_dir() { return CORPUSFORGE_SOURCE_DIR; }
std::filesystem::path cli_path() { return CORPUSFORGE_CLI_PATH; }
std::filesystem::path sample_corpus_path() { return source_dir() / "data" / "sample_corpus.txt"; }

TempDir::TempDir() {
  std::string pattern = (std::filesystem::temp_directory_path() / "cftest-XXXXXX").string();
  if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

ProcessResult run_process(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env) {
  TempDir scratch;
  const auto out_path = scratch / "stdout";
  const auto err_path = scratch / "stderr";

  std::vector<std::string> env_strings;
  for (char** e = environ; *e; ++e) {
    const std::string entry = *e;
    const auto name = entry.substr(0, entry.find('='));
    if (!env.count(name)) env_strings.push_back(entry);
  }
  for (const auto& [name, value] : env) {
    if (!value.empty()) env_strings.push_back(name + "=" + value);
  }
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::vector<std::string> args = argv;
  std::vector<char*> argp;
  for (auto& s : args) argp.push_back(s.data());
  argp.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    const int out_fd = open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    const int err_fd = open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    dup2(out_fd, STDOUT_FILENO);
    dup2(err_fd, STDERR_FILENO);
    execve(argp[0], argp.data(), envp.data());
    _exit(127);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  ProcessResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_file(out_path);
  result.err = read_file(err_path);
  return result;
}

namespace {

class CountingAdapter final : public StageAdapter {
 public:
  CountingAdapter(std::shared_ptr<StageAdapter> inner, std::atomic<int>& counter, int fail_from)
      : inner_(std::move(inner)), counter_(counter), fail_from_(fail_from) {}
  std::string adapter_id() const override { return inner_->adapter_id(); }
  AdapterResponse call(const AdapterRequest& request) override {
    const int n = ++counter_;
    if (fail_from_ > 0 && n >= fail_from_) throw TransportError("injected fault");
    return inner_->call(request);
  }

 private:
  std::shared_ptr<StageAdapter> inner_;
  std::atomic<int>& counter_;
  int fail_from_;
};

}  // namespace

AdapterFactory FaultInjectingFactory::factory() {
  return [plan = plan_, counters = counters_](const AdapterBinding& binding) -> std::shared_ptr<StageAdapter> {
    const int fail_from = plan && plan->stage == binding.stage ? plan->fail_from_call : 0;
    return std::make_shared<CountingAdapter>(make_adapter(binding), counters->at(static_cast<int>(binding.stage)),
                                             fail_from);
  };
}

HttpFixture::HttpFixture() : server_(std::make_unique<httplib::Server>()) {}

HttpFixture::~HttpFixture() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void HttpFixture::post(const std::string& path, Handler handler) { server_->Post(path, std::move(handler)); }

void HttpFixture::start() {
  port_ = server_->bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw std::runtime_error("cannot bind test server");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

std::string HttpFixture::url(const std::string& path) const {
  return "http://127.0.0.1:" + std::to_string(port_) + path;
}

SchemaValidator SchemaValidator::load(const std::filesystem::path& path) {
  return SchemaValidator(json::parse(read_file(path)));
}

const json& SchemaValidator::resolve(const std::string& ref) const {
  if (ref.rfind("#/", 0) != 0) throw std::runtime_error("unsupported $ref " + ref);
  return root_.at(json::json_pointer(ref.substr(1)));
}

std::vector<std::string> SchemaValidator::validate(const json& instance, const std::string& ref) const {
  std::vector<std::string> errors;
  check(resolve(ref), instance, "$", errors);
  return errors;
}

namespace {

bool has_type(const json& instance, const std::string& type) {
  if (type == "object") return instance.is_object();
  if (type == "array") return instance.is_array();
  if (type == "string") return instance.is_string();
  if (type == "boolean") return instance.is_boolean();
  if (type == "null") return instance.is_null();
  if (type == "number") return instance.is_number();
  if (type == "integer") {
    return instance.is_number_integer() ||
           (instance.is_number_float() && instance.get<double>() == static_cast<double>(instance.get<std::int64_t>()));
  }
  throw std::runtime_error("unknown schema type " + type);
}

}  // namespace

void SchemaValidator::check(const json& schema, const json& instance, const std::string& where,
                            std::vector<std::string>& errors) const {
  if (schema.contains("$ref")) {
    check(resolve(schema["$ref"]), instance, where, errors);
    return;
  }
  if (schema.contains("type")) {
    const auto& type = schema["type"];
    bool ok = false;
    if (type.is_array()) {
      for (const auto& t : type) ok = ok || has_type(instance, t);
    } else {
      ok = has_type(instance, type);
    }
    if (!ok) {
      errors.push_back(where + ": expected type " + type.dump() + ", got " + instance.dump());
      return;
    }
  }
  if (schema.contains("const") && instance != schema["const"]) {
    errors.push_back(where + ": expected " + schema["const"].dump());
  }
  if (schema.contains("enum")) {
    const auto& values = schema["enum"];
    if (std::find(values.begin(), values.end(), instance) == values.end()) {
      errors.push_back(where + ": " + instance.dump() + " not in " + values.dump());
    }
  }
  if (instance.is_number()) {
    const double v = instance.get<double>();
    if (schema.contains("minimum") && v < schema["minimum"].get<double>()) errors.push_back(where + ": below minimum");
    if (schema.contains("maximum") && v > schema["maximum"].get<double>()) errors.push_back(where + ": above maximum");
  }
  if (instance.is_string()) {
    const auto& s = instance.get_ref<const std::string&>();
    if (schema.contains("minLength") && s.size() < schema["minLength"].get<std::size_t>()) {
      errors.push_back(where + ": shorter than minLength");
    }
    if (schema.contains("pattern") && !std::regex_search(s, std::regex(schema["pattern"].get<std::string>()))) {
      errors.push_back(where + ": '" + s + "' does not match " + schema["pattern"].get<std::string>());
    }
  }
  if (instance.is_array()) {
    if (schema.contains("minItems") && instance.size() < schema["minItems"].get<std::size_t>()) {
      errors.push_back(where + ": fewer than minItems");
    }
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < instance.size(); ++i) {
        check(schema["items"], instance[i], where + "[" + std::to_string(i) + "]", errors);
      }
    }
  }
  if (instance.is_object()) {
    const json properties = schema.value("properties", json::object());
    for (const auto& name : schema.value("required", json::array())) {
      if (!instance.contains(name.get<std::string>())) errors.push_back(where + ": missing " + name.dump());
    }
    for (const auto& [name, value] : instance.items()) {
      if (properties.contains(name)) {
        check(properties[name], value, where + "." + name, errors);
      } else if (schema.contains("additionalProperties")) {
        const auto& extra = schema["additionalProperties"];
        if (extra.is_boolean()) {
          if (!extra.get<bool>()) errors.push_back(where + ": unexpected property '" + name + "'");
        } else {
          check(extra, value, where + "." + name, errors);
        }
      }
    }
  }
  for (const char* key : {"oneOf", "anyOf"}) {
    if (!schema.contains(key)) continue;
    int matches = 0;
    for (const auto& option : schema[key]) {
      std::vector<std::string> sub;
      check(option, instance, where, sub);
      if (sub.empty()) ++matches;
    }
    const bool ok = std::string(key) == "oneOf" ? matches == 1 : matches >= 1;
    if (!ok) errors.push_back(where + ": " + std::to_string(matches) + " " + key + " branches match");
  }
}

namespace {

const std::vector<std::string> kWords{"the",   "report", "team",  "quickly", "reviewed", "a",     "new",
                                      "plan",  "city",   "river", "market",  "opened",   "late",  "every",
                                      "small", "office", "shared", "notes",  "bridge",   "sunny", "data"};

std::string random_sentence(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(2, 12);
  std::uniform_int_distribution<std::size_t> word(0, kWords.size() - 1);
  std::string s;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += kWords[word(rng)];
  }
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  static const char* kEnds[] = {".", "!", "?", ""};
  s += kEnds[std::uniform_int_distribution<int>(0, 3)(rng)];
  return s;
}

}  // namespace

std::string random_corpus(std::mt19937_64& rng, std::size_t lines) {
  std::vector<std::string> out;
  std::uniform_int_distribution<int> kind(0, 19);
  for (std::size_t i = 0; i < lines; ++i) {
    const int k = kind(rng);
    if (k == 0) {
      out.emplace_back();
    } else if (k == 1) {
      out.emplace_back(std::string(1200, 'a'));
    } else if (k == 2) {
      out.emplace_back("12345 ... 678");
    } else if (k == 3) {
      out.emplace_back("Это совсем другой язык.");
    } else if (k <= 6 && !out.empty()) {
      out.push_back(out[std::uniform_int_distribution<std::size_t>(0, out.size() - 1)(rng)]);
    } else if (k == 7) {
      out.emplace_back("  " + random_sentence(rng) + " \t ");
    } else if (k == 8) {
      std::string tokens;
      for (int t = 0; t < 160; ++t) tokens += "w ";
      out.push_back(tokens + "end.");
    } else {
      out.push_back(random_sentence(rng));
    }
  }
  std::string corpus;
  for (const auto& line : out) corpus += line + "\n";
  return corpus;
}

std::string random_text(std::mt19937_64& rng, std::size_t max_len, bool allow_invalid) {
  static const std::vector<std::string> kPieces{"a", "Z", " ", "\t", ".", "!", "?", ",", "é", "한", "漢", "Ж",
                                                " ", "　", "😀", "ß", "İ", "0", "\n", "ǅ"};
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> piece(0, kPieces.size() - 1);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> coin(0, 9);
  std::string s;
  const auto n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (allow_invalid && coin(rng) == 0) {
      s.push_back(static_cast<char>(byte(rng)));
    } else {
      s += kPieces[piece(rng)];
    }
  }
  return s;
}

}  // namespace cftest
