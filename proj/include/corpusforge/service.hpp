#pragma once

// HTTP/JSON API over the repository, plus static assets for the review UI.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "corpusforge/adapters.hpp"
#include "corpusforge/domain.hpp"
#include "corpusforge/store.hpp"

namespace corpusforge {

inline constexpr const char* kVersion = "0.1.0";

struct ServiceOptions {
  // When non-empty, POST endpoints require "Authorization: Bearer <token>".
  std::string token;
  // Static assets served at "/"; a placeholder page when absent.
  std::optional<std::filesystem::path> ui_dir;
  // Used for projects created without an explicit config.
  ProjectConfig default_config = default_project_config();
  AdapterFactory factory = make_adapter;
};

class Service {
 public:
  Service(std::shared_ptr<Store> store, ServiceOptions options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the bound
  /// port or throws Error(state) when the address is unavailable.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Requires a successful bind().
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace corpusforge
