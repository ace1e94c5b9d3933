#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace corpusforge {

/// Closed set of failure categories shared by the library, the HTTP API and
/// the CLI. Each maps to exactly one HTTP status.
enum class ErrorCode { validation, not_found, conflict, state, stage_failure, format };

std::string_view to_string(ErrorCode code) noexcept;
ErrorCode parse_error_code(std::string_view name);

/// validation/format -> 400, not_found -> 404, conflict -> 409, state -> 422,
/// stage_failure -> 502.
int http_status(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json details = nullptr);

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

  /// {"code": ..., "message": ..., "details": ...?}
  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

}  // namespace corpusforge
