#include "corpusforge/error.hpp"

#include <array>
#include <utility>

namespace corpusforge {

namespace {
constexpr std::array<std::pair<ErrorCode, std::string_view>, 6> kNames{{
    {ErrorCode::validation, "validation"},
    {ErrorCode::not_found, "not_found"},
    {ErrorCode::conflict, "conflict"},
    {ErrorCode::state, "state"},
    {ErrorCode::stage_failure, "stage_failure"},
    {ErrorCode::format, "format"},
}};
}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "validation";
}

ErrorCode parse_error_code(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  throw Error(ErrorCode::validation, "unknown error code '" + std::string(name) + "'");
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::validation:
    case ErrorCode::format:
      return 400;
    case ErrorCode::not_found:
      return 404;
    case ErrorCode::conflict:
      return 409;
    case ErrorCode::state:
      return 422;
    case ErrorCode::stage_failure:
      return 502;
  }
  return 500;
}

Error::Error(ErrorCode code, const std::string& message, nlohmann::json details)
    : std::runtime_error(message), code_(code), details_(std::move(details)) {}

nlohmann::json Error::to_json() const {
  nlohmann::json out = {{"code", to_string(code_)}, {"message", what()}};
  if (!details_.is_null()) out["details"] = details_;
  return out;
}

}  // namespace corpusforge
