#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "corpusforge/adapters.hpp"
#include "corpusforge/error.hpp"

namespace corpusforge {

/// 1 for validation/format/not_found (and usage errors), 2 for stage_failure,
/// 3 for conflict/state.
int exit_code_for(ErrorCode code) noexcept;

/// Entry point behind the `corpusforge` binary. args[0] is the program name.
/// Subcommands: ingest, run, export, report, serve, preview.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const AdapterFactory& factory = make_adapter);

}  // namespace corpusforge
