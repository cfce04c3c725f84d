#pragma once

// Runs the experiment named by a RunConfig and writes its artifacts.

#include "sgdlab/config.hpp"

#include <filesystem>
#include <iosfwd>

namespace sgdlab {

/// Writes resolved-config.json, the experiment's reports and runtime.json
/// into `out_dir` (created if missing) and prints a one-line summary to
/// `summary`. Returns 0, or 2 when the invariant suite fails. Library errors
/// propagate as exceptions.
int dispatch(const RunConfig& config, const std::filesystem::path& out_dir, int jobs, std::ostream& summary);

}  // namespace sgdlab
