#pragma once

#include <ostream>

#include "run_config.h"

namespace fracspde::cli {

/// Runs a validated configuration, writing the main CSV (or binary) table to
/// `out`. Side files (kernel cache, summary JSON) go where the config says.
void run(const RunConfig& rc, std::ostream& out);

}  // namespace fracspde::cli
