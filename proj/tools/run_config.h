#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracspde/density_stats.h"

namespace fracspde::cli {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Schema or syntax problem in a run configuration; maps to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  std::vector<std::string> errors_;
};

const std::vector<std::string>& subcommands();

struct RunConfig {
  std::string subcommand;
  json params;               // every key of the subcommand schema, defaults filled
  std::uint64_t master_seed = 1;
  std::string out;           // empty: stdout
  int threads = 1;
  std::string digest;        // over subcommand, params and seed; not threads or out
};

/// Validates `text` (a JSON object, empty means {}) against the schema of
/// `subcommand`. Unknown keys, wrong types and out-of-range values are all
/// collected before throwing ConfigError. `seed` overrides the config's seed.
RunConfig parse_config(const std::string& subcommand, const std::string& text,
                       std::optional<std::uint64_t> seed = std::nullopt);

/// Thread budget: the flag wins over FRACSPDE_THREADS, default 1.
int resolve_threads(std::optional<int> flag);

// Builders from validated parameter maps.
StableParams stable_params(const json& p);
DiffusionCoefficient make_rho(const json& rho);
InitialMeasure make_mu(const json& mu);
ObservableSpec make_observable(const json& obs);

}  // namespace fracspde::cli
