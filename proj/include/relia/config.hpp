#pragma once

#include "relia/evaluation.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace relia {

inline constexpr int kConfigSchemaVersion = 1;

/// Everything a CLI run needs, validated up front so that no oracle is
/// queried before the whole document has been checked.
struct RunConfig {
    ExperimentConfig experiment;
    std::vector<std::size_t> budgets;
    std::vector<double> thresholds;
    std::filesystem::path out = "out";
    /// Normalized document with defaults filled in (without "out"/"workers").
    nlohmann::json normalized;
};

/// Parses and validates a config document. Errors are ValidationError
/// messages of the form "config field '<path>': <problem>".
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// Built-in config for the standard synthetic benchmark.
nlohmann::json benchmark_config();

} // namespace relia
