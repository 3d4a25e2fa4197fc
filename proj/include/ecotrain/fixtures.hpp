#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ecotrain/metrics.hpp"

namespace ecotrain {

/// One transcribed table row: a finished run summarized by its final
/// accuracy, total watt-sum and the printed per-run efficiency.
struct FixtureRow {
    std::string model;
    std::string architecture;
    std::size_t size = 0;
    std::size_t epochs = 0;
    double acc = 0.0;
    double watt_sum = 0.0;
    double eff = 0.0;
    /// Non-empty when the printed values are known to be inconsistent.
    std::string anomaly;

    /// Relative gap between acc / watt_sum and the printed eff.
    double round_trip_error() const;
};

struct FixtureTable {
    std::string file;
    std::string task;
    std::string criterion;
    std::vector<FixtureRow> rows;
};

struct PrintedMean {
    std::string task;
    std::string criterion;
    std::string architecture;
    double eff = 0.0;
};

struct OvertrainingFixtureRow {
    std::string task;
    std::string model;
    std::string architecture;
    std::size_t size = 0;
    AccuracyPair short_horizon;
    AccuracyPair long_horizon;
    double printed_a = 0.0;
    double printed_b = 0.0;
};

/// Architecture-level efficiency values for a single criterion.
struct AggregateFixtureRow {
    std::string architecture;
    std::string task;
    std::string criterion;
    double eff = 0.0;
};

struct FixtureSet {
    std::filesystem::path directory;
    std::vector<FixtureTable> tables;
    std::vector<PrintedMean> printed_means;
    std::vector<OvertrainingFixtureRow> overtraining;
    std::vector<AggregateFixtureRow> aggregates;
};

/// Relative tolerance for the acc / watt_sum -> eff round trip: the largest
/// half-unit error of a two-significant-digit mantissa.
inline constexpr double round_trip_tolerance = 0.05;

/// Splits `LeNet-3` into ("LeNet", 3).
std::pair<std::string, std::size_t> split_model_name(const std::string& model);

/// Loads a fixture directory described by its `index.csv`
/// (`file,kind,task,criterion`; kind is runs, means, overtraining or aggregate).
FixtureSet load_fixtures(const std::filesystem::path& directory);

bool is_fixture_directory(const std::filesystem::path& path);

}  // namespace ecotrain
