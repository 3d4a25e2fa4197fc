#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecotrain/criteria.hpp"
#include "ecotrain/error.hpp"
#include "ecotrain/metrics.hpp"
#include "ecotrain/telemetry.hpp"

namespace ecotrain {

inline constexpr int config_schema_version = 1;

/// An architecture family. Either one of the bundled trainers (`builtin` is
/// "surrogate" or "tinynet") or an external command; the protocol arguments
/// are appended to `command` at launch.
struct TrainerSpec {
    std::string label;
    std::string builtin;
    std::vector<std::string> command;
};

/// A task label plus the value passed as `--task`. `per_architecture`
/// overrides the argument for specific architecture labels.
struct TaskSpec {
    std::string label;
    std::string arg;
    std::map<std::string, std::string> per_architecture;

    const std::string& arg_for(const std::string& architecture) const;
};

struct ReportOptions {
    /// Criteria averaged into the overall efficiency; empty means all.
    std::vector<std::string> overall_criteria;
    std::map<std::string, double> criterion_weights;
    std::vector<std::string> numerator_order;
    /// Criterion names whose runs supply the short and long horizon of the
    /// overtraining comparison; unset disables the analysis.
    std::string short_horizon;
    std::string long_horizon;
    OvertrainingRule overtraining;
};

struct ExperimentConfig {
    int schema_version = config_schema_version;
    std::vector<TrainerSpec> architectures;
    std::vector<std::size_t> sizes{1, 2, 3, 4, 5};
    std::vector<StoppingCriterion> criteria;
    std::vector<TaskSpec> tasks;
    std::vector<TelemetrySourceConfig> telemetry;
    std::int64_t seed = 0;
    std::filesystem::path output_dir = "ecotrain-out";
    bool deterministic = false;
    std::chrono::milliseconds virtual_epoch{1000};
    std::chrono::milliseconds grace_period{5000};
    std::chrono::milliseconds cell_timeout{0};  // 0: no limit
    std::size_t max_parallel_cells = 1;
    std::filesystem::path trainer_binary;       // for builtin trainers; empty: auto-detect
    ReportOptions report;

    /// Every problem found, in field order. Empty when the config is valid.
    std::vector<ValidationError> check() const;
    /// Throws the first problem found by check().
    void validate() const;
};

/// Builds a config from parsed JSON. Relative paths are resolved against
/// `base_dir`. Unknown keys and wrongly typed values throw ValidationError.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
/// Reads and parses a config file; JSON syntax errors throw ParseError with
/// the offending line.
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);
/// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

struct ConfigOverrides {
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::int64_t> seed;
    std::optional<bool> deterministic;
    std::optional<std::filesystem::path> trainer_binary;
};

/// Reads ECOTRAIN_OUTPUT_DIR, ECOTRAIN_SEED, ECOTRAIN_DETERMINISTIC and
/// ECOTRAIN_TRAINER_BINARY. Malformed values throw ValidationError.
ConfigOverrides overrides_from_env();
void apply_overrides(ExperimentConfig& config, const ConfigOverrides& overrides);

/// Command line for a cell, protocol arguments included.
std::vector<std::string> trainer_command(const ExperimentConfig& config, const TrainerSpec& arch, std::size_t size,
                                         const std::string& task_arg);

/// Path of the bundled trainer executable used for builtin architectures.
std::filesystem::path resolve_trainer_binary(const ExperimentConfig& config);

}  // namespace ecotrain
