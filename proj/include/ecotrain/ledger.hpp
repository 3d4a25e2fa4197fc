#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ecotrain/metrics.hpp"

namespace ecotrain {

inline constexpr int ledger_schema_version = 1;
inline constexpr std::string_view harness_version = "0.1.0";

enum class RunStatus { complete, failed, degraded };
std::string_view to_string(RunStatus s);
RunStatus parse_run_status(std::string_view text);

/// One line of the run ledger: a sealed run or the record of its failure.
struct RunLedgerEntry {
    int schema_version = ledger_schema_version;
    std::string run_id;
    std::string cell_id;      // run_id without any retry suffix
    std::size_t attempt = 1;
    RunStatus status = RunStatus::complete;
    std::string failure;      // why the run failed or was degraded

    /// Epochs observed so far; `record.stop` is meaningful only when
    /// `has_stop` is set.
    RunRecord record;
    bool has_stop = false;
    std::optional<AccuracyPair> final_accuracy;

    std::size_t sample_count = 0;
    double watt_sum_total = 0.0;
    double joules_total = 0.0;
    /// True when samples taken before the first epoch (start-up) are counted.
    bool includes_warmup = false;
    std::size_t log_lines = 0;

    nlohmann::json config_snapshot;
    std::string config_hash;
    std::string started_at;
    std::string finished_at;
    std::string harness_version = std::string(ecotrain::harness_version);
};

nlohmann::json criterion_to_json(const StoppingCriterion& criterion);

nlohmann::json to_json(const RunLedgerEntry& entry);
/// Throws ValidationError on a missing or ill-typed field, or when the
/// entry's schema_version differs from ledger_schema_version.
RunLedgerEntry entry_from_json(const nlohmann::json& j);

/// The entry minus wall-clock timestamps, for determinism comparisons.
nlohmann::json comparable_json(const RunLedgerEntry& entry);

/// Parses a JSONL ledger. Blank lines are skipped; any other malformed line
/// throws ParseError naming the line.
std::vector<RunLedgerEntry> parse_ledger(std::string_view text, const std::string& source = "<ledger>");
std::vector<RunLedgerEntry> read_ledger(const std::filesystem::path& path);

/// Append-only writer. Each entry is written as one line and flushed to
/// disk before append() returns.
class RunLedgerWriter {
public:
    explicit RunLedgerWriter(const std::filesystem::path& path);
    ~RunLedgerWriter();
    RunLedgerWriter(const RunLedgerWriter&) = delete;
    RunLedgerWriter& operator=(const RunLedgerWriter&) = delete;

    void append(const RunLedgerEntry& entry);

private:
    std::mutex mutex_;
    std::FILE* file_ = nullptr;
    std::filesystem::path path_;
};

/// Current UTC time as an ISO-8601 string with millisecond precision.
std::string utc_timestamp();

}  // namespace ecotrain
