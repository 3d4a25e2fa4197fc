#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ecotrain/config.hpp"
#include "ecotrain/ledger.hpp"

namespace ecotrain {

/// One point of the experiment grid.
struct Cell {
    const TaskSpec* task = nullptr;
    const TrainerSpec* architecture = nullptr;
    const StoppingCriterion* criterion = nullptr;
    std::size_t size = 0;

    /// `<task>__<architecture>__<criterion>__s<size>`
    std::string id() const;
};

/// Grid cells in task, architecture, criterion, size order.
std::vector<Cell> enumerate_cells(const ExperimentConfig& config);

/// Runs one cell to completion and returns its sealed ledger entry. Trainer
/// crashes, protocol violations and telemetry failures are reported through
/// the entry's status rather than thrown.
RunLedgerEntry run_cell(const ExperimentConfig& config, const Cell& cell, std::size_t attempt = 1);

struct GridOptions {
    bool resume = false;
    /// Called after each entry is persisted.
    std::function<void(const RunLedgerEntry&)> on_entry;
};

struct GridResult {
    std::vector<RunLedgerEntry> entries;  // newly written, in grid order
    std::size_t skipped = 0;              // already complete (resume)

    std::size_t count(RunStatus status) const;
};

std::filesystem::path ledger_path(const ExperimentConfig& config);

/// Runs every grid cell and appends each result to the ledger in the
/// output directory. Without `resume` an existing non-empty ledger is an
/// error; with it, cells whose latest entry is complete are skipped and the
/// others are retried under a new run_id.
GridResult run_grid(const ExperimentConfig& config, const GridOptions& options = {});

}  // namespace ecotrain
