#include "ecotrain/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <thread>

#include "ecotrain/error.hpp"
#include "ecotrain/process.hpp"
#include "ecotrain/protocol.hpp"
#include "ecotrain/telemetry.hpp"

namespace ecotrain {

using nlohmann::json;
using Clock = std::chrono::steady_clock;
using namespace std::chrono_literals;

std::string Cell::id() const {
    return task->label + "__" + architecture->label + "__" + criterion->name + "__s" + std::to_string(size);
}

std::vector<Cell> enumerate_cells(const ExperimentConfig& config) {
    std::vector<Cell> cells;
    for (const auto& t : config.tasks) {
        for (const auto& a : config.architectures) {
            for (const auto& c : config.criteria) {
                for (std::size_t s : config.sizes) cells.push_back({&t, &a, &c, s});
            }
        }
    }
    return cells;
}

std::size_t GridResult::count(RunStatus status) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [&](const auto& e) { return e.status == status; }));
}

std::filesystem::path ledger_path(const ExperimentConfig& config) { return config.output_dir / "ledger.jsonl"; }

namespace {

/// First telemetry problem reported by any source; later ones are dropped.
class Problem {
public:
    void set(std::string message) {
        std::lock_guard lock(mutex_);
        if (message_.empty()) message_ = std::move(message);
    }
    std::string get() const {
        std::lock_guard lock(mutex_);
        return message_;
    }

private:
    mutable std::mutex mutex_;
    std::string message_;
};

void pump(PowerSource& source, std::size_t index, ConcurrentLedger& ledger, const std::atomic<bool>& stop,
          Problem& problem) {
    try {
        while (!stop.load()) {
            auto s = source.next();
            if (!s) {
                problem.set("telemetry source " + std::to_string(index) + " ended during the run");
                return;
            }
            ledger.append(*s);
        }
    } catch (const std::exception& e) {
        problem.set("telemetry source " + std::to_string(index) + " failed: " + e.what());
    }
}

json cell_snapshot(const ExperimentConfig& config, const Cell& cell) {
    json full = config_to_json(config);
    json arch;
    for (const auto& a : full["architectures"]) {
        if (a["label"] == cell.architecture->label) arch = a;
    }
    json crit;
    for (const auto& c : full["criteria"]) {
        if (c["name"] == cell.criterion->name) crit = c;
    }
    return {{"architecture", arch},
            {"task", {{"label", cell.task->label}, {"arg", cell.task->arg_for(cell.architecture->label)}}},
            {"size", cell.size},
            {"criterion", crit},
            {"telemetry", full["telemetry"]},
            {"seed", config.seed},
            {"deterministic", config.deterministic},
            {"virtual_epoch_ms", config.virtual_epoch.count()},
            {"grace_period_ms", config.grace_period.count()}};
}

}  // namespace

RunLedgerEntry run_cell(const ExperimentConfig& config, const Cell& cell, std::size_t attempt) {
    RunLedgerEntry entry;
    entry.cell_id = cell.id();
    entry.attempt = attempt;
    entry.run_id = attempt == 1 ? entry.cell_id : entry.cell_id + "__retry" + std::to_string(attempt);
    entry.record.architecture = cell.architecture->label;
    entry.record.task = cell.task->label;
    entry.record.size_multiplier = cell.size;
    entry.record.criterion = *cell.criterion;
    entry.config_snapshot = cell_snapshot(config, cell);
    entry.config_hash = config_hash(config);
    entry.started_at = utc_timestamp();

    auto finish = [&](RunStatus status, std::string why) {
        entry.status = status;
        entry.failure = std::move(why);
        entry.finished_at = utc_timestamp();
        return entry;
    };

    std::vector<std::unique_ptr<PowerSource>> sources;
    std::array<std::chrono::milliseconds, 3> intervals{1ms, 1ms, 1ms};
    try {
        for (const auto& t : config.telemetry) {
            sources.push_back(open_source(t, config.deterministic));
            for (auto c : {Component::gpu, Component::cpu, Component::ram}) {
                if (sources.back()->components().contains(c)) intervals[static_cast<std::size_t>(c)] = t.sample_interval;
            }
        }
    } catch (const std::exception& e) {
        return finish(RunStatus::failed, std::string("telemetry: ") + e.what());
    }

    ConcurrentLedger energy;
    Problem telemetry_problem;
    std::atomic<bool> stop_pumps{false};
    std::vector<std::thread> pumps;
    std::vector<ReplayCursor> cursors;
    if (config.deterministic) {
        for (auto& s : sources) cursors.emplace_back(*s);
    } else {
        entry.includes_warmup = true;
        for (std::size_t i = 0; i < sources.size(); ++i) {
            pumps.emplace_back(pump, std::ref(*sources[i]), i, std::ref(energy), std::cref(stop_pumps),
                               std::ref(telemetry_problem));
        }
    }
    auto stop_telemetry = [&] {
        stop_pumps = true;
        for (auto& t : pumps) t.join();
        pumps.clear();
    };

    std::string failure;
    std::optional<ChildProcess> child;
    try {
        const auto logs = config.output_dir / "logs";
        std::filesystem::create_directories(logs);
        child.emplace(ChildProcess::spawn(
            trainer_command(config, *cell.architecture, cell.size, cell.task->arg_for(cell.architecture->label)),
            logs / (entry.run_id + ".stderr")));
    } catch (const std::exception& e) {
        stop_telemetry();
        return finish(RunStatus::failed, e.what());
    }

    CriterionState state;
    bool stopped = false;
    bool saw_final = false;
    Clock::time_point grace_deadline{};
    const auto cell_deadline = config.cell_timeout.count() > 0 ? Clock::now() + config.cell_timeout : Clock::time_point::max();
    std::string line;

    auto violation = [&](const std::string& why) {
        failure = "protocol violation: " + why;
        child->kill_and_wait();
    };

    for (;;) {
        const auto status = child->read_line(line, 100ms);
        if (status == ReadStatus::eof) break;
        if (status == ReadStatus::timeout) {
            if (stopped && Clock::now() >= grace_deadline) break;
            if (Clock::now() >= cell_deadline) {
                failure = "cell timed out after " + std::to_string(config.cell_timeout.count()) + " ms";
                child->kill_and_wait();
                break;
            }
            continue;
        }
        if (stopped) {
            if (Clock::now() >= grace_deadline) break;
            continue;  // late events after a stop decision do not count
        }
        TrainerEvent ev;
        try {
            ev = parse_event(line);
        } catch (const ProtocolError& e) {
            violation(e.what());
            break;
        }
        if (ev.kind == EventKind::log) {
            ++entry.log_lines;
            continue;
        }
        if (ev.kind == EventKind::final) {
            saw_final = true;
            entry.final_accuracy = AccuracyPair{ev.train_acc, ev.eval_acc};
            continue;
        }
        if (saw_final) {
            violation("epoch_end after final");
            break;
        }
        const std::size_t expected = state.epochs_seen;
        if (ev.epoch != expected) {
            violation("expected epoch " + std::to_string(expected) + ", got " + std::to_string(ev.epoch));
            break;
        }
        if (config.deterministic) {
            const std::int64_t boundary = static_cast<std::int64_t>(ev.epoch + 1) * config.virtual_epoch.count();
            std::vector<PowerSample> batch;
            for (std::size_t i = 0; i < cursors.size(); ++i) {
                if (!cursors[i].drain_until(boundary, [&](const PowerSample& s) { batch.push_back(s); })) {
                    telemetry_problem.set("telemetry source " + std::to_string(i) + " ended before epoch " +
                                          std::to_string(ev.epoch) + " completed");
                }
            }
            std::stable_sort(batch.begin(), batch.end(),
                             [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
            for (const auto& s : batch) energy.append(s);
        }
        energy.mark_epoch(ev.epoch);
        const double e_up_to = energy.energy_up_to(ev.epoch);
        Decision d;
        try {
            d = observe_epoch(state, *cell.criterion, ev.epoch, ev.train_acc, ev.eval_acc, e_up_to);
        } catch (const InvariantError& e) {
            violation(e.what());
            break;
        }
        entry.record.epochs.push_back({ev.epoch, ev.train_acc, ev.eval_acc, e_up_to});
        if (d.should_stop()) {
            stopped = true;
            entry.has_stop = true;
            entry.record.stop = *d.stop;
            child->write_line(stop_command);
            child->close_stdin();
            grace_deadline = Clock::now() + config.grace_period;
        }
    }

    stop_telemetry();
    ExitStatus exit_status;
    auto wait = 1000ms;
    if (stopped) {
        wait = std::max(std::chrono::duration_cast<std::chrono::milliseconds>(grace_deadline - Clock::now()), 0ms);
    }
    if (auto s = child->wait_for(wait)) {
        exit_status = *s;
    } else {
        exit_status = child->kill_and_wait();
    }

    if (failure.empty() && !stopped) {
        if (entry.record.epochs.empty()) {
            failure = "trainer exited without reporting an epoch (" + exit_status.describe() + ")";
        } else if (!exit_status.success()) {
            failure = "trainer crashed after epoch " + std::to_string(entry.record.epochs.back().epoch) + " (" +
                      exit_status.describe() + ")";
        } else if (!saw_final) {
            failure = "trainer exited before a stop decision without a final event";
        } else {
            entry.has_stop = true;
            entry.record.stop = {StopKind::trainer_exit, entry.record.epochs.back().epoch,
                                 static_cast<double>(entry.record.epochs.size())};
        }
    }

    const EnergyLedger snapshot = energy.snapshot();
    entry.sample_count = snapshot.sample_count();
    entry.watt_sum_total = snapshot.cumulative();
    entry.joules_total = snapshot.joules(intervals);
    entry.record.component_set = snapshot.components();

    if (!failure.empty()) return finish(RunStatus::failed, failure);
    if (auto p = telemetry_problem.get(); !p.empty()) return finish(RunStatus::degraded, p);
    if (snapshot.sample_count() == 0) return finish(RunStatus::degraded, "no power samples recorded");
    return finish(RunStatus::complete, "");
}

GridResult run_grid(const ExperimentConfig& config, const GridOptions& options) {
    config.validate();
    std::filesystem::create_directories(config.output_dir);
    const auto path = ledger_path(config);

    std::map<std::string, std::pair<RunStatus, std::size_t>> latest;  // cell_id -> status, attempts
    if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
        if (!options.resume) {
            throw Error("ledger " + path.string() + " already has entries; pass --resume to continue it");
        }
        for (const auto& e : read_ledger(path)) {
            auto& slot = latest[e.cell_id];
            slot.first = e.status;
            slot.second = std::max(slot.second, e.attempt);
        }
    }

    GridResult result;
    std::vector<std::pair<Cell, std::size_t>> todo;
    for (const auto& cell : enumerate_cells(config)) {
        auto it = latest.find(cell.id());
        if (it != latest.end() && it->second.first == RunStatus::complete) {
            ++result.skipped;
            continue;
        }
        todo.emplace_back(cell, it == latest.end() ? 1 : it->second.second + 1);
    }

    RunLedgerWriter writer(path);
    std::vector<RunLedgerEntry> entries(todo.size());
    std::atomic<std::size_t> next{0};
    std::mutex callback_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < todo.size(); i = next++) {
            const auto& [cell, attempt] = todo[i];
            RunLedgerEntry e;
            try {
                e = run_cell(config, cell, attempt);
            } catch (const std::exception& ex) {
                e.cell_id = cell.id();
                e.run_id = cell.id();
                e.attempt = attempt;
                e.record.architecture = cell.architecture->label;
                e.record.task = cell.task->label;
                e.record.size_multiplier = cell.size;
                e.record.criterion = *cell.criterion;
                e.status = RunStatus::failed;
                e.failure = ex.what();
                e.config_hash = config_hash(config);
                e.started_at = e.finished_at = utc_timestamp();
            }
            writer.append(e);
            if (options.on_entry) {
                std::lock_guard lock(callback_mutex);
                options.on_entry(e);
            }
            entries[i] = std::move(e);
        }
    };
    const std::size_t n = std::min(config.max_parallel_cells, std::max<std::size_t>(todo.size(), 1));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    result.entries = std::move(entries);
    return result;
}

}  // namespace ecotrain
