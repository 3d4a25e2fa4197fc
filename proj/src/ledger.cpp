#include "ecotrain/ledger.hpp"

#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "ecotrain/error.hpp"
#include "ecotrain/text.hpp"

namespace ecotrain {

using nlohmann::json;

std::string_view to_string(RunStatus s) {
    switch (s) {
        case RunStatus::complete: return "complete";
        case RunStatus::failed: return "failed";
        case RunStatus::degraded: return "degraded";
    }
    return "?";
}

RunStatus parse_run_status(std::string_view text) {
    if (text == "complete") return RunStatus::complete;
    if (text == "failed") return RunStatus::failed;
    if (text == "degraded") return RunStatus::degraded;
    throw ValidationError("status", "unknown run status '" + std::string(text) + "'");
}

namespace {

json stop_to_json(const StopReason& s) {
    return {{"kind", std::string(to_string(s.kind))}, {"at_epoch", s.at_epoch}, {"trigger_value", s.trigger_value}};
}

template <typename T>
T required(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) throw ValidationError(key, "missing");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ValidationError(key, "wrong type");
    }
}

StoppingCriterion criterion_from(const json& j) {
    StoppingCriterion c;
    const auto kind = parse_criterion_kind(required<std::string>(j, "kind"));
    c.name = required<std::string>(j, "name");
    switch (kind) {
        case CriterionKind::fixed_epochs:
            c.params = FixedEpochs{required<std::size_t>(j, "max_epochs")};
            break;
        case CriterionKind::accuracy_bound:
            c.params = AccuracyBound{required<double>(j, "target_accuracy"),
                                     parse_accuracy_stream(required<std::string>(j, "watch")),
                                     required<std::size_t>(j, "safety_cap")};
            break;
        case CriterionKind::early_stopping:
            c.params = EarlyStopping{required<std::size_t>(j, "patience"), required<std::size_t>(j, "safety_cap")};
            break;
        case CriterionKind::energy_budget:
            c.params = EnergyBudget{required<double>(j, "budget_watt_sum"), required<std::size_t>(j, "safety_cap")};
            break;
    }
    return c;
}

}  // namespace

json criterion_to_json(const StoppingCriterion& c) {
    json j{{"kind", std::string(to_string(c.kind()))}, {"name", c.name}};
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, FixedEpochs>) {
                j["max_epochs"] = p.max_epochs;
            } else {
                j["safety_cap"] = p.safety_cap;
                if constexpr (std::is_same_v<P, AccuracyBound>) {
                    j["target_accuracy"] = p.target_accuracy;
                    j["watch"] = std::string(to_string(p.watch));
                } else if constexpr (std::is_same_v<P, EarlyStopping>) {
                    j["patience"] = p.patience;
                } else {
                    j["budget_watt_sum"] = p.budget_watt_sum;
                }
            }
        },
        c.params);
    return j;
}

json to_json(const RunLedgerEntry& e) {
    json epochs = json::array();
    for (const auto& r : e.record.epochs) {
        epochs.push_back({{"epoch", r.epoch},
                          {"train_acc", r.train_acc},
                          {"eval_acc", r.eval_acc},
                          {"energy_up_to", r.energy_up_to}});
    }
    json j;
    j["schema_version"] = e.schema_version;
    j["run_id"] = e.run_id;
    j["cell_id"] = e.cell_id;
    j["attempt"] = e.attempt;
    j["status"] = std::string(to_string(e.status));
    j["failure"] = e.failure;
    j["task"] = e.record.task;
    j["architecture"] = e.record.architecture;
    j["size"] = e.record.size_multiplier;
    j["criterion"] = criterion_to_json(e.record.criterion);
    j["epochs"] = epochs;
    j["stop"] = e.has_stop ? stop_to_json(e.record.stop) : json(nullptr);
    j["final"] = e.final_accuracy ? json{{"train_acc", e.final_accuracy->train}, {"eval_acc", e.final_accuracy->test}}
                                  : json(nullptr);
    j["component_set"] = e.record.component_set.names();
    j["sample_count"] = e.sample_count;
    j["watt_sum_total"] = e.watt_sum_total;
    j["joules_total"] = e.joules_total;
    j["includes_warmup"] = e.includes_warmup;
    j["log_lines"] = e.log_lines;
    j["config"] = e.config_snapshot;
    j["config_hash"] = e.config_hash;
    j["started_at"] = e.started_at;
    j["finished_at"] = e.finished_at;
    j["harness_version"] = e.harness_version;
    return j;
}

RunLedgerEntry entry_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("entry", "expected a JSON object");
    RunLedgerEntry e;
    e.schema_version = required<int>(j, "schema_version");
    if (e.schema_version != ledger_schema_version) {
        throw ValidationError("schema_version", "ledger schema version " + std::to_string(e.schema_version) +
                                                    " does not match supported version " +
                                                    std::to_string(ledger_schema_version));
    }
    e.run_id = required<std::string>(j, "run_id");
    e.cell_id = required<std::string>(j, "cell_id");
    e.attempt = required<std::size_t>(j, "attempt");
    e.status = parse_run_status(required<std::string>(j, "status"));
    e.failure = required<std::string>(j, "failure");
    e.record.task = required<std::string>(j, "task");
    e.record.architecture = required<std::string>(j, "architecture");
    e.record.size_multiplier = required<std::size_t>(j, "size");
    e.record.criterion = criterion_from(required<json>(j, "criterion"));
    for (const auto& ej : required<json>(j, "epochs")) {
        e.record.epochs.push_back({required<std::size_t>(ej, "epoch"), required<double>(ej, "train_acc"),
                                   required<double>(ej, "eval_acc"), required<double>(ej, "energy_up_to")});
    }
    if (auto it = j.find("stop"); it != j.end() && !it->is_null()) {
        e.has_stop = true;
        e.record.stop = {parse_stop_kind(required<std::string>(*it, "kind")), required<std::size_t>(*it, "at_epoch"),
                         required<double>(*it, "trigger_value")};
    }
    if (auto it = j.find("final"); it != j.end() && !it->is_null()) {
        e.final_accuracy = AccuracyPair{required<double>(*it, "train_acc"), required<double>(*it, "eval_acc")};
    }
    for (const auto& name : required<std::vector<std::string>>(j, "component_set")) {
        e.record.component_set.insert(parse_component(name));
    }
    e.sample_count = required<std::size_t>(j, "sample_count");
    e.watt_sum_total = required<double>(j, "watt_sum_total");
    e.joules_total = required<double>(j, "joules_total");
    e.includes_warmup = required<bool>(j, "includes_warmup");
    e.log_lines = required<std::size_t>(j, "log_lines");
    e.config_snapshot = j.value("config", json(nullptr));
    e.config_hash = required<std::string>(j, "config_hash");
    e.started_at = required<std::string>(j, "started_at");
    e.finished_at = required<std::string>(j, "finished_at");
    e.harness_version = required<std::string>(j, "harness_version");
    return e;
}

json comparable_json(const RunLedgerEntry& entry) {
    json j = to_json(entry);
    j.erase("started_at");
    j.erase("finished_at");
    return j;
}

std::vector<RunLedgerEntry> parse_ledger(std::string_view text, const std::string& source) {
    std::vector<RunLedgerEntry> out;
    std::size_t line_no = 0;
    for (auto line : split_lines(text)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(source, line_no, "malformed JSON");
        }
        try {
            out.push_back(entry_from_json(j));
        } catch (const ValidationError& e) {
            throw ParseError(source, line_no, e.what());
        } catch (const InvariantError& e) {
            throw ParseError(source, line_no, e.what());
        }
    }
    return out;
}

std::vector<RunLedgerEntry> read_ledger(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read ledger " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_ledger(ss.str(), path.string());
}

RunLedgerWriter::RunLedgerWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    file_ = std::fopen(path.c_str(), "ab");
    if (!file_) throw Error("cannot open ledger " + path.string() + ": " + std::strerror(errno));
}

RunLedgerWriter::~RunLedgerWriter() {
    if (file_) std::fclose(file_);
}

void RunLedgerWriter::append(const RunLedgerEntry& entry) {
    const std::string line = to_json(entry).dump() + "\n";
    std::lock_guard lock(mutex_);
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
        throw Error("cannot write ledger " + path_.string() + ": " + std::strerror(errno));
    }
    ::fsync(::fileno(file_));
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    ::gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

}  // namespace ecotrain
