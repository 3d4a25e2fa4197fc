#include "ecotrain/config.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "ecotrain/error.hpp"
#include "ecotrain/ledger.hpp"
#include "ecotrain/process.hpp"
#include "ecotrain/text.hpp"

#ifndef ECOTRAIN_DEFAULT_TRAINER
#define ECOTRAIN_DEFAULT_TRAINER ""
#endif

namespace ecotrain {

using nlohmann::json;

const std::string& TaskSpec::arg_for(const std::string& architecture) const {
    auto it = per_architecture.find(architecture);
    if (it != per_architecture.end()) return it->second;
    return arg.empty() ? label : arg;
}

namespace {

/// Typed access to one JSON object, rejecting unknown keys.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError(where(), "expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    const std::string& where() const { return path_.empty() ? root_ : path_; }

    const json* get(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }

    std::optional<std::string> str(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) throw ValidationError(field(key), "expected a string");
        return v->get<std::string>();
    }
    std::optional<double> num(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) throw ValidationError(field(key), "expected a number");
        return v->get<double>();
    }
    std::optional<std::int64_t> integer(const std::string& key, std::int64_t min = 0) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) throw ValidationError(field(key), "expected an integer");
        auto i = v->get<std::int64_t>();
        if (i < min) throw ValidationError(field(key), "must be >= " + std::to_string(min));
        return i;
    }
    std::optional<bool> boolean(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) throw ValidationError(field(key), "expected true or false");
        return v->get<bool>();
    }
    const json* array(const std::string& key) {
        const json* v = get(key);
        if (v && !v->is_array()) throw ValidationError(field(key), "expected an array");
        return v;
    }
    std::vector<std::string> strings(const std::string& key) {
        std::vector<std::string> out;
        const json* v = array(key);
        if (!v) return out;
        for (std::size_t i = 0; i < v->size(); ++i) {
            if (!(*v)[i].is_string()) throw ValidationError(field(key) + "[" + std::to_string(i) + "]", "expected a string");
            out.push_back((*v)[i].get<std::string>());
        }
        return out;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ValidationError(field(it.key()), "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::string root_ = "config";
    std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

StoppingCriterion criterion_from_json(const json& j, const std::string& path) {
    if (j.is_string()) {
        StoppingCriterion c;
        switch (parse_criterion_kind(j.get<std::string>())) {
            case CriterionKind::fixed_epochs: c = StoppingCriterion::fixed_epochs(); break;
            case CriterionKind::accuracy_bound: c = StoppingCriterion::accuracy_bound(0.99); break;
            case CriterionKind::early_stopping: c = StoppingCriterion::early_stopping(); break;
            case CriterionKind::energy_budget: c = StoppingCriterion::energy_budget(); break;
        }
        return c;
    }
    Reader r(j, path);
    auto kind_text = r.str("kind");
    if (!kind_text) throw ValidationError(r.field("kind"), "missing criterion kind");
    CriterionKind kind;
    try {
        kind = parse_criterion_kind(*kind_text);
    } catch (const ValidationError& e) {
        throw ValidationError(r.field("kind"), e.message());
    }
    StoppingCriterion c;
    c.name = r.str("name").value_or(std::string(to_string(kind)));
    auto cap = r.integer("safety_cap", 1);
    const std::size_t safety = cap ? static_cast<std::size_t>(*cap) : default_safety_cap;
    switch (kind) {
        case CriterionKind::fixed_epochs: {
            FixedEpochs p;
            if (auto v = r.integer("max_epochs", 1)) p.max_epochs = static_cast<std::size_t>(*v);
            if (cap) throw ValidationError(r.field("safety_cap"), "fixed_epochs has no safety cap");
            c.params = p;
            break;
        }
        case CriterionKind::accuracy_bound: {
            AccuracyBound p;
            p.safety_cap = safety;
            if (auto v = r.num("target_accuracy")) p.target_accuracy = *v;
            if (auto v = r.str("watch")) {
                try {
                    p.watch = parse_accuracy_stream(*v);
                } catch (const ValidationError& e) {
                    throw ValidationError(r.field("watch"), e.message());
                }
            }
            c.params = p;
            break;
        }
        case CriterionKind::early_stopping: {
            EarlyStopping p;
            p.safety_cap = safety;
            if (auto v = r.integer("patience", 1)) p.patience = static_cast<std::size_t>(*v);
            c.params = p;
            break;
        }
        case CriterionKind::energy_budget: {
            EnergyBudget p;
            p.safety_cap = safety;
            if (auto v = r.num("budget_watt_sum")) p.budget_watt_sum = *v;
            c.params = p;
            break;
        }
    }
    r.finish();
    return c;
}

TelemetrySourceConfig telemetry_from_json(const json& j, const std::string& path, const std::filesystem::path& base) {
    Reader r(j, path);
    TelemetrySourceConfig t;
    auto kind = r.str("kind");
    if (!kind) throw ValidationError(r.field("kind"), "missing telemetry source kind");
    try {
        t.kind = parse_source_kind(*kind);
    } catch (const ValidationError& e) {
        throw ValidationError(r.field("kind"), e.message());
    }
    if (auto v = r.integer("interval_ms", 1)) t.sample_interval = std::chrono::milliseconds(*v);
    if (auto v = r.str("path")) t.trace_path = resolve(*v, base);
    if (auto v = r.boolean("loop")) t.loop = *v;
    if (auto v = r.num("watts")) t.constant_watts = *v;
    if (auto v = r.str("component")) {
        try {
            t.component = parse_component(*v);
        } catch (const Error& e) {
            throw ValidationError(r.field("component"), e.what());
        }
    }
    if (auto v = r.str("counter_path")) t.counter_path = resolve(*v, base);
    r.finish();
    return t;
}

json telemetry_to_json(const TelemetrySourceConfig& t) {
    json j{{"kind", std::string(to_string(t.kind))}, {"interval_ms", t.sample_interval.count()}};
    switch (t.kind) {
        case SourceKind::trace_replay:
            j["path"] = t.trace_path.string();
            j["loop"] = t.loop;
            break;
        case SourceKind::constant:
            j["watts"] = t.constant_watts;
            j["component"] = std::string(to_string(t.component));
            break;
        case SourceKind::os_cpu_counter:
        case SourceKind::gpu_counter:
            if (!t.counter_path.empty()) j["counter_path"] = t.counter_path.string();
            break;
    }
    return j;
}

std::size_t line_of_byte(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

bool is_safe_label(const std::string& s) {
    if (s.empty() || s.find("__") != std::string::npos) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '+';
    });
}

}  // namespace

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    Reader r(j, "");
    ExperimentConfig c;
    if (auto v = r.integer("schema_version", 1)) c.schema_version = static_cast<int>(*v);
    if (c.schema_version != config_schema_version) {
        throw ValidationError("schema_version", "unsupported schema version " + std::to_string(c.schema_version) +
                                                    " (expected " + std::to_string(config_schema_version) + ")");
    }

    if (const json* archs = r.array("architectures")) {
        for (std::size_t i = 0; i < archs->size(); ++i) {
            const std::string path = "architectures[" + std::to_string(i) + "]";
            Reader a((*archs)[i], path);
            TrainerSpec t;
            t.label = a.str("label").value_or("");
            t.builtin = a.str("builtin").value_or("");
            t.command = a.strings("command");
            if (!t.command.empty() && t.command[0].find('/') != std::string::npos) {
                t.command[0] = resolve(t.command[0], base_dir).string();
            }
            a.finish();
            c.architectures.push_back(std::move(t));
        }
    }
    if (const json* sizes = r.array("sizes")) {
        c.sizes.clear();
        for (std::size_t i = 0; i < sizes->size(); ++i) {
            const auto& v = (*sizes)[i];
            if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
                throw ValidationError("sizes[" + std::to_string(i) + "]", "size multiplier must be an integer >= 1");
            }
            c.sizes.push_back(v.get<std::size_t>());
        }
    }
    if (const json* crits = r.array("criteria")) {
        for (std::size_t i = 0; i < crits->size(); ++i) {
            c.criteria.push_back(criterion_from_json((*crits)[i], "criteria[" + std::to_string(i) + "]"));
        }
    } else {
        c.criteria = {StoppingCriterion::fixed_epochs(), StoppingCriterion::early_stopping(),
                      StoppingCriterion::energy_budget(), StoppingCriterion::accuracy_bound(0.99)};
    }
    if (const json* tasks = r.array("tasks")) {
        for (std::size_t i = 0; i < tasks->size(); ++i) {
            const auto& tj = (*tasks)[i];
            TaskSpec t;
            if (tj.is_string()) {
                t.label = tj.get<std::string>();
            } else {
                Reader tr(tj, "tasks[" + std::to_string(i) + "]");
                t.label = tr.str("label").value_or("");
                t.arg = tr.str("arg").value_or("");
                if (const json* per = tr.get("per_architecture")) {
                    if (!per->is_object()) throw ValidationError(tr.field("per_architecture"), "expected an object");
                    for (auto it = per->begin(); it != per->end(); ++it) {
                        if (!it->is_string()) {
                            throw ValidationError(tr.field("per_architecture." + it.key()), "expected a string");
                        }
                        t.per_architecture[it.key()] = it->get<std::string>();
                    }
                }
                tr.finish();
            }
            c.tasks.push_back(std::move(t));
        }
    }
    if (const json* tel = r.get("telemetry")) {
        if (tel->is_object()) {
            c.telemetry.push_back(telemetry_from_json(*tel, "telemetry", base_dir));
        } else if (tel->is_array()) {
            for (std::size_t i = 0; i < tel->size(); ++i) {
                c.telemetry.push_back(
                    telemetry_from_json((*tel)[i], "telemetry[" + std::to_string(i) + "]", base_dir));
            }
        } else {
            throw ValidationError("telemetry", "expected an object or an array of objects");
        }
    }
    if (auto v = r.integer("seed", std::numeric_limits<std::int64_t>::min())) c.seed = *v;
    if (auto v = r.str("output_dir")) c.output_dir = resolve(*v, base_dir);
    if (auto v = r.boolean("deterministic")) c.deterministic = *v;
    if (auto v = r.integer("virtual_epoch_ms", 1)) c.virtual_epoch = std::chrono::milliseconds(*v);
    if (auto v = r.integer("grace_period_ms", 0)) c.grace_period = std::chrono::milliseconds(*v);
    if (auto v = r.integer("cell_timeout_ms", 0)) c.cell_timeout = std::chrono::milliseconds(*v);
    if (auto v = r.integer("max_parallel_cells", 1)) c.max_parallel_cells = static_cast<std::size_t>(*v);
    if (auto v = r.str("trainer_binary")) c.trainer_binary = resolve(*v, base_dir);
    if (const json* rep = r.get("report")) {
        Reader rr(*rep, "report");
        c.report.overall_criteria = rr.strings("overall_criteria");
        c.report.numerator_order = rr.strings("numerator_order");
        if (const json* w = rr.get("criterion_weights")) {
            if (!w->is_object()) throw ValidationError("report.criterion_weights", "expected an object");
            for (auto it = w->begin(); it != w->end(); ++it) {
                if (!it->is_number()) throw ValidationError("report.criterion_weights." + it.key(), "expected a number");
                c.report.criterion_weights[it.key()] = it->get<double>();
            }
        }
        c.report.short_horizon = rr.str("overtraining_short").value_or("");
        c.report.long_horizon = rr.str("overtraining_long").value_or("");
        if (auto v = rr.num("comparable_factor")) c.report.overtraining.comparable_factor = *v;
        if (auto v = rr.integer("decimals", 0)) c.report.overtraining.decimals = static_cast<int>(*v);
        rr.finish();
    }
    r.finish();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        std::string msg = e.what();
        if (auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
        throw ParseError(path.string(), line_of_byte(text, e.byte == 0 ? 0 : e.byte - 1), msg);
    }
    return config_from_json(j, path.parent_path());
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["architectures"] = json::array();
    for (const auto& a : c.architectures) {
        json aj{{"label", a.label}};
        if (!a.builtin.empty()) aj["builtin"] = a.builtin;
        if (!a.command.empty()) aj["command"] = a.command;
        j["architectures"].push_back(aj);
    }
    j["sizes"] = c.sizes;
    j["criteria"] = json::array();
    for (const auto& cr : c.criteria) j["criteria"].push_back(criterion_to_json(cr));
    j["tasks"] = json::array();
    for (const auto& t : c.tasks) {
        json tj{{"label", t.label}};
        if (!t.arg.empty()) tj["arg"] = t.arg;
        if (!t.per_architecture.empty()) tj["per_architecture"] = t.per_architecture;
        j["tasks"].push_back(tj);
    }
    j["telemetry"] = json::array();
    for (const auto& t : c.telemetry) j["telemetry"].push_back(telemetry_to_json(t));
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir.string();
    j["deterministic"] = c.deterministic;
    j["virtual_epoch_ms"] = c.virtual_epoch.count();
    j["grace_period_ms"] = c.grace_period.count();
    j["cell_timeout_ms"] = c.cell_timeout.count();
    j["max_parallel_cells"] = c.max_parallel_cells;
    if (!c.trainer_binary.empty()) j["trainer_binary"] = c.trainer_binary.string();
    json rep;
    rep["overall_criteria"] = c.report.overall_criteria;
    rep["numerator_order"] = c.report.numerator_order;
    rep["criterion_weights"] = c.report.criterion_weights;
    if (!c.report.short_horizon.empty()) rep["overtraining_short"] = c.report.short_horizon;
    if (!c.report.long_horizon.empty()) rep["overtraining_long"] = c.report.long_horizon;
    rep["comparable_factor"] = c.report.overtraining.comparable_factor;
    rep["decimals"] = c.report.overtraining.decimals;
    j["report"] = rep;
    return j;
}

std::string config_hash(const ExperimentConfig& c) {
    json j = config_to_json(c);
    j.erase("output_dir");  // where results go and how many run at once do not change them
    j.erase("max_parallel_cells");
    const std::string canon = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : canon) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<ValidationError> ExperimentConfig::check() const {
    std::vector<ValidationError> out;
    auto add = [&](std::string field, const std::string& msg) { out.emplace_back(std::move(field), msg); };

    if (architectures.empty()) add("architectures", "at least one architecture is required");
    std::set<std::string> arch_labels;
    for (std::size_t i = 0; i < architectures.size(); ++i) {
        const auto& a = architectures[i];
        const std::string f = "architectures[" + std::to_string(i) + "]";
        if (!is_safe_label(a.label)) {
            add(f + ".label", "label '" + a.label + "' must be non-empty, use [A-Za-z0-9._+-] and not contain '__'");
        } else if (!arch_labels.insert(a.label).second) {
            add(f + ".label", "duplicate architecture label '" + a.label + "'");
        }
        if (a.builtin.empty() == a.command.empty()) {
            add(f, "exactly one of 'builtin' and 'command' is required");
        } else if (!a.builtin.empty() && a.builtin != "surrogate" && a.builtin != "tinynet") {
            add(f + ".builtin", "unknown builtin trainer '" + a.builtin + "' (expected surrogate or tinynet)");
        }
    }
    if (sizes.empty()) add("sizes", "at least one size multiplier is required");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 1) add("sizes[" + std::to_string(i) + "]", "size multiplier must be an integer >= 1");
    }
    if (std::set<std::size_t>(sizes.begin(), sizes.end()).size() != sizes.size()) add("sizes", "duplicate size");
    if (criteria.empty()) add("criteria", "at least one criterion is required");
    std::set<std::string> crit_names;
    for (const auto& c : criteria) {
        try {
            c.validate();
        } catch (const ValidationError& e) {
            out.push_back(e);
        }
        if (!is_safe_label(c.name)) {
            add("criteria." + c.name, "criterion name must be non-empty, use [A-Za-z0-9._+-] and not contain '__'");
        } else if (!crit_names.insert(c.name).second) {
            add("criteria." + c.name, "duplicate criterion name (set 'name' to tell them apart)");
        }
    }
    if (tasks.empty()) add("tasks", "at least one task is required");
    std::set<std::string> task_labels;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& t = tasks[i];
        const std::string f = "tasks[" + std::to_string(i) + "]";
        if (!is_safe_label(t.label)) {
            add(f + ".label", "label '" + t.label + "' must be non-empty, use [A-Za-z0-9._+-] and not contain '__'");
        } else if (!task_labels.insert(t.label).second) {
            add(f + ".label", "duplicate task label '" + t.label + "'");
        }
        for (const auto& [arch, _] : t.per_architecture) {
            if (!arch_labels.count(arch)) add(f + ".per_architecture." + arch, "no architecture with this label");
        }
    }
    if (telemetry.empty()) add("telemetry", "at least one telemetry source is required");
    bool has_counter = false;
    for (std::size_t i = 0; i < telemetry.size(); ++i) {
        const auto& t = telemetry[i];
        has_counter = has_counter || t.kind == SourceKind::os_cpu_counter || t.kind == SourceKind::gpu_counter;
        try {
            t.validate();
        } catch (const ValidationError& e) {
            std::string f = e.field();
            if (f.rfind("telemetry.", 0) == 0) f = "telemetry[" + std::to_string(i) + "]" + f.substr(9);
            add(f, e.message());
        }
    }
    if (max_parallel_cells > 1 && has_counter) {
        add("max_parallel_cells", "parallel cells cannot share a physical energy counter; use 1");
    }
    if (deterministic && has_counter) {
        add("deterministic", "deterministic mode needs replayable telemetry (trace_replay or constant)");
    }
    for (const auto& n : report.overall_criteria) {
        if (!crit_names.count(n)) add("report.overall_criteria", "unknown criterion '" + n + "'");
    }
    for (const auto& [n, w] : report.criterion_weights) {
        if (!crit_names.count(n)) add("report.criterion_weights." + n, "unknown criterion");
        if (!(w > 0.0)) add("report.criterion_weights." + n, "weight must be > 0");
    }
    if (report.short_horizon.empty() != report.long_horizon.empty()) {
        add("report", "set both overtraining_short and overtraining_long or neither");
    }
    for (const auto& [key, name] : {std::pair{"report.overtraining_short", &report.short_horizon},
                                    std::pair{"report.overtraining_long", &report.long_horizon}}) {
        if (!name->empty() && !crit_names.count(*name)) add(key, "unknown criterion '" + *name + "'");
    }
    if (!(report.overtraining.comparable_factor >= 0.0)) add("report.comparable_factor", "must be >= 0");
    return out;
}

void ExperimentConfig::validate() const {
    auto problems = check();
    if (!problems.empty()) throw problems.front();
}

ConfigOverrides overrides_from_env() {
    ConfigOverrides o;
    if (const char* v = std::getenv("ECOTRAIN_OUTPUT_DIR"); v && *v) o.output_dir = v;
    if (const char* v = std::getenv("ECOTRAIN_SEED"); v && *v) {
        auto s = parse_int(v);
        if (!s) throw ValidationError("ECOTRAIN_SEED", std::string("not an integer: '") + v + "'");
        o.seed = *s;
    }
    if (const char* v = std::getenv("ECOTRAIN_DETERMINISTIC"); v && *v) {
        const std::string s = v;
        if (s == "1" || s == "true") {
            o.deterministic = true;
        } else if (s == "0" || s == "false") {
            o.deterministic = false;
        } else {
            throw ValidationError("ECOTRAIN_DETERMINISTIC", "expected 1, 0, true or false");
        }
    }
    if (const char* v = std::getenv("ECOTRAIN_TRAINER_BINARY"); v && *v) o.trainer_binary = v;
    return o;
}

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& o) {
    if (o.output_dir) config.output_dir = *o.output_dir;
    if (o.seed) config.seed = *o.seed;
    if (o.deterministic) config.deterministic = *o.deterministic;
    if (o.trainer_binary) config.trainer_binary = *o.trainer_binary;
}

std::filesystem::path resolve_trainer_binary(const ExperimentConfig& config) {
    if (!config.trainer_binary.empty()) return config.trainer_binary;
    std::error_code ec;
    auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (!ec) {
        auto sibling = self.parent_path() / "ecotrain-trainer";
        if (::access(sibling.c_str(), X_OK) == 0) return sibling;
    }
    if (auto p = find_executable("ecotrain-trainer")) return *p;
    return ECOTRAIN_DEFAULT_TRAINER;
}

std::vector<std::string> trainer_command(const ExperimentConfig& config, const TrainerSpec& arch, std::size_t size,
                                         const std::string& task_arg) {
    std::vector<std::string> argv;
    if (!arch.builtin.empty()) {
        argv = {resolve_trainer_binary(config).string(), arch.builtin};
    } else {
        argv = arch.command;
    }
    argv.insert(argv.end(), {"--size", std::to_string(size), "--task", task_arg, "--seed", std::to_string(config.seed)});
    return argv;
}

}  // namespace ecotrain
