#include "ecotrain/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "ecotrain/error.hpp"
#include "ecotrain/text.hpp"

namespace ecotrain {

std::string_view to_string(Component c) {
    switch (c) {
        case Component::gpu: return "GPU";
        case Component::cpu: return "CPU";
        case Component::ram: return "RAM";
    }
    return "?";
}

Component parse_component(std::string_view text) {
    if (text == "GPU") return Component::gpu;
    if (text == "CPU") return Component::cpu;
    if (text == "RAM") return Component::ram;
    throw InvariantError("unknown component '" + std::string(text) + "' (expected GPU, CPU or RAM)");
}

std::vector<std::string> ComponentSet::names() const {
    std::vector<std::string> out;
    for (auto c : {Component::gpu, Component::cpu, Component::ram}) {
        if (contains(c)) out.emplace_back(to_string(c));
    }
    return out;
}

// --- EnergyLedger -----------------------------------------------------------

void EnergyLedger::append(const PowerSample& sample) {
    if (!(sample.watts >= 0.0) || !std::isfinite(sample.watts)) {
        throw InvariantError("power sample must be finite and non-negative, got " +
                             format_double(sample.watts));
    }
    samples_.push_back(sample);
    cumulative_ += sample.watts;
    per_component_[static_cast<std::size_t>(sample.component)] += sample.watts;
    components_.insert(sample.component);
}

void EnergyLedger::mark_epoch(std::size_t epoch) {
    if (!marks_.empty() && epoch <= marks_.rbegin()->first) {
        throw InvariantError("epoch mark " + std::to_string(epoch) +
                             " does not follow previously marked epoch " +
                             std::to_string(marks_.rbegin()->first));
    }
    marks_.emplace(epoch, EpochMark{samples_.size(), cumulative_});
}

double EnergyLedger::energy_up_to(std::size_t epoch) const {
    auto it = marks_.find(epoch);
    if (it == marks_.end()) {
        throw InvariantError("epoch " + std::to_string(epoch) + " has not been marked");
    }
    return it->second.watt_sum;
}

std::optional<std::size_t> EnergyLedger::last_marked_epoch() const {
    if (marks_.empty()) return std::nullopt;
    return marks_.rbegin()->first;
}

double EnergyLedger::joules(const std::array<std::chrono::milliseconds, 3>& interval_by_component) const {
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        total += per_component_[i] * (static_cast<double>(interval_by_component[i].count()) / 1000.0);
    }
    return total;
}

// --- ConcurrentLedger -------------------------------------------------------

void ConcurrentLedger::append(const PowerSample& sample) {
    std::lock_guard lock(mutex_);
    ledger_.append(sample);
}

void ConcurrentLedger::mark_epoch(std::size_t epoch) {
    std::lock_guard lock(mutex_);
    ledger_.mark_epoch(epoch);
}

double ConcurrentLedger::energy_up_to(std::size_t epoch) const {
    std::lock_guard lock(mutex_);
    return ledger_.energy_up_to(epoch);
}

double ConcurrentLedger::cumulative() const {
    std::lock_guard lock(mutex_);
    return ledger_.cumulative();
}

std::size_t ConcurrentLedger::sample_count() const {
    std::lock_guard lock(mutex_);
    return ledger_.sample_count();
}

EnergyLedger ConcurrentLedger::snapshot() const {
    std::lock_guard lock(mutex_);
    return ledger_;
}

// --- Source configuration ---------------------------------------------------

std::string_view to_string(SourceKind k) {
    switch (k) {
        case SourceKind::trace_replay: return "trace_replay";
        case SourceKind::os_cpu_counter: return "os_cpu_counter";
        case SourceKind::gpu_counter: return "gpu_counter";
        case SourceKind::constant: return "constant";
    }
    return "?";
}

SourceKind parse_source_kind(std::string_view text) {
    if (text == "trace_replay") return SourceKind::trace_replay;
    if (text == "os_cpu_counter") return SourceKind::os_cpu_counter;
    if (text == "gpu_counter") return SourceKind::gpu_counter;
    if (text == "constant") return SourceKind::constant;
    throw ValidationError("telemetry.kind", "unknown source kind '" + std::string(text) + "'");
}

void TelemetrySourceConfig::validate() const {
    if (sample_interval.count() <= 0) {
        throw ValidationError("telemetry.interval_ms", "sample_interval must be > 0");
    }
    switch (kind) {
        case SourceKind::trace_replay:
            if (trace_path.empty()) throw ValidationError("telemetry.path", "trace_replay requires a trace path");
            break;
        case SourceKind::constant:
            if (!(constant_watts >= 0.0) || !std::isfinite(constant_watts)) {
                throw ValidationError("telemetry.watts", "constant watts must be finite and >= 0");
            }
            break;
        case SourceKind::os_cpu_counter:
        case SourceKind::gpu_counter:
            break;
    }
}

// --- Trace files ------------------------------------------------------------

namespace {

constexpr std::string_view trace_header = "timestamp_ms,component,watts";

}  // namespace

std::vector<PowerSample> parse_trace(std::string_view text, const std::string& source_name) {
    std::vector<PowerSample> out;
    std::array<std::optional<std::int64_t>, 3> last_ts{};
    std::size_t line_no = 0;
    bool saw_header = false;
    for (auto line : split_lines(text)) {
        ++line_no;
        if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
        if (trim(line).empty()) continue;
        if (!saw_header) {
            if (trim(line) != trace_header) {
                throw ParseError(source_name, line_no, "expected header '" + std::string(trace_header) + "'");
            }
            saw_header = true;
            continue;
        }
        auto fields = split(line, ',');
        if (fields.size() != 3) {
            throw ParseError(source_name, line_no, "expected 3 fields, got " + std::to_string(fields.size()));
        }
        PowerSample s;
        auto ts = parse_int(trim(fields[0]));
        if (!ts || *ts < 0) throw ParseError(source_name, line_no, "bad timestamp_ms '" + std::string(fields[0]) + "'");
        s.timestamp_ms = *ts;
        try {
            s.component = parse_component(trim(fields[1]));
        } catch (const InvariantError& e) {
            throw ParseError(source_name, line_no, e.what());
        }
        auto w = parse_double(trim(fields[2]));
        if (!w || !(*w >= 0.0) || !std::isfinite(*w)) {
            throw ParseError(source_name, line_no, "bad watts '" + std::string(fields[2]) + "'");
        }
        s.watts = *w;
        auto& prev = last_ts[static_cast<std::size_t>(s.component)];
        if (prev && s.timestamp_ms < *prev) {
            throw ParseError(source_name, line_no, "timestamps not sorted for component " +
                                                      std::string(to_string(s.component)));
        }
        prev = s.timestamp_ms;
        out.push_back(s);
    }
    if (!saw_header) throw ParseError(source_name, line_no == 0 ? 1 : line_no, "missing header");
    return out;
}

std::vector<PowerSample> read_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read trace file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_trace(buf.str(), path.string());
}

void write_trace(const std::filesystem::path& path, const std::vector<PowerSample>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write trace file " + path.string());
    out << trace_header << '\n';
    for (const auto& s : samples) {
        out << s.timestamp_ms << ',' << to_string(s.component) << ',' << format_double(s.watts) << '\n';
    }
}

// --- Sources ----------------------------------------------------------------

namespace {

using steady = std::chrono::steady_clock;

class ConstantSource final : public PowerSource {
public:
    ConstantSource(const TelemetrySourceConfig& cfg, bool deterministic)
        : interval_(cfg.sample_interval), watts_(cfg.constant_watts), component_(cfg.component),
          paced_(!deterministic), start_(steady::now()) {}

    std::optional<PowerSample> next() override {
        const std::int64_t ts = index_ * interval_.count();
        ++index_;
        if (paced_) std::this_thread::sleep_until(start_ + std::chrono::milliseconds(ts));
        return PowerSample{ts, component_, watts_};
    }
    std::chrono::milliseconds interval() const override { return interval_; }
    ComponentSet components() const override {
        ComponentSet s;
        s.insert(component_);
        return s;
    }
    bool live() const override { return paced_; }

private:
    std::chrono::milliseconds interval_;
    double watts_;
    Component component_;
    bool paced_;
    steady::time_point start_;
    std::int64_t index_ = 0;
};

class TraceReplaySource final : public PowerSource {
public:
    TraceReplaySource(const TelemetrySourceConfig& cfg, bool deterministic)
        : samples_(read_trace(cfg.trace_path)), interval_(cfg.sample_interval), loop_(cfg.loop),
          paced_(!deterministic), start_(steady::now()) {
        std::stable_sort(samples_.begin(), samples_.end(),
                         [](const PowerSample& a, const PowerSample& b) { return a.timestamp_ms < b.timestamp_ms; });
        for (const auto& s : samples_) components_.insert(s.component);
        if (!samples_.empty()) period_ = samples_.back().timestamp_ms + interval_.count();
    }

    std::optional<PowerSample> next() override {
        if (samples_.empty()) return std::nullopt;
        if (pos_ == samples_.size()) {
            if (!loop_) return std::nullopt;
            pos_ = 0;
            offset_ += period_;
        }
        PowerSample s = samples_[pos_++];
        s.timestamp_ms += offset_;
        if (paced_) std::this_thread::sleep_until(start_ + std::chrono::milliseconds(s.timestamp_ms));
        return s;
    }
    std::chrono::milliseconds interval() const override { return interval_; }
    ComponentSet components() const override { return components_; }
    bool live() const override { return paced_; }

private:
    std::vector<PowerSample> samples_;
    std::chrono::milliseconds interval_;
    bool loop_;
    bool paced_;
    steady::time_point start_;
    ComponentSet components_;
    std::size_t pos_ = 0;
    std::int64_t offset_ = 0;
    std::int64_t period_ = 0;
};

std::optional<double> read_number_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) return std::nullopt;
    std::string s;
    std::getline(in, s);
    return parse_double(trim(s));
}

std::filesystem::path default_rapl_path() { return "/sys/class/powercap/intel-rapl:0/energy_uj"; }

std::optional<std::filesystem::path> find_gpu_power_file() {
    namespace fs = std::filesystem;
    std::error_code ec;
    const fs::path drm = "/sys/class/drm";
    if (!fs::exists(drm, ec)) return std::nullopt;
    std::vector<fs::path> found;
    for (const auto& card : fs::directory_iterator(drm, ec)) {
        const auto hwmon = card.path() / "device" / "hwmon";
        if (!fs::exists(hwmon, ec)) continue;
        for (const auto& h : fs::directory_iterator(hwmon, ec)) {
            for (const char* name : {"power1_average", "power1_input"}) {
                if (fs::exists(h.path() / name, ec)) found.push_back(h.path() / name);
            }
        }
    }
    if (found.empty()) return std::nullopt;
    std::sort(found.begin(), found.end());
    return found.front();
}

/// Cumulative energy counter (RAPL energy_uj): power is the counter delta
/// over the elapsed time between two reads.
class EnergyCounterSource final : public PowerSource {
public:
    EnergyCounterSource(std::filesystem::path path, std::chrono::milliseconds interval)
        : path_(std::move(path)), interval_(interval), start_(steady::now()) {
        auto first = read_number_file(path_);
        if (!first) throw CounterUnavailable(path_.string());
        last_value_ = *first;
        last_time_ = steady::now();
        if (auto range = read_number_file(path_.parent_path() / "max_energy_range_uj")) range_ = *range;
    }

    std::optional<PowerSample> next() override {
        ++ticks_;
        std::this_thread::sleep_until(start_ + ticks_ * interval_);
        auto v = read_number_file(path_);
        if (!v) return std::nullopt;
        const auto now = steady::now();
        double delta = *v - last_value_;
        if (delta < 0.0) delta += range_;
        const double seconds = std::chrono::duration<double>(now - last_time_).count();
        last_value_ = *v;
        last_time_ = now;
        const double watts = seconds > 0.0 ? std::max(0.0, delta * 1e-6 / seconds) : 0.0;
        const auto ts = std::chrono::duration_cast<std::chrono::milliseconds>(now - start_).count();
        return PowerSample{ts, Component::cpu, watts};
    }
    std::chrono::milliseconds interval() const override { return interval_; }
    ComponentSet components() const override {
        ComponentSet s;
        s.insert(Component::cpu);
        return s;
    }
    bool live() const override { return true; }

private:
    std::filesystem::path path_;
    std::chrono::milliseconds interval_;
    steady::time_point start_;
    steady::time_point last_time_;
    double last_value_ = 0.0;
    double range_ = 0.0;
    std::int64_t ticks_ = 0;
};

/// Instantaneous power gauge in microwatts (hwmon power1_*).
class PowerGaugeSource final : public PowerSource {
public:
    PowerGaugeSource(std::filesystem::path path, std::chrono::milliseconds interval)
        : path_(std::move(path)), interval_(interval), start_(steady::now()) {
        if (!read_number_file(path_)) throw CounterUnavailable(path_.string());
    }

    std::optional<PowerSample> next() override {
        std::this_thread::sleep_until(start_ + ticks_ * interval_);
        ++ticks_;
        auto v = read_number_file(path_);
        if (!v) return std::nullopt;
        const auto ts =
            std::chrono::duration_cast<std::chrono::milliseconds>(steady::now() - start_).count();
        return PowerSample{ts, Component::gpu, std::max(0.0, *v * 1e-6)};
    }
    std::chrono::milliseconds interval() const override { return interval_; }
    ComponentSet components() const override {
        ComponentSet s;
        s.insert(Component::gpu);
        return s;
    }
    bool live() const override { return true; }

private:
    std::filesystem::path path_;
    std::chrono::milliseconds interval_;
    steady::time_point start_;
    std::int64_t ticks_ = 0;
};

std::filesystem::path resolve_counter_path(const TelemetrySourceConfig& cfg) {
    if (!cfg.counter_path.empty()) return cfg.counter_path;
    if (cfg.kind == SourceKind::os_cpu_counter) return default_rapl_path();
    if (auto p = find_gpu_power_file()) return *p;
    throw CounterUnavailable("no GPU power gauge found under /sys/class/drm");
}

}  // namespace

std::unique_ptr<PowerSource> open_source(const TelemetrySourceConfig& config, bool deterministic) {
    config.validate();
    switch (config.kind) {
        case SourceKind::constant:
            return std::make_unique<ConstantSource>(config, deterministic);
        case SourceKind::trace_replay:
            if (!std::filesystem::exists(config.trace_path)) {
                throw Error("trace file not found: " + config.trace_path.string());
            }
            return std::make_unique<TraceReplaySource>(config, deterministic);
        case SourceKind::os_cpu_counter: {
            auto path = resolve_counter_path(config);
            if (!std::filesystem::exists(path)) throw CounterUnavailable(path.string());
            return std::make_unique<EnergyCounterSource>(path, config.sample_interval);
        }
        case SourceKind::gpu_counter: {
            auto path = resolve_counter_path(config);
            if (!std::filesystem::exists(path)) throw CounterUnavailable(path.string());
            return std::make_unique<PowerGaugeSource>(path, config.sample_interval);
        }
    }
    throw Error("unreachable source kind");
}

std::optional<std::string> probe_source(const TelemetrySourceConfig& config) {
    try {
        config.validate();
        switch (config.kind) {
            case SourceKind::constant:
                return std::nullopt;
            case SourceKind::trace_replay:
                if (!std::filesystem::exists(config.trace_path)) {
                    return "trace file not found: " + config.trace_path.string();
                }
                read_trace(config.trace_path);
                return std::nullopt;
            case SourceKind::os_cpu_counter:
            case SourceKind::gpu_counter: {
                auto path = resolve_counter_path(config);
                if (!read_number_file(path)) return CounterUnavailable(path.string()).what();
                return std::nullopt;
            }
        }
    } catch (const std::exception& e) {
        return std::string(e.what());
    }
    return std::nullopt;
}

}  // namespace ecotrain
