#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ecotrain {

enum class Component : std::uint8_t { gpu = 0, cpu = 1, ram = 2 };

std::string_view to_string(Component c);
Component parse_component(std::string_view text);

/// Non-empty subset of {GPU, CPU, RAM} recorded with every run.
class ComponentSet {
public:
    ComponentSet() = default;

    void insert(Component c) { bits_ |= mask(c); }
    bool contains(Component c) const { return (bits_ & mask(c)) != 0; }
    bool empty() const { return bits_ == 0; }
    ComponentSet& operator|=(ComponentSet other) {
        bits_ |= other.bits_;
        return *this;
    }
    bool operator==(const ComponentSet&) const = default;

    /// Canonical names in GPU, CPU, RAM order.
    std::vector<std::string> names() const;

private:
    static std::uint8_t mask(Component c) { return std::uint8_t(1u << static_cast<unsigned>(c)); }
    std::uint8_t bits_ = 0;
};

struct PowerSample {
    std::int64_t timestamp_ms = 0;
    Component component = Component::gpu;
    double watts = 0.0;

    bool operator==(const PowerSample&) const = default;
};

/// Ordered record of every power sample of one run plus the sample count at
/// each epoch boundary. The canonical quantity is the raw watt-sum.
class EnergyLedger {
public:
    struct EpochMark {
        std::size_t sample_count = 0;
        double watt_sum = 0.0;

        bool operator==(const EpochMark&) const = default;
    };

    void append(const PowerSample& sample);
    void mark_epoch(std::size_t epoch);

    /// Sum of watts over all samples recorded up to and including the mark
    /// of `epoch`. Throws InvariantError for unmarked epochs.
    double energy_up_to(std::size_t epoch) const;

    double cumulative() const noexcept { return cumulative_; }
    std::size_t sample_count() const noexcept { return samples_.size(); }
    const std::vector<PowerSample>& samples() const noexcept { return samples_; }
    const std::map<std::size_t, EpochMark>& epoch_marks() const noexcept { return marks_; }
    std::optional<std::size_t> last_marked_epoch() const;
    ComponentSet components() const noexcept { return components_; }

    /// Watt-sum restricted to one component.
    double component_sum(Component c) const noexcept { return per_component_[static_cast<std::size_t>(c)]; }

    /// Derived energy in joules: each component's watt-sum times its sample
    /// interval. Secondary output only; all metrics use the watt-sum.
    double joules(const std::array<std::chrono::milliseconds, 3>& interval_by_component) const;

    bool operator==(const EnergyLedger&) const = default;

private:
    std::vector<PowerSample> samples_;
    std::map<std::size_t, EpochMark> marks_;
    std::array<double, 3> per_component_{};
    double cumulative_ = 0.0;
    ComponentSet components_;
};

/// Single-writer, multi-reader wrapper used while a run is live. Sample
/// appends and epoch marks are serialized in arrival order.
class ConcurrentLedger {
public:
    void append(const PowerSample& sample);
    void mark_epoch(std::size_t epoch);
    double energy_up_to(std::size_t epoch) const;
    double cumulative() const;
    std::size_t sample_count() const;
    EnergyLedger snapshot() const;

private:
    mutable std::mutex mutex_;
    EnergyLedger ledger_;
};

enum class SourceKind { trace_replay, os_cpu_counter, gpu_counter, constant };

std::string_view to_string(SourceKind k);
SourceKind parse_source_kind(std::string_view text);

struct TelemetrySourceConfig {
    SourceKind kind = SourceKind::constant;
    std::chrono::milliseconds sample_interval{1};
    std::filesystem::path trace_path;           // trace_replay
    bool loop = false;                          // trace_replay: wrap around at end of trace
    double constant_watts = 0.0;                // constant
    Component component = Component::gpu;       // constant
    std::filesystem::path counter_path;         // optional override for counter backends

    /// Throws ValidationError naming the offending field.
    void validate() const;
};

/// A stream of power samples. Replay-style sources yield their whole
/// schedule without reference to wall-clock time; live sources block until
/// the next reading is due.
class PowerSource {
public:
    virtual ~PowerSource() = default;

    /// Next sample in stream order, or nullopt once the stream has ended.
    virtual std::optional<PowerSample> next() = 0;

    virtual std::chrono::milliseconds interval() const = 0;
    virtual ComponentSet components() const = 0;

    /// True when next() blocks on real time (live counters, paced replay).
    virtual bool live() const = 0;
};

/// Opens a source. With `deterministic` set, trace replay and constant
/// sources ignore wall-clock pacing. Counter backends throw
/// CounterUnavailable when the platform does not expose them.
std::unique_ptr<PowerSource> open_source(const TelemetrySourceConfig& config, bool deterministic);

/// Checks that a source could be opened, without starting it. Returns an
/// error message on failure.
std::optional<std::string> probe_source(const TelemetrySourceConfig& config);

/// Reads a power trace (`timestamp_ms,component,watts`). Throws ParseError
/// with the offending line number.
std::vector<PowerSample> read_trace(const std::filesystem::path& path);
std::vector<PowerSample> parse_trace(std::string_view text, const std::string& source_name = "<trace>");
void write_trace(const std::filesystem::path& path, const std::vector<PowerSample>& samples);

/// Pulls samples from a replay-style source in virtual-time windows.
class ReplayCursor {
public:
    explicit ReplayCursor(PowerSource& source) : source_(&source) {}

    /// Hands every sample with timestamp < `end_ms` to `sink`, in order.
    /// Returns false if the stream ended before reaching `end_ms`.
    template <typename Sink>
    bool drain_until(std::int64_t end_ms, Sink&& sink) {
        for (;;) {
            if (!pending_) {
                pending_ = source_->next();
                if (!pending_) return false;
            }
            if (pending_->timestamp_ms >= end_ms) return true;
            sink(*pending_);
            pending_.reset();
        }
    }

private:
    PowerSource* source_;
    std::optional<PowerSample> pending_;
};

}  // namespace ecotrain
