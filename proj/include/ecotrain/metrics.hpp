#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecotrain/criteria.hpp"
#include "ecotrain/telemetry.hpp"

namespace ecotrain {

struct EpochRecord {
    std::size_t epoch = 0;
    double train_acc = 0.0;
    double eval_acc = 0.0;
    /// Cumulative watt-sum at this epoch's boundary.
    double energy_up_to = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

/// One (architecture, size, criterion, task) training run.
struct RunRecord {
    std::string architecture;
    std::size_t size_multiplier = 1;
    StoppingCriterion criterion;
    std::string task;
    std::vector<EpochRecord> epochs;
    StopReason stop;
    ComponentSet component_set;

    /// Checks contiguity, accuracy ranges, energy monotonicity and stop
    /// consistency. Throws InvariantError.
    void validate() const;

    /// Display name in the `LeNet-3` style.
    std::string model_name() const;

    bool operator==(const RunRecord&) const = default;
};

enum class EfficiencyLevel { per_epoch, per_size_mean, per_criterion_mean };

std::string_view to_string(EfficiencyLevel level);

/// Accuracy per watt-sum.
struct EfficiencyValue {
    double value = 0.0;
    EfficiencyLevel level = EfficiencyLevel::per_epoch;

    bool operator==(const EfficiencyValue&) const = default;
};

/// Eval accuracy at `epoch` divided by the cumulative watt-sum at that
/// epoch. Throws UndefinedEfficiency when no energy has been recorded.
EfficiencyValue efficiency_at_epoch(const RunRecord& run, std::size_t epoch);

/// Efficiency at the run's last recorded epoch.
EfficiencyValue final_efficiency(const RunRecord& run);

/// Per-epoch efficiency series, one value per recorded epoch.
std::vector<double> efficiency_curve(const RunRecord& run);

/// Unweighted mean of final-epoch efficiencies over the sizes of one
/// architecture under one criterion and task.
EfficiencyValue efficiency_per_size(std::span<const RunRecord> runs);

/// Same aggregation over precomputed final efficiencies (one per size).
EfficiencyValue efficiency_per_size(std::span<const double> final_efficiencies);

/// Mean over stopping criteria of the per-size means. `weights`, when given,
/// must carry a positive weight for every criterion; the default is uniform.
EfficiencyValue efficiency_overall(const std::map<std::string, EfficiencyValue>& per_criterion,
                                   const std::map<std::string, double>& weights = {});

struct ArchitectureTask {
    std::string architecture;
    std::string task;

    auto operator<=>(const ArchitectureTask&) const = default;
};

struct EfficiencyRatio {
    /// Architecture for cross-task ratios, task for cross-architecture ratios.
    std::string group;
    std::string numerator;
    std::string denominator;
    double value = 0.0;
};

struct RatioTable {
    std::vector<EfficiencyRatio> cross_task;
    std::vector<EfficiencyRatio> cross_architecture;
};

struct RatioOptions {
    /// Labels preferred as numerator, earliest first. Pairs not covered fall
    /// back to the label with the larger efficiency in most groups.
    std::vector<std::string> numerator_order;
};

RatioTable efficiency_ratios(const std::map<ArchitectureTask, EfficiencyValue>& summary,
                             const RatioOptions& options = {});

struct AccuracyPair {
    double train = 0.0;
    double test = 0.0;
};

enum class Verdict { overtrained, not_overtrained };

std::string_view to_string(Verdict v);

struct OvertrainingRule {
    int decimals = 2;
    /// Divergence growth B counts as "comparable" to the test gain A when
    /// B >= comparable_factor * A.
    double comparable_factor = 0.5;
};

struct OvertrainingVerdict {
    std::string architecture;
    std::size_t size = 0;
    /// Test gain between the two horizons, rounded.
    double a = 0.0;
    /// Growth of the train/test gap between the two horizons, rounded.
    double b = 0.0;
    Verdict verdict = Verdict::overtrained;
};

/// Rounds half away from zero to `decimals` places.
double round_to(double v, int decimals);

OvertrainingVerdict overtraining_analysis(AccuracyPair short_horizon, AccuracyPair long_horizon,
                                          const OvertrainingRule& rule = {});

}  // namespace ecotrain
