#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecotrain/config.hpp"
#include "ecotrain/fixtures.hpp"
#include "ecotrain/ledger.hpp"
#include "ecotrain/metrics.hpp"

namespace ecotrain {

struct SummaryOptions {
    /// Criteria averaged into the overall value; empty means every criterion
    /// that has runs (fixtures: every criterion with per-run tables).
    std::vector<std::string> overall_criteria;
    std::map<std::string, double> criterion_weights;
    RatioOptions ratios;
    std::string short_horizon;
    std::string long_horizon;
    OvertrainingRule overtraining;

    static SummaryOptions from(const ReportOptions& report);
};

struct PerRunRow {
    std::string task;
    std::string criterion;
    std::string architecture;
    std::size_t size = 0;
    std::string run_id;
    std::string status;
    std::size_t epochs = 0;
    std::string stop;
    std::optional<double> train_acc;
    std::optional<double> eval_acc;
    double watt_sum = 0.0;
    std::optional<double> joules;
    std::optional<double> eff;
    std::string note;

    std::string model() const { return architecture + "-" + std::to_string(size); }
};

struct PerCriterionRow {
    std::string task;
    std::string criterion;
    std::string architecture;
    double eff = 0.0;
    std::size_t sizes = 0;
};

struct OverallRow {
    std::string architecture;
    std::string task;
    double eff = 0.0;
    std::vector<std::string> criteria;
};

/// Scope is "overall" or a criterion name.
struct ScopedRatio {
    std::string scope;
    std::string kind;  // cross_task or cross_architecture
    EfficiencyRatio ratio;
};

struct CurvePoint {
    std::string run_id;
    std::string task;
    std::string criterion;
    std::string architecture;
    std::size_t size = 0;
    EpochRecord epoch;
    double eff = 0.0;
};

struct DistributionRow {
    std::string task;
    std::string criterion;
    std::string architecture;
    std::size_t n = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

struct OvertrainingRow {
    std::string task;
    std::string architecture;
    std::size_t size = 0;
    AccuracyPair short_horizon;
    AccuracyPair long_horizon;
    OvertrainingVerdict verdict;
};

struct EfficiencyReport {
    std::string source;
    std::string config_hash;
    std::vector<PerRunRow> runs;
    std::vector<PerCriterionRow> per_criterion;
    std::vector<OverallRow> overall;
    std::vector<ScopedRatio> ratios;
    std::vector<CurvePoint> curves;
    std::vector<DistributionRow> distributions;
    std::vector<OvertrainingRow> overtraining;
    std::vector<std::string> run_ids;
    std::vector<std::string> warnings;
    std::vector<std::string> anomalies;

    std::optional<double> overall_eff(const std::string& architecture, const std::string& task) const;
    std::optional<double> criterion_eff(const std::string& task, const std::string& criterion,
                                        const std::string& architecture) const;
    std::optional<double> ratio(const std::string& scope, const std::string& group, const std::string& numerator,
                                const std::string& denominator) const;
};

/// Aggregates ledger entries. For each cell only the latest attempt counts;
/// failed and degraded runs are listed but kept out of every aggregate.
EfficiencyReport summarize(const std::vector<RunLedgerEntry>& entries, const SummaryOptions& options = {});

/// Aggregates transcribed tables using each row's printed efficiency.
EfficiencyReport summarize_fixtures(const FixtureSet& fixtures, const SummaryOptions& options = {});

/// Linear-interpolation quantile of sorted values, q in [0, 1].
double quantile(const std::vector<double>& sorted, double q);

}  // namespace ecotrain
