#include "ecotrain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ecotrain/error.hpp"
#include "ecotrain/text.hpp"

namespace ecotrain {

std::string_view to_string(EfficiencyLevel level) {
    switch (level) {
        case EfficiencyLevel::per_epoch: return "per_epoch";
        case EfficiencyLevel::per_size_mean: return "per_size_mean";
        case EfficiencyLevel::per_criterion_mean: return "per_criterion_mean";
    }
    return "?";
}

std::string_view to_string(Verdict v) { return v == Verdict::overtrained ? "overtrained" : "not_overtrained"; }

void RunRecord::validate() const {
    if (epochs.empty()) throw InvariantError("run " + model_name() + " has no epochs");
    double prev_energy = 0.0;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const auto& e = epochs[i];
        if (e.epoch != i) {
            throw InvariantError("run " + model_name() + ": epoch index " + std::to_string(e.epoch) +
                                 " at position " + std::to_string(i));
        }
        if (!(e.train_acc >= 0.0 && e.train_acc <= 1.0) || !(e.eval_acc >= 0.0 && e.eval_acc <= 1.0)) {
            throw InvariantError("run " + model_name() + ": accuracy outside [0, 1] at epoch " + std::to_string(i));
        }
        if (!(e.energy_up_to >= prev_energy)) {
            throw InvariantError("run " + model_name() + ": energy decreases at epoch " + std::to_string(i));
        }
        prev_energy = e.energy_up_to;
    }
    if (stop.at_epoch != epochs.back().epoch) {
        throw InvariantError("run " + model_name() + ": stop at epoch " + std::to_string(stop.at_epoch) +
                             " but last recorded epoch is " + std::to_string(epochs.back().epoch));
    }
}

std::string RunRecord::model_name() const { return architecture + "-" + std::to_string(size_multiplier); }

EfficiencyValue efficiency_at_epoch(const RunRecord& run, std::size_t epoch) {
    if (epoch >= run.epochs.size() || run.epochs[epoch].epoch != epoch) {
        throw InvariantError("run " + run.model_name() + " has no epoch " + std::to_string(epoch));
    }
    const auto& rec = run.epochs[epoch];
    if (!(rec.energy_up_to > 0.0)) {
        throw UndefinedEfficiency("efficiency undefined for " + run.model_name() + " at epoch " +
                                  std::to_string(epoch) + ": no energy recorded");
    }
    return {rec.eval_acc / rec.energy_up_to, EfficiencyLevel::per_epoch};
}

EfficiencyValue final_efficiency(const RunRecord& run) {
    if (run.epochs.empty()) throw InvariantError("run " + run.model_name() + " has no epochs");
    return efficiency_at_epoch(run, run.epochs.size() - 1);
}

std::vector<double> efficiency_curve(const RunRecord& run) {
    std::vector<double> out;
    out.reserve(run.epochs.size());
    for (std::size_t i = 0; i < run.epochs.size(); ++i) out.push_back(efficiency_at_epoch(run, i).value);
    return out;
}

EfficiencyValue efficiency_per_size(std::span<const RunRecord> runs) {
    if (runs.empty()) throw InvariantError("efficiency_per_size needs at least one run");
    const auto& first = runs.front();
    std::set<std::size_t> sizes;
    std::vector<double> finals;
    finals.reserve(runs.size());
    for (const auto& r : runs) {
        if (r.architecture != first.architecture || r.task != first.task || !(r.criterion == first.criterion)) {
            throw InvariantError("efficiency_per_size: runs mix architectures, tasks or criteria (" +
                                 first.model_name() + "/" + first.task + " vs " + r.model_name() + "/" + r.task +
                                 ")");
        }
        if (!sizes.insert(r.size_multiplier).second) {
            throw InvariantError("efficiency_per_size: duplicate size " + std::to_string(r.size_multiplier));
        }
        finals.push_back(final_efficiency(r).value);
    }
    return efficiency_per_size(std::span<const double>(finals));
}

EfficiencyValue efficiency_per_size(std::span<const double> final_efficiencies) {
    if (final_efficiencies.empty()) throw InvariantError("efficiency_per_size needs at least one value");
    double sum = 0.0;
    for (double v : final_efficiencies) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvariantError("efficiency must be finite and >= 0");
        sum += v;
    }
    return {sum / static_cast<double>(final_efficiencies.size()), EfficiencyLevel::per_size_mean};
}

EfficiencyValue efficiency_overall(const std::map<std::string, EfficiencyValue>& per_criterion,
                                   const std::map<std::string, double>& weights) {
    if (per_criterion.empty()) throw InvariantError("efficiency_overall needs at least one criterion");
    double num = 0.0;
    double den = 0.0;
    for (const auto& [name, eff] : per_criterion) {
        double w = 1.0;
        if (!weights.empty()) {
            auto it = weights.find(name);
            if (it == weights.end() || !(it->second > 0.0)) {
                throw InvariantError("efficiency_overall: missing or non-positive weight for " + name);
            }
            w = it->second;
        }
        num += w * eff.value;
        den += w;
    }
    return {num / den, EfficiencyLevel::per_criterion_mean};
}

namespace {

/// Decides which of `a` and `b` is the numerator for every group in which
/// both appear. `lookup(group, label)` returns the efficiency or nullptr.
template <typename Lookup>
bool a_is_numerator(const std::string& a, const std::string& b, const std::vector<std::string>& groups,
                    const RatioOptions& options, Lookup lookup) {
    const auto& order = options.numerator_order;
    auto pa = std::find(order.begin(), order.end(), a);
    auto pb = std::find(order.begin(), order.end(), b);
    if (pa != order.end() || pb != order.end()) return pa < pb;

    int wins_a = 0;
    int wins_b = 0;
    double log_ratio = 0.0;
    for (const auto& g : groups) {
        const EfficiencyValue* ea = lookup(g, a);
        const EfficiencyValue* eb = lookup(g, b);
        if (!ea || !eb) continue;
        if (ea->value > eb->value) ++wins_a;
        if (eb->value > ea->value) ++wins_b;
        if (ea->value > 0.0 && eb->value > 0.0) log_ratio += std::log(ea->value / eb->value);
    }
    if (wins_a != wins_b) return wins_a > wins_b;
    if (log_ratio != 0.0) return log_ratio > 0.0;
    return a <= b;
}

template <typename Lookup>
void emit_ratios(const std::vector<std::string>& labels, const std::vector<std::string>& groups,
                 const RatioOptions& options, Lookup lookup, std::vector<EfficiencyRatio>& out) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            const bool a_first = a_is_numerator(labels[i], labels[j], groups, options, lookup);
            const auto& num = a_first ? labels[i] : labels[j];
            const auto& den = a_first ? labels[j] : labels[i];
            for (const auto& g : groups) {
                const EfficiencyValue* en = lookup(g, num);
                const EfficiencyValue* ed = lookup(g, den);
                if (!en || !ed) continue;
                if (!(ed->value > 0.0)) {
                    throw UndefinedEfficiency("ratio " + num + "/" + den + " for " + g +
                                              ": denominator efficiency is zero");
                }
                out.push_back({g, num, den, en->value / ed->value});
            }
        }
    }
}

}  // namespace

RatioTable efficiency_ratios(const std::map<ArchitectureTask, EfficiencyValue>& summary,
                             const RatioOptions& options) {
    std::vector<std::string> archs;
    std::vector<std::string> tasks;
    for (const auto& [key, _] : summary) {
        if (std::find(archs.begin(), archs.end(), key.architecture) == archs.end()) archs.push_back(key.architecture);
        if (std::find(tasks.begin(), tasks.end(), key.task) == tasks.end()) tasks.push_back(key.task);
    }
    if (archs.size() < 2 && tasks.size() < 2) {
        throw InvariantError("efficiency_ratios needs at least two architectures or two tasks");
    }

    RatioTable table;
    // cross-task: groups are architectures, labels are tasks
    emit_ratios(tasks, archs, options,
                [&](const std::string& arch, const std::string& task) -> const EfficiencyValue* {
                    auto it = summary.find({arch, task});
                    return it == summary.end() ? nullptr : &it->second;
                },
                table.cross_task);
    emit_ratios(archs, tasks, options,
                [&](const std::string& task, const std::string& arch) -> const EfficiencyValue* {
                    auto it = summary.find({arch, task});
                    return it == summary.end() ? nullptr : &it->second;
                },
                table.cross_architecture);
    return table;
}

double round_to(double v, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(v * scale) / scale;
}

OvertrainingVerdict overtraining_analysis(AccuracyPair short_horizon, AccuracyPair long_horizon,
                                          const OvertrainingRule& rule) {
    for (double v : {short_horizon.train, short_horizon.test, long_horizon.train, long_horizon.test}) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InvariantError("overtraining_analysis: accuracy " + format_double(v) + " outside [0, 1]");
        }
    }
    if (rule.decimals < 0 || !(rule.comparable_factor >= 0.0)) {
        throw InvariantError("overtraining_analysis: invalid rule parameters");
    }
    const double gain = long_horizon.test - short_horizon.test;
    const double divergence =
        (long_horizon.train - long_horizon.test) - (short_horizon.train - short_horizon.test);

    const double scale = std::pow(10.0, rule.decimals);
    const double a_units = std::round(gain * scale);
    const double b_units = std::round(divergence * scale);

    OvertrainingVerdict v;
    v.a = a_units / scale;
    v.b = b_units / scale;
    const bool no_gain = a_units <= 0.0;
    const bool comparable = b_units + 1e-9 >= rule.comparable_factor * a_units;
    v.verdict = (no_gain || comparable) ? Verdict::overtrained : Verdict::not_overtrained;
    return v;
}

}  // namespace ecotrain
