#include "ecotrain/summary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "ecotrain/error.hpp"
#include "ecotrain/text.hpp"

namespace ecotrain {

SummaryOptions SummaryOptions::from(const ReportOptions& report) {
    SummaryOptions o;
    o.overall_criteria = report.overall_criteria;
    o.criterion_weights = report.criterion_weights;
    o.ratios.numerator_order = report.numerator_order;
    o.short_horizon = report.short_horizon;
    o.long_horizon = report.long_horizon;
    o.overtraining = report.overtraining;
    return o;
}

std::optional<double> EfficiencyReport::overall_eff(const std::string& architecture, const std::string& task) const {
    for (const auto& r : overall) {
        if (r.architecture == architecture && r.task == task) return r.eff;
    }
    return std::nullopt;
}

std::optional<double> EfficiencyReport::criterion_eff(const std::string& task, const std::string& criterion,
                                                      const std::string& architecture) const {
    for (const auto& r : per_criterion) {
        if (r.task == task && r.criterion == criterion && r.architecture == architecture) return r.eff;
    }
    return std::nullopt;
}

std::optional<double> EfficiencyReport::ratio(const std::string& scope, const std::string& group,
                                              const std::string& numerator, const std::string& denominator) const {
    for (const auto& r : ratios) {
        if (r.scope == scope && r.ratio.group == group && r.ratio.numerator == numerator &&
            r.ratio.denominator == denominator) {
            return r.ratio.value;
        }
    }
    return std::nullopt;
}

double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw InvariantError("quantile of an empty set");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

template <typename T>
void remember(std::vector<T>& order, const T& v) {
    if (std::find(order.begin(), order.end(), v) == order.end()) order.push_back(v);
}

/// Per-criterion means, overall means, ratios and distributions over the
/// rows that carry an efficiency.
void aggregate(EfficiencyReport& report, const SummaryOptions& options,
               const std::vector<std::string>& default_overall) {
    using Key = std::tuple<std::string, std::string, std::string>;  // task, criterion, architecture
    std::vector<Key> order;
    std::map<Key, std::vector<double>> groups;
    std::map<Key, std::set<std::size_t>> sizes;
    for (const auto& r : report.runs) {
        if (!r.eff) continue;
        Key k{r.task, r.criterion, r.architecture};
        remember(order, k);
        if (!sizes[k].insert(r.size).second) {
            report.warnings.push_back("duplicate size " + std::to_string(r.size) + " for " + r.architecture + " / " +
                                      r.task + " / " + r.criterion + "; later row ignored");
            continue;
        }
        groups[k].push_back(*r.eff);
    }

    for (const auto& k : order) {
        const auto& effs = groups[k];
        const auto mean = efficiency_per_size(std::span<const double>(effs));
        report.per_criterion.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), mean.value, effs.size()});

        std::vector<double> sorted = effs;
        std::sort(sorted.begin(), sorted.end());
        DistributionRow d{std::get<0>(k), std::get<1>(k), std::get<2>(k), sorted.size()};
        d.min = sorted.front();
        d.max = sorted.back();
        d.q1 = quantile(sorted, 0.25);
        d.median = quantile(sorted, 0.5);
        d.q3 = quantile(sorted, 0.75);
        d.mean = mean.value;
        report.distributions.push_back(d);
    }

    std::vector<std::pair<std::string, std::string>> arch_task;
    for (const auto& r : report.per_criterion) remember(arch_task, {r.architecture, r.task});
    const auto& wanted = options.overall_criteria.empty() ? default_overall : options.overall_criteria;
    for (const auto& [arch, task] : arch_task) {
        std::map<std::string, EfficiencyValue> per;
        std::map<std::string, double> weights;
        std::vector<std::string> used;
        for (const auto& c : wanted) {
            auto v = report.criterion_eff(task, c, arch);
            if (!v) {
                report.warnings.push_back("overall " + arch + " / " + task + ": no runs for criterion " + c);
                continue;
            }
            per[c] = {*v, EfficiencyLevel::per_size_mean};
            used.push_back(c);
            if (!options.criterion_weights.empty()) {
                auto w = options.criterion_weights.find(c);
                weights[c] = w == options.criterion_weights.end() ? 0.0 : w->second;
            }
        }
        if (per.empty()) continue;
        try {
            report.overall.push_back({arch, task, efficiency_overall(per, weights).value, used});
        } catch (const InvariantError& e) {
            report.warnings.push_back("overall " + arch + " / " + task + ": " + e.what());
        }
    }

    auto add_ratios = [&](const std::string& scope, const std::map<ArchitectureTask, EfficiencyValue>& summary,
                          bool warn) {
        std::set<std::string> archs, tasks;
        for (const auto& [k, _] : summary) {
            archs.insert(k.architecture);
            tasks.insert(k.task);
        }
        if (archs.size() < 2 && tasks.size() < 2) {
            if (warn) report.warnings.push_back("ratios skipped: need two architectures or two tasks");
            return;
        }
        try {
            const auto table = efficiency_ratios(summary, options.ratios);
            for (const auto& r : table.cross_architecture) report.ratios.push_back({scope, "cross_architecture", r});
            for (const auto& r : table.cross_task) report.ratios.push_back({scope, "cross_task", r});
        } catch (const UndefinedEfficiency& e) {
            report.warnings.push_back("ratios for " + scope + ": " + e.what());
        }
    };

    std::map<ArchitectureTask, EfficiencyValue> overall_map;
    for (const auto& r : report.overall) overall_map[{r.architecture, r.task}] = {r.eff, EfficiencyLevel::per_criterion_mean};
    if (!overall_map.empty()) add_ratios("overall", overall_map, true);

    std::vector<std::string> criteria;
    for (const auto& r : report.per_criterion) remember(criteria, r.criterion);
    for (const auto& c : criteria) {
        std::map<ArchitectureTask, EfficiencyValue> m;
        for (const auto& r : report.per_criterion) {
            if (r.criterion == c) m[{r.architecture, r.task}] = {r.eff, EfficiencyLevel::per_size_mean};
        }
        add_ratios(c, m, false);
    }
}

}  // namespace

EfficiencyReport summarize(const std::vector<RunLedgerEntry>& entries, const SummaryOptions& options) {
    EfficiencyReport report;
    if (entries.empty()) {
        report.warnings.push_back("ledger is empty; nothing to summarize");
        return report;
    }

    std::map<std::string, const RunLedgerEntry*> latest;
    std::set<std::string> hashes;
    for (const auto& e : entries) {
        auto& slot = latest[e.cell_id];
        if (!slot || e.attempt >= slot->attempt) slot = &e;
    }
    std::vector<const RunLedgerEntry*> chosen;
    for (const auto& [_, e] : latest) {
        chosen.push_back(e);
        hashes.insert(e->config_hash);
    }
    std::sort(chosen.begin(), chosen.end(), [](const auto* a, const auto* b) {
        return std::tuple(a->record.task, a->record.criterion.name, a->record.architecture, a->record.size_multiplier) <
               std::tuple(b->record.task, b->record.criterion.name, b->record.architecture, b->record.size_multiplier);
    });
    if (hashes.size() == 1) {
        report.config_hash = *hashes.begin();
    } else {
        report.warnings.push_back("ledger mixes " + std::to_string(hashes.size()) + " configurations");
    }

    std::vector<std::string> default_overall;
    std::map<std::tuple<std::string, std::string, std::size_t, std::string>, const RunLedgerEntry*> complete;
    for (const auto* e : chosen) {
        const auto& rec = e->record;
        PerRunRow row;
        row.task = rec.task;
        row.criterion = rec.criterion.name;
        row.architecture = rec.architecture;
        row.size = rec.size_multiplier;
        row.run_id = e->run_id;
        row.status = std::string(to_string(e->status));
        row.epochs = rec.epochs.size();
        row.stop = e->has_stop ? std::string(to_string(rec.stop.kind)) : "";
        if (!rec.epochs.empty()) {
            row.train_acc = rec.epochs.back().train_acc;
            row.eval_acc = rec.epochs.back().eval_acc;
            row.watt_sum = rec.epochs.back().energy_up_to;
        }
        row.joules = e->joules_total;
        row.note = e->failure;
        report.run_ids.push_back(e->run_id);

        if (e->status == RunStatus::complete) {
            try {
                rec.validate();
                row.eff = final_efficiency(rec).value;
                remember(default_overall, rec.criterion.name);
                complete[{rec.task, rec.architecture, rec.size_multiplier, rec.criterion.name}] = e;
                for (std::size_t i = 0; i < rec.epochs.size(); ++i) {
                    if (rec.epochs[i].energy_up_to > 0.0) {
                        report.curves.push_back({e->run_id, rec.task, rec.criterion.name, rec.architecture,
                                                 rec.size_multiplier, rec.epochs[i],
                                                 efficiency_at_epoch(rec, i).value});
                    }
                }
            } catch (const Error& ex) {
                row.note = ex.what();
                report.warnings.push_back(e->run_id + ": " + ex.what());
            }
        } else {
            report.warnings.push_back(e->run_id + " is " + row.status + ": " + e->failure);
        }
        report.runs.push_back(std::move(row));
    }
    std::sort(default_overall.begin(), default_overall.end());

    aggregate(report, options, default_overall);

    if (!options.short_horizon.empty() && !options.long_horizon.empty()) {
        for (const auto& [key, e] : complete) {
            const auto& [task, arch, size, crit] = key;
            if (crit != options.short_horizon) continue;
            auto other = complete.find({task, arch, size, options.long_horizon});
            if (other == complete.end()) {
                report.warnings.push_back("overtraining: no " + options.long_horizon + " run for " + arch + "-" +
                                          std::to_string(size) + " / " + task);
                continue;
            }
            const auto& s = e->record.epochs.back();
            const auto& l = other->second->record.epochs.back();
            OvertrainingRow row{task, arch, size, {s.train_acc, s.eval_acc}, {l.train_acc, l.eval_acc}, {}};
            row.verdict = overtraining_analysis(row.short_horizon, row.long_horizon, options.overtraining);
            row.verdict.architecture = arch;
            row.verdict.size = size;
            report.overtraining.push_back(row);
        }
    }
    return report;
}

EfficiencyReport summarize_fixtures(const FixtureSet& fixtures, const SummaryOptions& options) {
    EfficiencyReport report;
    report.source = fixtures.directory.string();
    std::vector<std::string> default_overall;
    for (const auto& t : fixtures.tables) {
        remember(default_overall, t.criterion);
        for (const auto& r : t.rows) {
            PerRunRow row;
            row.task = t.task;
            row.criterion = t.criterion;
            row.architecture = r.architecture;
            row.size = r.size;
            row.run_id = t.task + "/" + t.criterion + "/" + r.model;
            row.status = "fixture";
            row.epochs = r.epochs;
            row.eval_acc = r.acc;
            row.watt_sum = r.watt_sum;
            row.eff = r.eff;
            row.note = r.anomaly;
            if (!r.anomaly.empty()) report.anomalies.push_back(row.run_id + ": " + r.anomaly);
            const double err = r.round_trip_error();
            if (err > round_trip_tolerance && r.anomaly.empty()) {
                report.warnings.push_back(row.run_id + ": acc / watt_sum differs from printed eff by " +
                                          format_fixed(100.0 * err, 1) + "%");
            }
            report.run_ids.push_back(row.run_id);
            report.runs.push_back(std::move(row));
        }
    }

    aggregate(report, options, default_overall);

    for (const auto& m : fixtures.printed_means) {
        auto v = report.criterion_eff(m.task, m.criterion, m.architecture);
        if (!v) {
            report.warnings.push_back("printed mean " + m.architecture + " / " + m.task + " / " + m.criterion +
                                      " has no matching runs");
        } else if (std::abs(*v - m.eff) > 0.01e-6 + 1e-15) {
            report.warnings.push_back("mean " + m.architecture + " / " + m.task + " / " + m.criterion + " is " +
                                      format_scientific(*v) + ", printed " + format_scientific(m.eff));
        }
    }

    // architecture-level values for criteria without per-run tables
    std::vector<std::string> extra;
    for (const auto& a : fixtures.aggregates) {
        report.per_criterion.push_back({a.task, a.criterion, a.architecture, a.eff, 0});
        remember(extra, a.criterion);
    }
    for (const auto& c : extra) {
        std::map<ArchitectureTask, EfficiencyValue> m;
        for (const auto& a : fixtures.aggregates) {
            if (a.criterion == c) m[{a.architecture, a.task}] = {a.eff, EfficiencyLevel::per_criterion_mean};
        }
        try {
            const auto table = efficiency_ratios(m, options.ratios);
            for (const auto& r : table.cross_architecture) report.ratios.push_back({c, "cross_architecture", r});
            for (const auto& r : table.cross_task) report.ratios.push_back({c, "cross_task", r});
        } catch (const Error& e) {
            report.warnings.push_back("ratios for " + c + ": " + e.what());
        }
    }

    for (const auto& o : fixtures.overtraining) {
        OvertrainingRow row{o.task, o.architecture, o.size, o.short_horizon, o.long_horizon, {}};
        row.verdict = overtraining_analysis(o.short_horizon, o.long_horizon, options.overtraining);
        row.verdict.architecture = o.architecture;
        row.verdict.size = o.size;
        if (std::abs(row.verdict.a - o.printed_a) > 1e-9 || std::abs(row.verdict.b - o.printed_b) > 1e-9) {
            report.warnings.push_back("overtraining " + o.model + " / " + o.task + ": computed A=" +
                                      format_fixed(row.verdict.a, 2) + " B=" + format_fixed(row.verdict.b, 2) +
                                      ", printed A=" + format_fixed(o.printed_a, 2) +
                                      " B=" + format_fixed(o.printed_b, 2));
        }
        report.overtraining.push_back(row);
    }
    return report;
}

}  // namespace ecotrain
