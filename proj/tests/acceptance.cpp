// Acceptance suite: one PASS/FAIL line per criterion, exit status = failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ecotrain/criteria.hpp"
#include "ecotrain/fixtures.hpp"
#include "ecotrain/ledger.hpp"
#include "ecotrain/metrics.hpp"
#include "ecotrain/orchestrator.hpp"
#include "ecotrain/report.hpp"
#include "ecotrain/summary.hpp"
#include "test_util.hpp"

using namespace ecotrain;
using clock_type = std::chrono::steady_clock;

namespace {

const std::filesystem::path published_dir = std::filesystem::path(ECOTRAIN_FIXTURES_DIR) / "published";

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    std::vector<std::string> problems;

    void fail(const std::string& why) {
        pass = false;
        if (problems.size() < 5) problems.push_back(why);
    }
};

double seconds_since(clock_type::time_point t) {
    return std::chrono::duration<double>(clock_type::now() - t).count();
}

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

// ---------------------------------------------------------------- fixtures

void overall_table(Outcome& o) {
    test_util::TempDir out;
    const auto start = clock_type::now();
    auto report = summarize_fixtures(load_fixtures(published_dir));
    write_bundle(report, out.path());
    const double took = seconds_since(start);

    const std::vector<std::tuple<std::string, std::string, double>> effs{
        {"LeNet", "MNIST", 12.86e-6}, {"BCNN", "MNIST", 2.88e-6}, {"LeNet", "CIFAR", 7.06e-6}, {"BCNN", "CIFAR", 1.36e-6}};
    for (const auto& [arch, task, want] : effs) {
        auto got = report.overall_eff(arch, task);
        if (!got) {
            o.fail("no overall value for " + arch + "/" + task);
            continue;
        }
        if (std::abs(*got - want) > 0.01e-6 + 1e-15) o.fail(arch + "/" + task + " = " + fmt(*got));
        o.detail << arch << "-" << task << " " << fmt(*got) << "; ";
    }
    const std::vector<std::tuple<std::string, std::string, std::string, double>> ratios{
        {"MNIST", "LeNet", "BCNN", 4.46}, {"CIFAR", "LeNet", "BCNN", 5.18},
        {"LeNet", "MNIST", "CIFAR", 1.82}, {"BCNN", "MNIST", "CIFAR", 2.11}};
    for (const auto& [group, num, den, want] : ratios) {
        auto got = report.ratio("overall", group, num, den);
        if (!got) {
            o.fail("no ratio " + num + "/" + den + " for " + group);
            continue;
        }
        if (std::abs(*got - want) > 0.01 + 1e-12) o.fail(num + "/" + den + " " + group + " = " + fmt(*got));
        o.detail << num << "/" << den << "@" << group << " " << fmt(*got, 4) << "; ";
    }
    if (!report.warnings.empty()) o.fail("warnings: " + report.warnings.front());
    if (took >= 1.0) o.fail("took " + fmt(took) + " s");
    o.detail << "recompute " << fmt(took * 1000, 3) << " ms";
}

void printed_means(Outcome& o) {
    auto set = load_fixtures(published_dir);
    double worst = 0.0;
    std::size_t checked = 0;
    std::size_t anomalous = 0;
    for (const auto& m : set.printed_means) {
        std::vector<double> effs;
        for (const auto& t : set.tables) {
            if (t.task != m.task || t.criterion != m.criterion) continue;
            for (const auto& r : t.rows) {
                if (r.architecture != m.architecture) continue;
                effs.push_back(r.eff);
                anomalous += !r.anomaly.empty();
            }
        }
        if (effs.empty()) {
            o.fail("no rows for " + m.task + "/" + m.criterion + "/" + m.architecture);
            continue;
        }
        const double mean = efficiency_per_size(std::span<const double>(effs)).value;
        // half a unit in the second significant digit of the printed mean
        const double tol = 0.5 * std::pow(10.0, std::floor(std::log10(m.eff)) - 1);
        const double gap = std::abs(mean - m.eff);
        worst = std::max(worst, gap / tol);
        if (gap > tol) o.fail(m.task + "/" + m.criterion + "/" + m.architecture + " mean " + fmt(mean));
        ++checked;
    }
    std::size_t round_trip_bad = 0;
    for (const auto& t : set.tables) {
        for (const auto& r : t.rows) {
            if (r.anomaly.empty() && r.round_trip_error() > round_trip_tolerance) ++round_trip_bad;
        }
    }
    if (round_trip_bad) o.fail(std::to_string(round_trip_bad) + " unannotated rows fail the acc / watt_sum round trip");
    if (checked != 16) o.fail("expected 16 printed means, checked " + std::to_string(checked));
    o.detail << checked << " means, worst gap " << fmt(worst, 2) << " of tolerance; " << anomalous
             << " annotated rows carry only their printed eff";
}

void overtraining(Outcome& o) {
    auto set = load_fixtures(published_dir);
    std::size_t exact = 0;
    std::size_t overtrained = 0;
    for (const auto& r : set.overtraining) {
        auto v = overtraining_analysis(r.short_horizon, r.long_horizon);
        const std::string id = r.task + "/" + r.model;
        if (round_to(v.a, 2) != round_to(r.printed_a, 2) || round_to(v.b, 2) != round_to(r.printed_b, 2)) {
            o.fail(id + ": A,B = " + fmt(v.a) + "," + fmt(v.b) + " printed " + fmt(r.printed_a) + "," +
                   fmt(r.printed_b));
        } else {
            ++exact;
        }
        const bool expect_over = !(r.task == "CIFAR" && r.architecture == "BCNN");
        const bool is_over = v.verdict == Verdict::overtrained;
        overtrained += is_over;
        if (is_over != expect_over) o.fail(id + " verdict " + std::string(to_string(v.verdict)));
    }
    if (set.overtraining.size() != 20) o.fail("expected 20 pairs, found " + std::to_string(set.overtraining.size()));
    o.detail << exact << "/" << set.overtraining.size() << " (A, B) pairs exact, " << overtrained
             << " overtrained (all MNIST + LeNet-CIFAR)";
}

void aggregate_flip(Outcome& o) {
    auto report = summarize_fixtures(load_fixtures(published_dir));
    const std::string scope = "fixed_epochs_100";
    auto mnist = report.ratio(scope, "MNIST", "LeNet", "BCNN");
    auto cifar = report.ratio(scope, "CIFAR", "LeNet", "BCNN");
    if (!mnist || std::abs(*mnist - 3.10) > 0.01 + 1e-12) o.fail("MNIST LeNet/BCNN " + (mnist ? fmt(*mnist) : "missing"));
    if (!cifar || std::abs(*cifar - 1.09) > 0.01 + 1e-12) o.fail("CIFAR LeNet/BCNN " + (cifar ? fmt(*cifar) : "missing"));
    auto overall_mnist = report.ratio("overall", "MNIST", "LeNet", "BCNN");
    auto overall_cifar = report.ratio("overall", "CIFAR", "LeNet", "BCNN");
    if (mnist && cifar && overall_mnist && overall_cifar && !((*mnist > *cifar) != (*overall_mnist > *overall_cifar))) {
        o.fail("100-epoch aggregation does not flip the MNIST/CIFAR ordering");
    }
    o.detail << "LeNet/BCNN MNIST " << (mnist ? fmt(*mnist) : "-") << " vs CIFAR " << (cifar ? fmt(*cifar) : "-")
             << " (all-criteria: " << (overall_mnist ? fmt(*overall_mnist) : "-") << " vs "
             << (overall_cifar ? fmt(*overall_cifar) : "-") << ")";
}

// ---------------------------------------------------------------- criteria

struct Sequence {
    std::vector<double> train;
    std::vector<double> eval;
    std::vector<double> energy;
};

Sequence random_sequence(std::mt19937_64& rng, std::size_t length) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> steps(0, 20);
    Sequence s;
    double e = 0.0;
    double acc = u(rng) * 0.5;
    for (std::size_t i = 0; i < length; ++i) {
        // coarse accuracy walk so ties and plateaus are common
        const double r = u(rng);
        if (r < 0.45) acc = std::min(1.0, acc + 0.05 * steps(rng) / 20.0);
        else if (r < 0.7) acc = std::max(0.0, acc - 0.05 * steps(rng) / 20.0);
        acc = std::round(acc * 100) / 100;
        s.eval.push_back(acc);
        s.train.push_back(std::round(std::min(1.0, acc + u(rng) * 0.1) * 100) / 100);
        if (u(rng) > 0.05) e += u(rng) * 5000.0;  // occasionally an epoch without energy
        s.energy.push_back(e);
    }
    return s;
}

struct Trace {
    std::vector<std::optional<StopReason>> decisions;
    CriterionState state;
    std::optional<StopReason> stop;
    std::size_t observed = 0;
};

Trace drive(const StoppingCriterion& c, const Sequence& s) {
    Trace t;
    for (std::size_t i = 0; i < s.eval.size(); ++i) {
        auto d = observe_epoch(t.state, c, i, s.train[i], s.eval[i], s.energy[i]);
        t.decisions.push_back(d.stop);
        ++t.observed;
        if (d.should_stop()) {
            t.stop = d.stop;
            break;
        }
    }
    return t;
}

std::size_t stop_epoch_or_inf(const Trace& t) {
    return t.stop ? t.stop->at_epoch : std::numeric_limits<std::size_t>::max();
}

void criterion_properties(Outcome& o) {
    constexpr int trials = 10'000;
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::map<std::string, int> passed;
    std::size_t budget_stops = 0;
    std::size_t early_stops = 0;

    for (int trial = 0; trial < trials; ++trial) {
        {  // fixed_epochs
            const std::size_t max_epochs = 1 + rng() % 100;
            const auto c = StoppingCriterion::fixed_epochs(max_epochs);
            const auto s = random_sequence(rng, max_epochs + rng() % 20);
            const auto a = drive(c, s);
            const auto b = drive(c, s);
            bool ok = a.decisions == b.decisions && a.state == b.state;
            ok = ok && a.observed == max_epochs && a.stop && a.stop->kind == StopKind::fixed_epochs &&
                 a.stop->at_epoch == max_epochs - 1;
            if (ok) ++passed["fixed_epochs"];
            else o.fail("fixed_epochs(" + std::to_string(max_epochs) + ") trial " + std::to_string(trial));
        }
        {  // early_stopping
            const std::size_t patience = 1 + rng() % 10;
            const auto c = StoppingCriterion::early_stopping(patience);
            const auto s = random_sequence(rng, 1 + rng() % 150);
            const auto a = drive(c, s);
            const auto b = drive(c, s);
            bool ok = a.decisions == b.decisions && a.state == b.state;
            if (a.stop) {
                ++early_stops;
                ok = ok && a.stop->kind == StopKind::early_stopping && a.stop->at_epoch >= patience;
            } else {
                ok = ok && a.observed == s.eval.size();
            }
            if (ok) ++passed["early_stopping"];
            else o.fail("early_stopping(" + std::to_string(patience) + ") trial " + std::to_string(trial));
        }
        {  // energy_budget
            const auto s = random_sequence(rng, 1 + rng() % 150);
            const double top = std::max(1.0, s.energy.back() * 1.2);
            double b1 = std::max(1e-3, u(rng) * top);
            double b2 = std::max(1e-3, u(rng) * top);
            if (b1 > b2) std::swap(b1, b2);
            const auto c1 = StoppingCriterion::energy_budget(b1);
            const auto c2 = StoppingCriterion::energy_budget(b2);
            const auto a = drive(c1, s);
            const auto again = drive(c1, s);
            const auto hi = drive(c2, s);
            bool ok = a.decisions == again.decisions && a.state == again.state;
            ok = ok && stop_epoch_or_inf(a) <= stop_epoch_or_inf(hi);
            for (const auto* t : {&a, &hi}) {
                if (!t->stop) continue;
                ++budget_stops;
                const double budget = t == &a ? b1 : b2;
                const std::size_t k = t->stop->at_epoch;
                const double spent = s.energy[k];
                const double epoch_energy = spent - (k ? s.energy[k - 1] : 0.0);
                ok = ok && t->stop->kind == StopKind::energy_budget && spent >= budget &&
                     spent - budget <= epoch_energy && t->stop->trigger_value == spent;
            }
            if (ok) ++passed["energy_budget"];
            else o.fail("energy_budget(" + fmt(b1) + ", " + fmt(b2) + ") trial " + std::to_string(trial));
        }
        {  // accuracy_bound
            const double target = std::max(0.01, std::round(u(rng) * 100) / 100);
            const auto watch = rng() % 2 ? AccuracyStream::train : AccuracyStream::eval;
            const auto c = StoppingCriterion::accuracy_bound(target, watch);
            const auto s = random_sequence(rng, 1 + rng() % 150);
            const auto a = drive(c, s);
            const auto b = drive(c, s);
            const auto& watched = watch == AccuracyStream::train ? s.train : s.eval;
            auto first = std::find_if(watched.begin(), watched.end(), [&](double v) { return v >= target; });
            bool ok = a.decisions == b.decisions && a.state == b.state;
            if (first == watched.end()) ok = ok && !a.stop;
            else ok = ok && a.stop && a.stop->at_epoch == std::size_t(first - watched.begin());
            if (ok) ++passed["accuracy_bound"];
            else o.fail("accuracy_bound(" + fmt(target) + ") trial " + std::to_string(trial));
        }
    }
    for (const auto& [name, n] : passed) o.detail << name << " " << n << "/" << trials << "; ";
    o.detail << early_stops << " early stops, " << budget_stops << " budget stops";
}

// ---------------------------------------------------------------- metrics

struct SyntheticRun {
    std::string architecture;
    std::string task;
    std::string criterion;
    std::size_t size = 0;
    std::vector<double> eval;
    std::vector<std::vector<double>> samples;  // per epoch

    RunRecord record(double scale = 1.0) const {
        RunRecord r;
        r.architecture = architecture;
        r.task = task;
        r.criterion = StoppingCriterion::fixed_epochs(100);
        r.criterion.name = criterion;
        r.size_multiplier = size;
        double running = 0.0;
        for (std::size_t e = 0; e < eval.size(); ++e) {
            for (double w : samples[e]) running += w * scale;
            r.epochs.push_back({e, eval[e], eval[e], running});
        }
        r.stop = {StopKind::trainer_exit, eval.size() - 1, double(eval.size())};
        return r;
    }

    // independent re-sum from the first sample, long double
    double oracle_eff(std::size_t epoch) const {
        long double total = 0.0L;
        for (std::size_t e = 0; e <= epoch; ++e) {
            for (double w : samples[e]) total += w;
        }
        return static_cast<double>(eval[epoch] / total);
    }
};

struct Experiment {
    std::vector<SyntheticRun> runs;
    std::vector<std::string> archs{"archA", "archB", "archC"};
    std::vector<std::string> tasks{"taskX", "taskY"};
    std::vector<std::string> criteria;
    std::size_t sizes = 0;
};

Experiment random_experiment(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Experiment x;
    x.archs.resize(2 + rng() % 2);
    x.criteria.resize(1 + rng() % 4);
    for (std::size_t i = 0; i < x.criteria.size(); ++i) x.criteria[i] = "crit" + std::to_string(i);
    x.sizes = 1 + rng() % 5;
    for (const auto& t : x.tasks) {
        for (const auto& a : x.archs) {
            for (const auto& c : x.criteria) {
                for (std::size_t s = 1; s <= x.sizes; ++s) {
                    SyntheticRun r{a, t, c, s, {}, {}};
                    const std::size_t n = 1 + rng() % 100;
                    double acc = 0.01 + u(rng) * 0.5;
                    const double scale = std::pow(10.0, u(rng) * 5);
                    for (std::size_t e = 0; e < n; ++e) {
                        const double step = u(rng);
                        if (step < 0.5) acc = std::min(1.0, acc + u(rng) * 0.1);
                        else if (step < 0.8) acc = std::max(0.01, acc - u(rng) * 0.05);
                        r.eval.push_back(acc);
                        std::vector<double> w(1 + rng() % 8);
                        for (auto& v : w) v = (0.5 + u(rng) * 300.0) * scale;
                        r.samples.push_back(std::move(w));
                    }
                    x.runs.push_back(std::move(r));
                }
            }
        }
    }
    return x;
}

struct Levels {
    std::map<std::tuple<std::string, std::string, std::string>, double> per_size;  // task, arch, crit
    std::map<ArchitectureTask, EfficiencyValue> overall;
    RatioTable ratios;
    RatioTable ordered;
};

Levels compute_levels(const Experiment& x, double scale, const RatioOptions& order) {
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<RunRecord>> groups;
    for (const auto& r : x.runs) groups[{r.task, r.architecture, r.criterion}].push_back(r.record(scale));
    Levels l;
    std::map<ArchitectureTask, std::map<std::string, EfficiencyValue>> by_crit;
    for (const auto& [key, runs] : groups) {
        auto v = efficiency_per_size(std::span<const RunRecord>(runs));
        l.per_size[key] = v.value;
        by_crit[{std::get<1>(key), std::get<0>(key)}][std::get<2>(key)] = v;
    }
    for (const auto& [at, m] : by_crit) l.overall[at] = efficiency_overall(m);
    l.ratios = efficiency_ratios(l.overall);
    l.ordered = efficiency_ratios(l.overall, order);
    return l;
}

void metric_oracle(Outcome& o) {
    std::mt19937_64 rng(777);
    std::size_t runs = 0;
    std::size_t experiments = 0;
    std::size_t values = 0;
    std::size_t plateau_pairs = 0;
    double worst = 0.0;
    auto compare = [&](double got, double want, const std::string& what) {
        ++values;
        const double rel = got == want ? 0.0 : std::abs(got - want) / std::max(std::abs(got), std::abs(want));
        worst = std::max(worst, rel);
        if (!(rel <= 1e-12)) o.fail(what + ": " + fmt(got, 17) + " vs " + fmt(want, 17));
    };

    while (runs < 1000) {
        auto x = random_experiment(rng);
        ++experiments;
        runs += x.runs.size();

        // per-epoch level and plateau decay
        for (const auto& r : x.runs) {
            const auto rec = r.record();
            rec.validate();
            const auto curve = efficiency_curve(rec);
            for (std::size_t e = 0; e < r.eval.size(); ++e) {
                compare(efficiency_at_epoch(rec, e).value, r.oracle_eff(e), "per-epoch");
                if (e + 1 < r.eval.size() && r.eval[e + 1] <= r.eval[e]) {
                    ++plateau_pairs;
                    if (!(curve[e + 1] < curve[e])) o.fail("plateau decay broken at epoch " + std::to_string(e + 1));
                }
            }
        }

        // brute-force per-size and per-criterion means
        std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> finals;
        for (const auto& r : x.runs) finals[{r.task, r.architecture, r.criterion}].push_back(r.oracle_eff(r.eval.size() - 1));
        std::map<std::tuple<std::string, std::string, std::string>, double> per_size;
        for (const auto& [k, v] : finals) {
            long double s = 0.0L;
            for (double f : v) s += f;
            per_size[k] = static_cast<double>(s / v.size());
        }
        std::map<ArchitectureTask, double> overall;
        for (const auto& t : x.tasks) {
            for (const auto& a : x.archs) {
                long double s = 0.0L;
                for (const auto& c : x.criteria) s += per_size.at({t, a, c});
                overall[{a, t}] = static_cast<double>(s / x.criteria.size());
            }
        }

        RatioOptions order;
        order.numerator_order = x.archs;
        std::shuffle(order.numerator_order.begin(), order.numerator_order.end(), rng);
        order.numerator_order.insert(order.numerator_order.end(), x.tasks.rbegin(), x.tasks.rend());
        const auto l = compute_levels(x, 1.0, order);
        for (const auto& [k, v] : per_size) compare(l.per_size.at(k), v, "per-size mean");
        for (const auto& [k, v] : overall) compare(l.overall.at(k).value, v, "overall mean");

        auto rank = [&](const std::string& label) {
            return std::find(order.numerator_order.begin(), order.numerator_order.end(), label);
        };
        for (const auto& r : l.ordered.cross_architecture) {
            if (rank(r.numerator) > rank(r.denominator)) o.fail("numerator order ignored for " + r.numerator);
            compare(r.value, overall.at({r.numerator, r.group}) / overall.at({r.denominator, r.group}), "ratio");
        }
        for (const auto& r : l.ordered.cross_task) {
            if (rank(r.numerator) > rank(r.denominator)) o.fail("numerator order ignored for " + r.numerator);
            compare(r.value, overall.at({r.group, r.numerator}) / overall.at({r.group, r.denominator}), "ratio");
        }
        const std::size_t pairs = x.archs.size() * (x.archs.size() - 1) / 2 * x.tasks.size() + x.archs.size();
        if (l.ordered.cross_architecture.size() + l.ordered.cross_task.size() != pairs) o.fail("ratio count");

        // default convention: the majority winner is the numerator
        for (const auto& r : l.ratios.cross_architecture) {
            int wins_num = 0, wins_den = 0;
            for (const auto& t : x.tasks) {
                wins_num += overall.at({r.numerator, t}) > overall.at({r.denominator, t});
                wins_den += overall.at({r.denominator, t}) > overall.at({r.numerator, t});
            }
            if (wins_num < wins_den) o.fail("minority numerator " + r.numerator + "/" + r.denominator);
            compare(r.value, overall.at({r.numerator, r.group}) / overall.at({r.denominator, r.group}), "ratio");
        }

        // scale covariance
        std::uniform_real_distribution<double> cu(-2.0, 2.0);
        const double c = std::pow(10.0, cu(rng));
        const auto scaled = compute_levels(x, c, order);
        for (const auto& r : x.runs) {
            const auto a = r.record();
            const auto b = r.record(c);
            for (std::size_t e = 0; e < r.eval.size(); ++e) {
                compare(efficiency_at_epoch(b, e).value * c, efficiency_at_epoch(a, e).value, "scaled per-epoch");
            }
        }
        for (const auto& [k, v] : l.per_size) compare(scaled.per_size.at(k) * c, v, "scaled per-size");
        for (const auto& [k, v] : l.overall) compare(scaled.overall.at(k).value * c, v.value, "scaled overall");
        auto same_ratios = [&](const RatioTable& p, const RatioTable& q) {
            if (p.cross_architecture.size() != q.cross_architecture.size() || p.cross_task.size() != q.cross_task.size()) {
                o.fail("scaled ratio table shape differs");
                return;
            }
            for (std::size_t i = 0; i < p.cross_architecture.size(); ++i) {
                if (p.cross_architecture[i].numerator != q.cross_architecture[i].numerator) o.fail("scaled ratio flipped");
                compare(q.cross_architecture[i].value, p.cross_architecture[i].value, "scaled ratio");
            }
            for (std::size_t i = 0; i < p.cross_task.size(); ++i) {
                if (p.cross_task[i].numerator != q.cross_task[i].numerator) o.fail("scaled ratio flipped");
                compare(q.cross_task[i].value, p.cross_task[i].value, "scaled ratio");
            }
        };
        same_ratios(l.ratios, scaled.ratios);
        same_ratios(l.ordered, scaled.ordered);
    }
    o.detail << runs << " runs in " << experiments << " experiments, " << values << " values, worst rel err "
             << fmt(worst, 2) << ", " << plateau_pairs << " plateau steps";
}

// ---------------------------------------------------------------- end to end

ExperimentConfig desk_config(const std::filesystem::path& out) {
    auto c = load_config(std::filesystem::path(ECOTRAIN_CONFIGS_DIR) / "desk_grid.json");
    c.output_dir = out;
    c.trainer_binary = ECOTRAIN_TRAINER_BIN;
    return c;
}

void end_to_end(Outcome& o) {
    test_util::TempDir a, b;
    const auto start = clock_type::now();
    const auto ca = desk_config(a.path());
    const auto ra = run_grid(ca);
    const double took = seconds_since(start);
    const auto cb = desk_config(b.path());
    run_grid(cb);

    const auto la = read_ledger(ledger_path(ca));
    const auto lb = read_ledger(ledger_path(cb));
    const std::size_t complete = ra.count(RunStatus::complete);
    if (la.size() != 16 || complete != 16) {
        o.fail(std::to_string(complete) + " of " + std::to_string(la.size()) + " entries complete");
        for (const auto& e : la) {
            if (e.status != RunStatus::complete) o.fail(e.run_id + ": " + e.failure);
        }
    }
    if (la.size() != lb.size()) o.fail("rerun wrote " + std::to_string(lb.size()) + " entries");
    std::size_t identical = 0;
    for (std::size_t i = 0; i < std::min(la.size(), lb.size()); ++i) {
        if (comparable_json(la[i]) == comparable_json(lb[i])) ++identical;
        else o.fail(la[i].run_id + " differs on rerun");
    }
    if (took >= 300.0) o.fail("grid took " + fmt(took) + " s");

    std::size_t surrogate_runs = 0;
    std::size_t past_plateau = 0;
    for (const auto& e : la) {
        if (e.record.architecture != "surrogate") continue;
        ++surrogate_runs;
        const auto& ep = e.record.epochs;
        std::size_t peak = 0;
        for (std::size_t i = 1; i < ep.size(); ++i) {
            if (ep[i].eval_acc > ep[peak].eval_acc) peak = i;
        }
        const auto curve = efficiency_curve(e.record);
        for (std::size_t i = peak; i + 1 < curve.size(); ++i) {
            ++past_plateau;
            if (!(curve[i + 1] < curve[i])) {
                o.fail(e.run_id + ": efficiency rises after the plateau at epoch " + std::to_string(i + 1));
                break;
            }
        }
    }
    if (past_plateau == 0) o.fail("no surrogate run reached its plateau");
    o.detail << complete << "/" << la.size() << " complete in " << fmt(took, 3) << " s, " << identical
             << " identical on rerun, " << surrogate_runs << " surrogate runs with " << past_plateau
             << " post-plateau steps all decreasing";
}

void fault_injection(Outcome& o) {
    test_util::TempDir dir;
    auto c = desk_config(dir.path());
    c.sizes = {1};
    c.criteria = {StoppingCriterion::fixed_epochs(5)};
    c.virtual_epoch = std::chrono::milliseconds(100);
    c.grace_period = std::chrono::milliseconds(1000);
    c.tasks[0].per_architecture.clear();
    c.tasks[0].arg = "blobs";
    c.architectures = {{"tinynet", "tinynet", {}},
                       {"crash", "", {FAULT_TRAINER_BIN, "crash"}},
                       {"malformed", "", {FAULT_TRAINER_BIN, "malformed"}},
                       {"skip", "", {FAULT_TRAINER_BIN, "skip"}},
                       {"good", "", {FAULT_TRAINER_BIN, "ok"}}};
    const auto r = run_grid(c);
    const auto ledger = read_ledger(ledger_path(c));
    std::map<std::string, std::vector<const RunLedgerEntry*>> by_arch;
    for (const auto& e : ledger) by_arch[e.record.architecture].push_back(&e);
    for (const std::string fault : {"crash", "malformed", "skip"}) {
        const auto& es = by_arch[fault];
        std::size_t bad = 0;
        for (const auto* e : es) bad += e->status != RunStatus::complete;
        if (es.size() != 1 || bad != 1) {
            o.fail(fault + ": " + std::to_string(bad) + " failed/degraded of " + std::to_string(es.size()));
        } else {
            o.detail << fault << " -> " << to_string(es[0]->status) << " (" << es[0]->failure << "); ";
        }
    }
    for (const std::string good : {"tinynet", "good"}) {
        const auto& es = by_arch[good];
        if (es.size() != 1 || es[0]->status != RunStatus::complete) o.fail(good + " did not complete");
    }
    if (ledger.size() != 5) o.fail("ledger has " + std::to_string(ledger.size()) + " entries");
    o.detail << r.count(RunStatus::complete) << " other cells complete";
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> checks{
        {"fixture overall efficiencies and ratios", overall_table},
        {"fixture per-criterion means", printed_means},
        {"overtraining pairs and verdicts", overtraining},
        {"100-epoch aggregate ratio flip", aggregate_flip},
        {"criterion state-machine properties", criterion_properties},
        {"metric oracle equivalence", metric_oracle},
        {"end-to-end deterministic desk grid", end_to_end},
        {"fault injection", fault_injection},
    };
    int failures = 0;
    for (const auto& [name, fn] : checks) {
        Outcome o;
        const auto start = clock_type::now();
        try {
            fn(o);
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        failures += !o.pass;
        std::printf("%s  %s  [%.2f s]  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), seconds_since(start),
                    o.detail.str().c_str());
        for (const auto& p : o.problems) std::printf("      - %s\n", p.c_str());
    }
    std::printf("%d of %zu acceptance criteria passed\n", int(checks.size()) - failures, checks.size());
    return failures;
}
