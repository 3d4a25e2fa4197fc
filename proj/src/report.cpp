#include "ecotrain/report.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ecotrain/csv.hpp"
#include "ecotrain/error.hpp"
#include "ecotrain/text.hpp"

namespace ecotrain {

namespace {

std::string eff(double v) { return format_scientific(v, 4); }
std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
        if (!out_) throw Error("cannot write " + path.string());
        row(header);
    }
    void row(const std::vector<std::string>& fields) { out_ << csv_line(fields); }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

}  // namespace

const std::vector<std::string>& bundle_files() {
    static const std::vector<std::string> files{"per_run.csv",     "per_criterion.csv",     "per_architecture.csv",
                                                "ratios.csv",      "efficiency_curves.csv", "distributions.csv",
                                                "overtraining.csv", "manifest.json"};
    return files;
}

void write_bundle(const EfficiencyReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        CsvFile f(dir / "per_run.csv", {"task", "criterion", "model", "architecture", "size", "run_id", "status",
                                        "epochs", "stop", "train_acc", "eval_acc", "watt_sum", "joules", "eff",
                                        "eff_arch_size", "note"});
        for (const auto& r : report.runs) {
            auto group = report.criterion_eff(r.task, r.criterion, r.architecture);
            f.row({r.task, r.criterion, r.model(), r.architecture, std::to_string(r.size), r.run_id, r.status,
                   std::to_string(r.epochs), r.stop, opt(r.train_acc), opt(r.eval_acc), format_double(r.watt_sum),
                   opt(r.joules), r.eff ? eff(*r.eff) : "", group ? eff(*group) : "", r.note});
        }
    }
    {
        CsvFile f(dir / "per_criterion.csv", {"task", "criterion", "architecture", "eff", "sizes"});
        for (const auto& r : report.per_criterion) {
            f.row({r.task, r.criterion, r.architecture, eff(r.eff), std::to_string(r.sizes)});
        }
    }
    {
        CsvFile f(dir / "per_architecture.csv", {"architecture", "task", "eff", "criteria"});
        for (const auto& r : report.overall) {
            std::string crit;
            for (const auto& c : r.criteria) crit += (crit.empty() ? "" : ";") + c;
            f.row({r.architecture, r.task, eff(r.eff), crit});
        }
    }
    {
        CsvFile f(dir / "ratios.csv", {"scope", "kind", "group", "numerator", "denominator", "ratio"});
        for (const auto& r : report.ratios) {
            f.row({r.scope, r.kind, r.ratio.group, r.ratio.numerator, r.ratio.denominator,
                   format_fixed(r.ratio.value, 3)});
        }
    }
    {
        CsvFile f(dir / "efficiency_curves.csv", {"run_id", "task", "criterion", "architecture", "size", "epoch",
                                                  "train_acc", "eval_acc", "energy_up_to", "eff"});
        for (const auto& p : report.curves) {
            f.row({p.run_id, p.task, p.criterion, p.architecture, std::to_string(p.size), std::to_string(p.epoch.epoch),
                   format_double(p.epoch.train_acc), format_double(p.epoch.eval_acc),
                   format_double(p.epoch.energy_up_to), format_scientific(p.eff, 6)});
        }
    }
    {
        CsvFile f(dir / "distributions.csv",
                  {"task", "criterion", "architecture", "n", "min", "q1", "median", "q3", "max", "mean"});
        for (const auto& d : report.distributions) {
            f.row({d.task, d.criterion, d.architecture, std::to_string(d.n), eff(d.min), eff(d.q1), eff(d.median),
                   eff(d.q3), eff(d.max), eff(d.mean)});
        }
    }
    {
        CsvFile f(dir / "overtraining.csv", {"task", "model", "architecture", "size", "train_short", "test_short",
                                             "train_long", "test_long", "a", "b", "verdict"});
        for (const auto& o : report.overtraining) {
            f.row({o.task, o.architecture + "-" + std::to_string(o.size), o.architecture, std::to_string(o.size),
                   format_double(o.short_horizon.train), format_double(o.short_horizon.test),
                   format_double(o.long_horizon.train), format_double(o.long_horizon.test), format_fixed(o.verdict.a, 2),
                   format_fixed(o.verdict.b, 2), std::string(to_string(o.verdict.verdict))});
        }
    }
    nlohmann::json manifest{{"schema_version", 1},
                            {"harness_version", std::string(harness_version)},
                            {"generated_at", utc_timestamp()},
                            {"source", report.source},
                            {"config_hash", report.config_hash},
                            {"files", bundle_files()},
                            {"run_ids", report.run_ids},
                            {"warnings", report.warnings},
                            {"anomalies", report.anomalies}};
    std::ofstream m(dir / "manifest.json");
    m << manifest.dump(2) << '\n';
    if (!m) throw Error("cannot write " + (dir / "manifest.json").string());
}

std::string render_text(const EfficiencyReport& report) {
    std::ostringstream out;
    out << "runs: " << report.runs.size() << "\n";
    if (!report.overall.empty()) {
        out << "overall efficiency (accuracy per watt-sum):\n";
        for (const auto& r : report.overall) {
            out << "  " << r.architecture << " / " << r.task << ": " << eff(r.eff) << "\n";
        }
    }
    for (const auto& r : report.ratios) {
        if (r.scope != "overall") continue;
        out << "  " << r.ratio.numerator << "/" << r.ratio.denominator << " (" << r.ratio.group
            << "): " << format_fixed(r.ratio.value, 2) << "\n";
    }
    if (!report.overtraining.empty()) {
        std::size_t over = 0;
        for (const auto& o : report.overtraining) over += o.verdict.verdict == Verdict::overtrained;
        out << "overtrained: " << over << " of " << report.overtraining.size() << "\n";
    }
    for (const auto& a : report.anomalies) out << "anomaly: " << a << "\n";
    for (const auto& w : report.warnings) out << "warning: " << w << "\n";
    return out.str();
}

}  // namespace ecotrain
