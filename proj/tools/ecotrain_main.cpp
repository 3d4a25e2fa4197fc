#include <CLI11.hpp>
#include <iostream>

#include "ecotrain/config.hpp"
#include "ecotrain/error.hpp"
#include "ecotrain/fixtures.hpp"
#include "ecotrain/orchestrator.hpp"
#include "ecotrain/process.hpp"
#include "ecotrain/report.hpp"
#include "ecotrain/summary.hpp"

using namespace ecotrain;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_invalid = 1;
constexpr int exit_partial = 2;

std::vector<ValidationError> diagnose(const std::filesystem::path& path) {
    ExperimentConfig config;
    try {
        config = load_config(path);
        apply_overrides(config, overrides_from_env());
    } catch (const ValidationError& e) {
        return {e};
    } catch (const ParseError& e) {
        return {ValidationError("line " + std::to_string(e.line()), e.what())};
    }
    auto problems = config.check();
    for (std::size_t i = 0; i < config.telemetry.size(); ++i) {
        if (auto why = probe_source(config.telemetry[i])) {
            problems.emplace_back("telemetry[" + std::to_string(i) + "]", *why);
        }
    }
    for (std::size_t i = 0; i < config.architectures.size(); ++i) {
        const auto& a = config.architectures[i];
        const std::string field = "architectures[" + std::to_string(i) + "]";
        if (!a.builtin.empty()) {
            auto bin = resolve_trainer_binary(config);
            if (!find_executable(bin.string())) {
                problems.emplace_back(field + ".builtin", "bundled trainer not found at '" + bin.string() + "'");
            }
        } else if (!a.command.empty() && !find_executable(a.command[0])) {
            problems.emplace_back(field + ".command", "'" + a.command[0] + "' is not an executable");
        }
    }
    return problems;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Measure how much accuracy neural network training buys per unit of energy"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run the experiment grid and write a report");
    std::string run_config;
    std::string output_dir;
    std::int64_t seed = 0;
    bool deterministic = false;
    bool resume = false;
    bool quiet = false;
    run->add_option("config", run_config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    auto* out_opt = run->add_option("--output-dir", output_dir, "where the ledger and report go");
    auto* seed_opt = run->add_option("--seed", seed, "seed passed to every trainer");
    auto* det_flag = run->add_flag("--deterministic", deterministic, "virtual clock and replayed telemetry");
    run->add_flag("--resume", resume, "continue an existing ledger, skipping complete cells");
    run->add_flag("-q,--quiet", quiet, "no per-cell progress lines");

    auto* recompute = app.add_subcommand("recompute", "rebuild the report from a ledger or a fixture directory");
    std::string source;
    std::string report_dir;
    std::string recompute_config;
    std::vector<std::string> numerator_order;
    std::vector<std::string> overall_criteria;
    double comparable_factor = -1.0;
    recompute->add_option("source", source, "ledger.jsonl or fixture directory")->required()->check(CLI::ExistingPath);
    recompute->add_option("--out", report_dir, "report directory (default: report/ next to the ledger)");
    recompute->add_option("--config", recompute_config, "take report options from this config")
        ->check(CLI::ExistingFile);
    recompute->add_option("--numerator-order", numerator_order, "labels preferred as ratio numerators")
        ->delimiter(',');
    recompute->add_option("--overall-criteria", overall_criteria, "criteria averaged into the overall value")
        ->delimiter(',');
    recompute->add_option("--comparable-factor", comparable_factor, "overtraining: B counts when B >= factor * A")
        ->check(CLI::NonNegativeNumber);

    auto* validate = app.add_subcommand("validate", "check a config without running anything");
    std::string validate_config;
    validate->add_option("config", validate_config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) {
            auto problems = diagnose(validate_config);
            if (problems.empty()) {
                std::cout << "ok\n";
                return exit_ok;
            }
            for (const auto& p : problems) std::cout << p.field() << ": " << p.message() << "\n";
            return exit_invalid;
        }

        if (*run) {
            ExperimentConfig config;
            try {
                config = load_config(run_config);
                ConfigOverrides cli;
                if (*out_opt) cli.output_dir = output_dir;
                if (*seed_opt) cli.seed = seed;
                if (*det_flag) cli.deterministic = true;
                apply_overrides(config, overrides_from_env());
                apply_overrides(config, cli);
                config.validate();
            } catch (const ValidationError& e) {
                std::cerr << "invalid config: " << e.what() << "\n";
                return exit_invalid;
            } catch (const ParseError& e) {
                std::cerr << "invalid config: " << e.what() << "\n";
                return exit_invalid;
            }
            GridOptions options;
            options.resume = resume;
            const std::size_t total = enumerate_cells(config).size();
            std::size_t done = 0;
            if (!quiet) {
                options.on_entry = [&](const RunLedgerEntry& e) {
                    ++done;
                    std::cerr << "[" << done << "] " << e.run_id << ": " << to_string(e.status);
                    if (!e.failure.empty()) std::cerr << " (" << e.failure << ")";
                    std::cerr << "\n";
                };
            }
            auto result = run_grid(config, options);
            if (!quiet && result.skipped > 0) {
                std::cerr << "skipped " << result.skipped << " of " << total << " cells already complete\n";
            }
            auto report = summarize(read_ledger(ledger_path(config)), SummaryOptions::from(config.report));
            report.source = ledger_path(config).string();
            write_bundle(report, config.output_dir / "report");
            std::cout << render_text(report);
            const bool all_ok = result.count(RunStatus::complete) == result.entries.size();
            return all_ok ? exit_ok : exit_partial;
        }

        if (*recompute) {
            SummaryOptions options;
            if (!recompute_config.empty()) options = SummaryOptions::from(load_config(recompute_config).report);
            if (!numerator_order.empty()) options.ratios.numerator_order = numerator_order;
            if (!overall_criteria.empty()) options.overall_criteria = overall_criteria;
            if (comparable_factor >= 0.0) options.overtraining.comparable_factor = comparable_factor;

            const std::filesystem::path src = source;
            EfficiencyReport report;
            std::filesystem::path out = report_dir;
            if (std::filesystem::is_directory(src)) {
                if (!is_fixture_directory(src)) {
                    std::cerr << src.string() << " is neither a ledger file nor a fixture directory (no index.csv)\n";
                    return exit_invalid;
                }
                report = summarize_fixtures(load_fixtures(src), options);
                if (out.empty()) out = "report";
            } else {
                report = summarize(read_ledger(src), options);
                report.source = src.string();
                if (out.empty()) out = src.parent_path() / "report";
            }
            write_bundle(report, out);
            std::cout << render_text(report);
            return exit_ok;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_invalid;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_invalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_invalid;
    }
    return exit_ok;
}
