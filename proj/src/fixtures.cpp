#include "ecotrain/fixtures.hpp"

#include <cmath>

#include "ecotrain/csv.hpp"
#include "ecotrain/error.hpp"
#include "ecotrain/text.hpp"

namespace ecotrain {

double FixtureRow::round_trip_error() const {
    if (!(watt_sum > 0.0) || !(eff > 0.0)) return INFINITY;
    return std::abs(acc / watt_sum - eff) / eff;
}

std::pair<std::string, std::size_t> split_model_name(const std::string& model) {
    const auto dash = model.rfind('-');
    if (dash == std::string::npos || dash + 1 >= model.size()) {
        throw InvariantError("model name '" + model + "' is not of the form <architecture>-<size>");
    }
    auto size = parse_int(model.substr(dash + 1));
    if (!size || *size < 1) throw InvariantError("model name '" + model + "' has no positive size suffix");
    return {model.substr(0, dash), static_cast<std::size_t>(*size)};
}

bool is_fixture_directory(const std::filesystem::path& path) {
    return std::filesystem::is_directory(path) && std::filesystem::exists(path / "index.csv");
}

namespace {

FixtureTable load_runs(const std::filesystem::path& file, const std::string& task, const std::string& criterion) {
    auto csv = read_csv(file);
    FixtureTable table{file.filename().string(), task, criterion, {}};
    for (const auto& row : csv.rows) {
        FixtureRow r;
        r.model = csv.at(row, "model");
        try {
            std::tie(r.architecture, r.size) = split_model_name(r.model);
        } catch (const InvariantError& e) {
            throw ParseError(csv.source, row.line, e.what());
        }
        r.epochs = static_cast<std::size_t>(csv.integer(row, "epochs"));
        r.acc = csv.number(row, "acc");
        r.watt_sum = csv.number(row, "watt_sum");
        r.eff = csv.number(row, "eff");
        r.anomaly = std::string(trim(csv.at(row, "anomaly")));
        table.rows.push_back(std::move(r));
    }
    return table;
}

}  // namespace

FixtureSet load_fixtures(const std::filesystem::path& directory) {
    const auto index_path = directory / "index.csv";
    if (!std::filesystem::exists(index_path)) {
        throw Error("fixture directory " + directory.string() + " has no index.csv");
    }
    auto index = read_csv(index_path);
    FixtureSet set;
    set.directory = directory;
    for (const auto& entry : index.rows) {
        const auto file = directory / index.at(entry, "file");
        const auto& kind = index.at(entry, "kind");
        const auto& task = index.at(entry, "task");
        const auto& criterion = index.at(entry, "criterion");
        if (kind == "runs") {
            set.tables.push_back(load_runs(file, task, criterion));
        } else if (kind == "means") {
            auto csv = read_csv(file);
            for (const auto& row : csv.rows) {
                set.printed_means.push_back(
                    {csv.at(row, "task"), csv.at(row, "criterion"), csv.at(row, "architecture"), csv.number(row, "eff")});
            }
        } else if (kind == "overtraining") {
            auto csv = read_csv(file);
            for (const auto& row : csv.rows) {
                OvertrainingFixtureRow r;
                r.task = csv.at(row, "task");
                r.model = csv.at(row, "model");
                std::tie(r.architecture, r.size) = split_model_name(r.model);
                r.short_horizon = {csv.number(row, "train_50"), csv.number(row, "test_50")};
                r.long_horizon = {csv.number(row, "train_100"), csv.number(row, "test_100")};
                r.printed_a = csv.number(row, "a");
                r.printed_b = csv.number(row, "b");
                set.overtraining.push_back(std::move(r));
            }
        } else if (kind == "aggregate") {
            auto csv = read_csv(file);
            for (const auto& row : csv.rows) {
                set.aggregates.push_back(
                    {csv.at(row, "architecture"), csv.at(row, "task"), criterion, csv.number(row, "eff")});
            }
        } else {
            throw ParseError(index.source, entry.line, "unknown fixture kind '" + kind + "'");
        }
    }
    return set;
}

}  // namespace ecotrain
