#include <doctest.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <thread>
#include <fstream>
#include <random>
#include <sstream>

#include "ecotrain/error.hpp"
#include "ecotrain/telemetry.hpp"
#include "test_util.hpp"

using namespace ecotrain;

TEST_CASE("append_sample accumulates watts") {
    EnergyLedger ledger;
    ledger.append({0, Component::gpu, 40.0});
    CHECK(ledger.cumulative() == 40.0);

    EnergyLedger l2;
    l2.append({0, Component::gpu, 100.0});
    l2.append({5, Component::cpu, 7.5});
    CHECK(l2.cumulative() == 107.5);
    CHECK_THROWS_AS(l2.append({6, Component::ram, -1.0}), InvariantError);
    CHECK(l2.cumulative() == 107.5);
    CHECK(l2.sample_count() == 2);
}

TEST_CASE("mark_epoch records sample counts and rejects repeats") {
    EnergyLedger ledger;
    for (int i = 0; i < 3; ++i) ledger.append({i, Component::gpu, 1.0});
    ledger.mark_epoch(0);
    CHECK(ledger.epoch_marks().at(0).sample_count == 3);
    ledger.append({3, Component::gpu, 1.0});
    ledger.append({4, Component::gpu, 1.0});
    ledger.mark_epoch(1);
    CHECK(ledger.epoch_marks().at(0).sample_count == 3);
    CHECK(ledger.epoch_marks().at(1).sample_count == 5);
    CHECK_THROWS_AS(ledger.mark_epoch(1), InvariantError);
    CHECK_THROWS_AS(ledger.mark_epoch(0), InvariantError);
}

TEST_CASE("energy_up_to sums samples before the mark") {
    EnergyLedger ledger;
    ledger.append({0, Component::gpu, 40.0});
    ledger.append({1, Component::cpu, 7.5});
    ledger.append({2, Component::ram, 3.0});
    ledger.mark_epoch(0);
    ledger.append({3, Component::gpu, 1000.0});
    CHECK(ledger.energy_up_to(0) == doctest::Approx(50.5).epsilon(1e-15));
    CHECK_THROWS_AS(ledger.energy_up_to(1), InvariantError);
    CHECK(ledger.components().names() == std::vector<std::string>{"GPU", "CPU", "RAM"});
}

TEST_CASE("a 50-epoch run summing to 0.97e5 reports that total at its last mark") {
    // 194 samples of 10 W per epoch: 1940 per epoch, 97 000 after 50 epochs.
    EnergyLedger ledger;
    std::int64_t t = 0;
    for (std::size_t epoch = 0; epoch < 50; ++epoch) {
        for (int k = 0; k < 194; ++k) ledger.append({t++, Component::gpu, 10.0});
        ledger.mark_epoch(epoch);
    }
    CHECK(ledger.energy_up_to(49) == doctest::Approx(0.97e5).epsilon(1e-12));
}

TEST_CASE("joules are the watt-sum scaled by each component's interval") {
    EnergyLedger ledger;
    ledger.append({0, Component::gpu, 100.0});
    ledger.append({0, Component::cpu, 50.0});
    using std::chrono::milliseconds;
    CHECK(ledger.joules({milliseconds(10), milliseconds(100), milliseconds(1)}) == doctest::Approx(1.0 + 5.0));
}

TEST_CASE("constant source yields evenly spaced samples") {
    TelemetrySourceConfig cfg;
    cfg.kind = SourceKind::constant;
    cfg.constant_watts = 50.0;
    cfg.sample_interval = std::chrono::milliseconds(10);
    auto src = open_source(cfg, true);
    ReplayCursor cursor(*src);
    std::vector<PowerSample> got;
    CHECK(cursor.drain_until(100, [&](const PowerSample& s) { got.push_back(s); }));
    REQUIRE(got.size() == 10);
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].watts == 50.0);
        CHECK(got[i].timestamp_ms == static_cast<std::int64_t>(i) * 10);
    }
}

TEST_CASE("trace replay yields the trace verbatim") {
    test_util::TempDir dir;
    auto path = dir.path() / "trace.csv";
    {
        std::ofstream out(path);
        out << "timestamp_ms,component,watts\n0,GPU,30\n10,GPU,32\n";
    }
    TelemetrySourceConfig cfg;
    cfg.kind = SourceKind::trace_replay;
    cfg.trace_path = path;
    auto src = open_source(cfg, true);
    auto a = src->next();
    auto b = src->next();
    REQUIRE(a);
    REQUIRE(b);
    CHECK(*a == PowerSample{0, Component::gpu, 30.0});
    CHECK(*b == PowerSample{10, Component::gpu, 32.0});
    CHECK_FALSE(src->next());
}

TEST_CASE("looping trace replay offsets timestamps by the trace period") {
    test_util::TempDir dir;
    auto path = dir.path() / "trace.csv";
    write_trace(path, {{0, Component::gpu, 1.0}, {5, Component::gpu, 2.0}});
    TelemetrySourceConfig cfg;
    cfg.kind = SourceKind::trace_replay;
    cfg.trace_path = path;
    cfg.loop = true;
    cfg.sample_interval = std::chrono::milliseconds(5);
    auto src = open_source(cfg, true);
    std::vector<std::int64_t> ts;
    for (int i = 0; i < 5; ++i) ts.push_back(src->next()->timestamp_ms);
    CHECK(ts == std::vector<std::int64_t>{0, 5, 10, 15, 20});
}

TEST_CASE("trace parse errors carry line numbers") {
    CHECK_THROWS_WITH_AS(parse_trace("timestamp_ms,component,watts\n0,GPU,1\n5,FAN,2\n", "t.csv"),
                         doctest::Contains("t.csv:3"), ParseError);
    CHECK_THROWS_WITH_AS(parse_trace("ts,c,w\n", "t.csv"), doctest::Contains("t.csv:1"), ParseError);
    CHECK_THROWS_WITH_AS(parse_trace("timestamp_ms,component,watts\n0,GPU,-3\n", "t.csv"),
                         doctest::Contains("t.csv:2"), ParseError);
    CHECK_THROWS_WITH_AS(parse_trace("timestamp_ms,component,watts\n5,GPU,1\n4,GPU,1\n", "t.csv"),
                         doctest::Contains("not sorted"), ParseError);
    // interleaved components only need per-component order
    CHECK(parse_trace("timestamp_ms,component,watts\n5,GPU,1\n4,CPU,1\n", "t.csv").size() == 2);
}

TEST_CASE("missing trace file is an error at open and at probe") {
    TelemetrySourceConfig cfg;
    cfg.kind = SourceKind::trace_replay;
    cfg.trace_path = "/nonexistent/trace.csv";
    CHECK_THROWS_AS(open_source(cfg, true), Error);
    auto probe = probe_source(cfg);
    REQUIRE(probe);
    CHECK(probe->find("/nonexistent/trace.csv") != std::string::npos);
}

TEST_CASE("counter backends report unavailability instead of yielding zeros") {
    TelemetrySourceConfig cfg;
    cfg.kind = SourceKind::os_cpu_counter;
    cfg.counter_path = "/nonexistent/energy_uj";
    CHECK_THROWS_WITH_AS(open_source(cfg, false), doctest::Contains("counter unavailable"), CounterUnavailable);
    cfg.kind = SourceKind::gpu_counter;
    CHECK_THROWS_AS(open_source(cfg, false), CounterUnavailable);
    REQUIRE(probe_source(cfg));
}

TEST_CASE("energy counter backend converts counter deltas to watts") {
    test_util::TempDir dir;
    auto counter = dir.path() / "energy_uj";
    { std::ofstream(counter) << "0\n"; }
    TelemetrySourceConfig cfg;
    cfg.kind = SourceKind::os_cpu_counter;
    cfg.counter_path = counter;
    cfg.sample_interval = std::chrono::milliseconds(20);
    auto src = open_source(cfg, false);
    { std::ofstream(counter) << "1000000\n"; }  // 1 J
    auto s = src->next();
    REQUIRE(s);
    CHECK(s->component == Component::cpu);
    CHECK(s->watts > 0.0);
}

TEST_CASE("sample interval must be positive") {
    TelemetrySourceConfig cfg;
    cfg.sample_interval = std::chrono::milliseconds(0);
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("ledger over a random 1000-sample trace equals an independent re-sum of the file") {
    test_util::TempDir dir;
    auto path = dir.path() / "random.csv";
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> watts(0.0, 250.0);
    std::uniform_int_distribution<int> comp(0, 2);
    std::vector<PowerSample> samples;
    for (int i = 0; i < 1000; ++i) {
        samples.push_back({i, static_cast<Component>(comp(rng)), watts(rng)});
    }
    write_trace(path, samples);

    // oracle: re-read the raw text with iostreams and sum, independent of parse_trace
    std::vector<double> raw;
    {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            auto last = line.rfind(',');
            raw.push_back(std::stod(line.substr(last + 1)));
        }
    }
    REQUIRE(raw.size() == 1000);

    TelemetrySourceConfig cfg;
    cfg.kind = SourceKind::trace_replay;
    cfg.trace_path = path;
    auto src = open_source(cfg, true);
    ReplayCursor cursor(*src);
    EnergyLedger ledger;
    for (std::size_t epoch = 0; epoch < 10; ++epoch) {
        cursor.drain_until(static_cast<std::int64_t>((epoch + 1) * 100), [&](const PowerSample& s) { ledger.append(s); });
        ledger.mark_epoch(epoch);
    }
    for (std::size_t epoch = 0; epoch < 10; ++epoch) {
        double expect = 0.0;
        for (std::size_t i = 0; i < (epoch + 1) * 100; ++i) expect += raw[i];
        CHECK(ledger.energy_up_to(epoch) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("ledger additivity, concatenation order invariance and replay determinism") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> watts(0.0, 300.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<std::vector<PowerSample>, 3> streams;
        for (std::size_t c = 0; c < 3; ++c) {
            for (int i = 0; i < 40; ++i) streams[c].push_back({i * 3, static_cast<Component>(c), watts(rng)});
        }
        // sequential concatenation
        EnergyLedger seq;
        for (const auto& s : streams)
            for (const auto& p : s) seq.append(p);
        // random interleaving
        std::vector<PowerSample> merged;
        for (const auto& s : streams) merged.insert(merged.end(), s.begin(), s.end());
        std::shuffle(merged.begin(), merged.end(), rng);
        EnergyLedger inter;
        std::size_t epoch = 0;
        for (std::size_t i = 0; i < merged.size(); ++i) {
            inter.append(merged[i]);
            if (i % 17 == 16) inter.mark_epoch(epoch++);
        }
        CHECK(inter.cumulative() == doctest::Approx(seq.cumulative()).epsilon(1e-12));

        // additivity between marks
        const auto& marks = inter.epoch_marks();
        for (auto i = marks.begin(); i != marks.end(); ++i) {
            for (auto j = std::next(i); j != marks.end(); ++j) {
                double between = 0.0;
                for (std::size_t k = i->second.sample_count; k < j->second.sample_count; ++k) {
                    between += inter.samples()[k].watts;
                }
                CHECK(inter.energy_up_to(i->first) + between ==
                      doctest::Approx(inter.energy_up_to(j->first)).epsilon(1e-9));
            }
        }
    }

    test_util::TempDir dir;
    auto path = dir.path() / "t.csv";
    std::vector<PowerSample> trace;
    for (int i = 0; i < 300; ++i) trace.push_back({i, Component::gpu, watts(rng)});
    write_trace(path, trace);
    TelemetrySourceConfig cfg;
    cfg.kind = SourceKind::trace_replay;
    cfg.trace_path = path;
    auto build = [&] {
        auto src = open_source(cfg, true);
        ReplayCursor cursor(*src);
        EnergyLedger ledger;
        for (std::size_t e = 0; e < 3; ++e) {
            cursor.drain_until(static_cast<std::int64_t>((e + 1) * 100), [&](const PowerSample& s) { ledger.append(s); });
            ledger.mark_epoch(e);
        }
        return ledger;
    };
    CHECK(build() == build());
}

TEST_CASE("concurrent ledger serializes a writer against snapshot readers") {
    ConcurrentLedger ledger;
    std::thread writer([&] {
        for (int i = 0; i < 10000; ++i) ledger.append({i, Component::gpu, 1.0});
        ledger.mark_epoch(0);
    });
    for (int i = 0; i < 100; ++i) {
        auto snap = ledger.snapshot();
        CHECK(snap.cumulative() == static_cast<double>(snap.sample_count()));
    }
    writer.join();
    CHECK(ledger.energy_up_to(0) == 10000.0);
}
