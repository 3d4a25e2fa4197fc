#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "ecotrain/criteria.hpp"
#include "ecotrain/error.hpp"

using namespace ecotrain;

namespace {

struct Run {
    std::optional<StopReason> stop;
    std::size_t observed = 0;
};

Run drive(const StoppingCriterion& c, const std::vector<double>& train, const std::vector<double>& eval,
          const std::vector<double>& energy) {
    CriterionMachine m(c);
    Run r;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        auto d = m.observe(train[i], eval[i], energy[i]);
        ++r.observed;
        if (d.should_stop()) {
            r.stop = d.stop;
            break;
        }
    }
    return r;
}

/// First index i >= patience at which the last `patience` accuracies fail to
/// exceed the maximum of everything before them.
std::optional<std::size_t> brute_force_early_stop(const std::vector<double>& acc, std::size_t patience) {
    for (std::size_t i = patience; i < acc.size(); ++i) {
        const double before = *std::max_element(acc.begin(), acc.begin() + static_cast<long>(i - patience + 1));
        const double window =
            *std::max_element(acc.begin() + static_cast<long>(i - patience + 1), acc.begin() + static_cast<long>(i + 1));
        if (window <= before) return i;
    }
    return std::nullopt;
}

}  // namespace

TEST_CASE("fixed_epochs stops on the max_epochs-th epoch") {
    CriterionMachine m(StoppingCriterion::fixed_epochs(50));
    for (std::size_t e = 0; e < 49; ++e) CHECK_FALSE(m.observe(0.5, 0.5, double(e)).should_stop());
    auto d = m.observe(0.5, 0.5, 49.0);
    REQUIRE(d.should_stop());
    CHECK(d.stop->kind == StopKind::fixed_epochs);
    CHECK(d.stop->at_epoch == 49);
    CHECK(d.stop->trigger_value == 50.0);
}

TEST_CASE("energy_budget stops at the first boundary at or over budget") {
    auto r = drive(StoppingCriterion::energy_budget(100'000), {0.1, 0.2, 0.3}, {0.1, 0.2, 0.3},
                   {60'000, 99'999, 123'000});
    REQUIRE(r.stop);
    CHECK(r.stop->kind == StopKind::energy_budget);
    CHECK(r.stop->at_epoch == 2);
    CHECK(r.stop->trigger_value == 123'000);
}

TEST_CASE("early_stopping with patience 3 on a plateau") {
    std::vector<double> acc{0.5, 0.6, 0.6, 0.6, 0.6};
    auto r = drive(StoppingCriterion::early_stopping(3), acc, acc, {1, 2, 3, 4, 5});
    REQUIRE(r.stop);
    CHECK(r.stop->at_epoch == 4);
    CHECK(r.stop->trigger_value == 0.6);
    CHECK(brute_force_early_stop(acc, 3) == 4u);
}

TEST_CASE("early_stopping agrees with a brute-force scan") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> plen(1, 5);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t patience = static_cast<std::size_t>(plen(rng));
        std::vector<double> acc;
        for (int i = 0; i < 40; ++i) acc.push_back(std::round(u(rng) * 10) / 10);  // coarse values force ties
        std::vector<double> energy(acc.size());
        for (std::size_t i = 0; i < energy.size(); ++i) energy[i] = double(i + 1);
        auto r = drive(StoppingCriterion::early_stopping(patience), acc, acc, energy);
        auto expect = brute_force_early_stop(acc, patience);
        if (expect) {
            REQUIRE(r.stop);
            CHECK(r.stop->at_epoch == *expect);
        } else {
            CHECK_FALSE(r.stop);
        }
    }
}

TEST_CASE("accuracy_bound watches the training stream by default") {
    auto r = drive(StoppingCriterion::accuracy_bound(0.99), {0.95, 0.991}, {0.5, 0.5}, {1, 2});
    REQUIRE(r.stop);
    CHECK(r.stop->kind == StopKind::accuracy_bound);
    CHECK(r.stop->at_epoch == 1);
    CHECK(r.stop->trigger_value == 0.991);

    auto eval_watch = drive(StoppingCriterion::accuracy_bound(0.99, AccuracyStream::eval), {0.95, 0.991},
                            {0.5, 0.5}, {1, 2});
    CHECK_FALSE(eval_watch.stop);
}

TEST_CASE("observe_epoch rejects malformed event streams") {
    SUBCASE("out of order") {
        CriterionState s;
        auto c = StoppingCriterion::fixed_epochs(5);
        CHECK_THROWS_AS(observe_epoch(s, c, 1, 0.5, 0.5, 1.0), InvariantError);
    }
    SUBCASE("accuracy range") {
        CriterionMachine m(StoppingCriterion::fixed_epochs(5));
        CHECK_THROWS_AS(m.observe(1.2, 0.5, 1.0), InvariantError);
        CHECK_THROWS_AS(m.observe(0.5, -0.1, 1.0), InvariantError);
        CHECK_THROWS_AS(m.observe(0.5, std::nan(""), 1.0), InvariantError);
    }
    SUBCASE("energy decreasing") {
        CriterionMachine m(StoppingCriterion::fixed_epochs(5));
        m.observe(0.5, 0.5, 10.0);
        CHECK_THROWS_AS(m.observe(0.5, 0.5, 9.0), InvariantError);
        CHECK(m.state().epochs_seen == 1);
    }
}

TEST_CASE("events after a stop are rejected or ignored and never change the reason") {
    CriterionState s;
    auto c = StoppingCriterion::fixed_epochs(1);
    auto d = observe_epoch(s, c, 0, 0.5, 0.5, 1.0);
    REQUIRE(d.should_stop());
    const auto reason = *d.stop;
    CHECK_THROWS_AS(observe_epoch(s, c, 1, 0.6, 0.6, 2.0), InvariantError);
    auto again = observe_epoch(s, c, 1, 0.6, 0.6, 2.0, AfterStopPolicy::ignore);
    REQUIRE(again.stop);
    CHECK(*again.stop == reason);
    CHECK(*s.decided == reason);
}

TEST_CASE("non-fixed criteria hit the safety cap") {
    auto c = StoppingCriterion::early_stopping(3);
    std::get<EarlyStopping>(c.params).safety_cap = 10;
    CriterionMachine m(c);
    std::optional<StopReason> stop;
    for (std::size_t e = 0; e < 20 && !stop; ++e) stop = m.observe(0.5, 0.01 * double(e), double(e)).stop;
    REQUIRE(stop);
    CHECK(stop->kind == StopKind::safety_cap);
    CHECK(stop->at_epoch == 9);
}

TEST_CASE("criterion parameter validation") {
    CHECK_THROWS_AS(StoppingCriterion::fixed_epochs(0).validate(), ValidationError);
    CHECK_THROWS_AS(StoppingCriterion::accuracy_bound(0.0).validate(), ValidationError);
    CHECK_THROWS_AS(StoppingCriterion::accuracy_bound(1.01).validate(), ValidationError);
    CHECK_NOTHROW(StoppingCriterion::accuracy_bound(1.0).validate());
    CHECK_THROWS_AS(StoppingCriterion::early_stopping(0).validate(), ValidationError);
    CHECK_THROWS_WITH_AS(StoppingCriterion::energy_budget(0.0).validate(), doctest::Contains("budget_watt_sum"),
                         ValidationError);
    CHECK(parse_criterion_kind("energy_budget") == CriterionKind::energy_budget);
    CHECK_THROWS_AS(parse_criterion_kind("epochs"), ValidationError);
}
