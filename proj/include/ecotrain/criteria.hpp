#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace ecotrain {

enum class CriterionKind { fixed_epochs, accuracy_bound, early_stopping, energy_budget };

std::string_view to_string(CriterionKind k);
CriterionKind parse_criterion_kind(std::string_view text);

enum class AccuracyStream { train, eval };

std::string_view to_string(AccuracyStream s);
AccuracyStream parse_accuracy_stream(std::string_view text);

inline constexpr std::size_t default_safety_cap = 1000;

struct FixedEpochs {
    std::size_t max_epochs = 50;
    bool operator==(const FixedEpochs&) const = default;
};

struct AccuracyBound {
    double target_accuracy = 0.99;
    AccuracyStream watch = AccuracyStream::train;
    std::size_t safety_cap = default_safety_cap;
    bool operator==(const AccuracyBound&) const = default;
};

struct EarlyStopping {
    std::size_t patience = 3;
    std::size_t safety_cap = default_safety_cap;
    bool operator==(const EarlyStopping&) const = default;
};

struct EnergyBudget {
    double budget_watt_sum = 100'000.0;
    std::size_t safety_cap = default_safety_cap;
    bool operator==(const EnergyBudget&) const = default;
};

/// One stopping rule. `name` identifies the criterion within an experiment
/// and defaults to the canonical kind name.
struct StoppingCriterion {
    std::string name;
    std::variant<FixedEpochs, AccuracyBound, EarlyStopping, EnergyBudget> params;

    CriterionKind kind() const;
    void validate() const;

    static StoppingCriterion fixed_epochs(std::size_t max_epochs = 50);
    static StoppingCriterion accuracy_bound(double target, AccuracyStream watch = AccuracyStream::train);
    static StoppingCriterion early_stopping(std::size_t patience = 3);
    static StoppingCriterion energy_budget(double budget_watt_sum = 100'000.0);

    bool operator==(const StoppingCriterion&) const = default;
};

enum class StopKind { fixed_epochs, accuracy_bound, early_stopping, energy_budget, safety_cap, trainer_exit };

std::string_view to_string(StopKind k);
StopKind parse_stop_kind(std::string_view text);

struct StopReason {
    StopKind kind = StopKind::fixed_epochs;
    std::size_t at_epoch = 0;
    /// Epochs completed, accuracy reached, or watt-sum reached.
    double trigger_value = 0.0;

    bool operator==(const StopReason&) const = default;
};

enum class AfterStopPolicy { reject, ignore };

struct CriterionState {
    std::size_t epochs_seen = 0;
    double best_accuracy_so_far = -1.0;
    std::size_t epochs_since_improvement = 0;
    double last_energy = 0.0;
    std::optional<StopReason> decided;

    bool operator==(const CriterionState&) const = default;
};

struct Decision {
    std::optional<StopReason> stop;

    bool should_stop() const { return stop.has_value(); }
};

/// Feeds one epoch-end event to a stopping criterion. Events must arrive in
/// order (epoch == epochs_seen). Once a stop has been decided, further events
/// either throw (reject) or return the recorded decision unchanged (ignore).
Decision observe_epoch(CriterionState& state, const StoppingCriterion& criterion, std::size_t epoch,
                       double train_acc, double eval_acc, double energy_so_far,
                       AfterStopPolicy after_stop = AfterStopPolicy::reject);

/// Convenience wrapper bundling a criterion with its state.
class CriterionMachine {
public:
    explicit CriterionMachine(StoppingCriterion criterion, AfterStopPolicy after_stop = AfterStopPolicy::reject)
        : criterion_(std::move(criterion)), after_stop_(after_stop) {
        criterion_.validate();
    }

    Decision observe(double train_acc, double eval_acc, double energy_so_far) {
        return observe_epoch(state_, criterion_, state_.epochs_seen, train_acc, eval_acc, energy_so_far,
                             after_stop_);
    }

    const CriterionState& state() const { return state_; }
    const StoppingCriterion& criterion() const { return criterion_; }

private:
    StoppingCriterion criterion_;
    AfterStopPolicy after_stop_;
    CriterionState state_;
};

}  // namespace ecotrain
