#include "ecotrain/criteria.hpp"

#include <cmath>

#include "ecotrain/error.hpp"
#include "ecotrain/text.hpp"

namespace ecotrain {

std::string_view to_string(CriterionKind k) {
    switch (k) {
        case CriterionKind::fixed_epochs: return "fixed_epochs";
        case CriterionKind::accuracy_bound: return "accuracy_bound";
        case CriterionKind::early_stopping: return "early_stopping";
        case CriterionKind::energy_budget: return "energy_budget";
    }
    return "?";
}

CriterionKind parse_criterion_kind(std::string_view text) {
    if (text == "fixed_epochs") return CriterionKind::fixed_epochs;
    if (text == "accuracy_bound") return CriterionKind::accuracy_bound;
    if (text == "early_stopping") return CriterionKind::early_stopping;
    if (text == "energy_budget") return CriterionKind::energy_budget;
    throw ValidationError("criteria.kind", "unknown criterion '" + std::string(text) + "'");
}

std::string_view to_string(AccuracyStream s) { return s == AccuracyStream::train ? "train" : "eval"; }

AccuracyStream parse_accuracy_stream(std::string_view text) {
    if (text == "train") return AccuracyStream::train;
    if (text == "eval") return AccuracyStream::eval;
    throw ValidationError("criteria.watch", "expected 'train' or 'eval', got '" + std::string(text) + "'");
}

std::string_view to_string(StopKind k) {
    switch (k) {
        case StopKind::fixed_epochs: return "fixed_epochs";
        case StopKind::accuracy_bound: return "accuracy_bound";
        case StopKind::early_stopping: return "early_stopping";
        case StopKind::energy_budget: return "energy_budget";
        case StopKind::safety_cap: return "safety_cap";
        case StopKind::trainer_exit: return "trainer_exit";
    }
    return "?";
}

StopKind parse_stop_kind(std::string_view text) {
    for (auto k : {StopKind::fixed_epochs, StopKind::accuracy_bound, StopKind::early_stopping,
                   StopKind::energy_budget, StopKind::safety_cap, StopKind::trainer_exit}) {
        if (to_string(k) == text) return k;
    }
    throw InvariantError("unknown stop kind '" + std::string(text) + "'");
}

CriterionKind StoppingCriterion::kind() const {
    return static_cast<CriterionKind>(params.index());
}

void StoppingCriterion::validate() const {
    const std::string field = "criteria." + (name.empty() ? std::string(to_string(kind())) : name);
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, FixedEpochs>) {
                if (p.max_epochs < 1) throw ValidationError(field + ".max_epochs", "max_epochs must be >= 1");
            } else {
                if (p.safety_cap < 1) throw ValidationError(field + ".safety_cap", "safety_cap must be >= 1");
                if constexpr (std::is_same_v<P, AccuracyBound>) {
                    if (!(p.target_accuracy > 0.0 && p.target_accuracy <= 1.0)) {
                        throw ValidationError(field + ".target_accuracy", "target_accuracy must be in (0, 1]");
                    }
                } else if constexpr (std::is_same_v<P, EarlyStopping>) {
                    if (p.patience < 1) throw ValidationError(field + ".patience", "patience must be >= 1");
                } else {
                    if (!(p.budget_watt_sum > 0.0) || !std::isfinite(p.budget_watt_sum)) {
                        throw ValidationError(field + ".budget_watt_sum", "budget_watt_sum must be > 0");
                    }
                }
            }
        },
        params);
}

StoppingCriterion StoppingCriterion::fixed_epochs(std::size_t max_epochs) {
    return {"fixed_epochs", FixedEpochs{max_epochs}};
}

StoppingCriterion StoppingCriterion::accuracy_bound(double target, AccuracyStream watch) {
    return {"accuracy_bound", AccuracyBound{target, watch}};
}

StoppingCriterion StoppingCriterion::early_stopping(std::size_t patience) {
    return {"early_stopping", EarlyStopping{patience}};
}

StoppingCriterion StoppingCriterion::energy_budget(double budget_watt_sum) {
    return {"energy_budget", EnergyBudget{budget_watt_sum}};
}

namespace {

void check_accuracy(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw InvariantError(std::string(what) + " accuracy " + format_double(v) + " outside [0, 1]");
    }
}

}  // namespace

Decision observe_epoch(CriterionState& state, const StoppingCriterion& criterion, std::size_t epoch,
                       double train_acc, double eval_acc, double energy_so_far, AfterStopPolicy after_stop) {
    if (state.decided) {
        if (after_stop == AfterStopPolicy::ignore) return {state.decided};
        throw InvariantError("epoch " + std::to_string(epoch) + " observed after stop decision at epoch " +
                             std::to_string(state.decided->at_epoch));
    }
    if (epoch != state.epochs_seen) {
        throw InvariantError("out-of-order epoch " + std::to_string(epoch) + ", expected " +
                             std::to_string(state.epochs_seen));
    }
    check_accuracy(train_acc, "train");
    check_accuracy(eval_acc, "eval");
    if (!(energy_so_far >= state.last_energy) || !std::isfinite(energy_so_far)) {
        throw InvariantError("energy_so_far decreased from " + format_double(state.last_energy) + " to " +
                             format_double(energy_so_far));
    }

    CriterionState next = state;
    next.epochs_seen = epoch + 1;
    next.last_energy = energy_so_far;
    // Strict improvement only; ties count toward patience.
    if (eval_acc > next.best_accuracy_so_far) {
        next.best_accuracy_so_far = eval_acc;
        next.epochs_since_improvement = 0;
    } else {
        ++next.epochs_since_improvement;
    }

    std::optional<StopReason> stop;
    std::size_t cap = 0;
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, FixedEpochs>) {
                if (next.epochs_seen >= p.max_epochs) {
                    stop = StopReason{StopKind::fixed_epochs, epoch, static_cast<double>(next.epochs_seen)};
                }
            } else {
                cap = p.safety_cap;
                if constexpr (std::is_same_v<P, AccuracyBound>) {
                    const double watched = p.watch == AccuracyStream::train ? train_acc : eval_acc;
                    if (watched >= p.target_accuracy) stop = StopReason{StopKind::accuracy_bound, epoch, watched};
                } else if constexpr (std::is_same_v<P, EarlyStopping>) {
                    if (next.epochs_since_improvement >= p.patience) {
                        stop = StopReason{StopKind::early_stopping, epoch, next.best_accuracy_so_far};
                    }
                } else {
                    if (energy_so_far >= p.budget_watt_sum) {
                        stop = StopReason{StopKind::energy_budget, epoch, energy_so_far};
                    }
                }
            }
        },
        criterion.params);
    if (!stop && cap > 0 && next.epochs_seen >= cap) {
        stop = StopReason{StopKind::safety_cap, epoch, static_cast<double>(next.epochs_seen)};
    }
    next.decided = stop;
    state = next;
    return {stop};
}

}  // namespace ecotrain
