#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

// Trainer wire protocol: newline-delimited JSON on the trainer's stdout, a
// single stop command on its stdin.
namespace ecotrain {

enum class EventKind { epoch_end, final, log };

struct TrainerEvent {
    EventKind kind = EventKind::epoch_end;
    std::size_t epoch = 0;      // epoch_end only
    double train_acc = 0.0;     // epoch_end, final
    double eval_acc = 0.0;      // epoch_end, final
    std::string message;        // log only

    static TrainerEvent epoch_end(std::size_t epoch, double train_acc, double eval_acc) {
        return {EventKind::epoch_end, epoch, train_acc, eval_acc, {}};
    }
    static TrainerEvent final_result(double train_acc, double eval_acc) {
        return {EventKind::final, 0, train_acc, eval_acc, {}};
    }
    static TrainerEvent log(std::string message) { return {EventKind::log, 0, 0.0, 0.0, std::move(message)}; }

    bool operator==(const TrainerEvent&) const = default;
};

/// Parses one stdout line. Anything that is not a well-formed event object
/// (including accuracies outside [0, 1]) throws ProtocolError.
TrainerEvent parse_event(std::string_view line);

/// Serializes an event as a single line without the trailing newline, e.g.
/// {"event":"epoch_end","epoch":0,"train_acc":0.8,"eval_acc":0.75}
std::string serialize_event(const TrainerEvent& event);

inline constexpr std::string_view stop_command = R"({"cmd":"stop"})";

/// True for a stdin line carrying the stop command (whitespace tolerant).
/// Returns nullopt when the line is not valid JSON or not a command.
std::optional<bool> is_stop_command(std::string_view line);

}  // namespace ecotrain
