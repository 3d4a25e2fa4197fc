#include "ecotrain/protocol.hpp"

#include <json.hpp>

#include "ecotrain/error.hpp"
#include "ecotrain/text.hpp"

namespace ecotrain {

namespace {

double accuracy_field(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number()) {
        throw ProtocolError(std::string("event is missing numeric '") + key + "'");
    }
    const double v = it->get<double>();
    if (!(v >= 0.0 && v <= 1.0)) {
        throw ProtocolError(std::string("'") + key + "' = " + format_double(v) + " is outside [0, 1]");
    }
    return v;
}

}  // namespace

TrainerEvent parse_event(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
        std::string shown(line.substr(0, 80));
        throw ProtocolError("non-JSON line on trainer stdout: '" + shown + "'");
    }
    if (!j.is_object()) throw ProtocolError("trainer line is not a JSON object");
    auto ev = j.find("event");
    if (ev == j.end() || !ev->is_string()) throw ProtocolError("trainer object has no 'event' string");
    const auto& kind = ev->get_ref<const std::string&>();
    if (kind == "epoch_end") {
        auto ep = j.find("epoch");
        if (ep == j.end() || !ep->is_number_integer() || ep->get<long long>() < 0) {
            throw ProtocolError("epoch_end event needs a non-negative integer 'epoch'");
        }
        return TrainerEvent::epoch_end(ep->get<std::size_t>(), accuracy_field(j, "train_acc"),
                                       accuracy_field(j, "eval_acc"));
    }
    if (kind == "final") {
        return TrainerEvent::final_result(accuracy_field(j, "train_acc"), accuracy_field(j, "eval_acc"));
    }
    if (kind == "log") {
        auto msg = j.find("message");
        if (msg == j.end() || !msg->is_string()) throw ProtocolError("log event needs a 'message' string");
        return TrainerEvent::log(msg->get<std::string>());
    }
    throw ProtocolError("unknown event kind '" + kind + "'");
}

std::string serialize_event(const TrainerEvent& event) {
    switch (event.kind) {
        case EventKind::epoch_end:
            return R"({"event":"epoch_end","epoch":)" + std::to_string(event.epoch) + R"(,"train_acc":)" +
                   format_double(event.train_acc) + R"(,"eval_acc":)" + format_double(event.eval_acc) + "}";
        case EventKind::final:
            return R"({"event":"final","train_acc":)" + format_double(event.train_acc) + R"(,"eval_acc":)" +
                   format_double(event.eval_acc) + "}";
        case EventKind::log:
            return nlohmann::json{{"event", "log"}, {"message", event.message}}.dump();
    }
    return {};
}

std::optional<bool> is_stop_command(std::string_view line) {
    try {
        auto j = nlohmann::json::parse(line);
        if (!j.is_object()) return std::nullopt;
        auto cmd = j.find("cmd");
        if (cmd == j.end() || !cmd->is_string()) return std::nullopt;
        return cmd->get<std::string>() == "stop";
    } catch (const nlohmann::json::parse_error&) {
        return std::nullopt;
    }
}

}  // namespace ecotrain
