#include "teleop/stream/messages.hpp"

#include <cmath>

#include "teleop/common/error.hpp"
#include "teleop/graph/frame_io.hpp"

namespace teleop::stream {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 6> kKindNames{"recognition", "fsm_transition", "robot_command",
                                                     "robot_state", "error",          "metrics"};

json vec_json(const fsm::Vec3& v) { return json::array({v.x, v.y, v.z}); }

} // namespace

FrameMessage FrameMessage::from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("frame message must be a JSON object");
    if (!j.contains("session") || !j["session"].is_string()) throw ValidationError("frame message needs a session id");
    if (!j.contains("v") || !j["v"].is_number_integer()) throw ValidationError("frame message needs integer v");
    FrameMessage m;
    m.session = j["session"].get<std::string>();
    m.version = j["v"].get<int>();
    m.frame = graph::frame_from_json(j);
    return m;
}

json FrameMessage::to_json() const {
    json j = graph::frame_to_json(frame);
    j["session"] = session;
    j["v"] = version;
    return j;
}

std::string_view to_string(EventKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<EventKind> event_kind_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == s) return static_cast<EventKind>(i);
    }
    return std::nullopt;
}

json EventMessage::to_json() const {
    return {{"kind", std::string(to_string(kind))},
            {"session", session},
            {"frame", frame},
            {"t", t},
            {"payload", payload}};
}

EventMessage EventMessage::from_json(const json& j) {
    EventMessage e;
    auto kind = event_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw ValidationError("unknown event kind");
    e.kind = *kind;
    e.session = j.value("session", std::string());
    e.frame = j.value("frame", std::int64_t{-1});
    e.t = j.value("t", 0.0);
    e.payload = j.value("payload", json::object());
    return e;
}

std::string EventMessage::to_line() const { return to_json().dump(); }

ActionClass most_likely(const std::array<double, 4>& probabilities) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i) {
        if (probabilities[i] > probabilities[best]) best = i;
    }
    return static_cast<ActionClass>(best);
}

EventMessage recognition_event(const std::string& session, std::int64_t frame, double t,
                               const std::array<double, 4>& probabilities, const fsm::FsmState& fsm) {
    json probs = json::object();
    for (ActionClass a : kAllActions) probs[std::string(to_string(a))] = probabilities[to_index(a)];
    return {EventKind::Recognition,
            session,
            frame,
            t,
            {{"probabilities", probs}, {"action", std::string(to_string(most_likely(probabilities)))},
             {"fsm", fsm.to_json()}}};
}

EventMessage control_event(const std::string& session, std::int64_t frame, const fsm::ControlEvent& e) {
    json payload = {{"transition", fsm::to_string(e.kind)},
                    {"action", std::string(to_string(e.action))},
                    {"fsm", e.state.to_json()}};
    const EventKind kind = e.kind == fsm::ControlKind::Start ? EventKind::RobotCommand : EventKind::FsmTransition;
    if (kind == EventKind::RobotCommand) payload["command"] = "start";
    return {kind, session, frame, e.time, payload};
}

EventMessage robot_state_event(const std::string& session, std::int64_t frame, double t,
                               const fsm::RobotSim& robot) {
    json payload = {{"endpoint", vec_json(robot.endpoint)}, {"busy", robot.busy()}};
    if (auto a = robot.action()) {
        payload["action"] = std::string(to_string(*a));
        payload["elapsed"] = robot.active->elapsed;
    } else {
        payload["action"] = nullptr;
    }
    return {EventKind::RobotState, session, frame, t, payload};
}

EventMessage error_event(const std::string& session, std::int64_t frame, double t, std::string_view code,
                         std::string_view text) {
    return {EventKind::Error, session, frame, t, {{"code", std::string(code)}, {"text", std::string(text)}}};
}

} // namespace teleop::stream
