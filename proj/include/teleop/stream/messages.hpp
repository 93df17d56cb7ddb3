#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "teleop/fsm/controller.hpp"
#include "teleop/graph/landmark_frame.hpp"

namespace teleop::stream {

inline constexpr int kProtocolVersion = 1;

/// A landmark frame addressed to a session. Wire form is the frame JSONL
/// schema plus "session" and "v".
struct FrameMessage {
    std::string session;
    int version = kProtocolVersion;
    graph::LandmarkFrame frame;

    /// Throws ValidationError on schema violations; a missing "v" or "session" is an error.
    static FrameMessage from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

enum class EventKind { Recognition, FsmTransition, RobotCommand, RobotState, Error, Metrics };

std::string_view to_string(EventKind k);
std::optional<EventKind> event_kind_from_string(std::string_view s);

/// Immutable output of a session pipeline.
struct EventMessage {
    EventKind kind = EventKind::Error;
    std::string session;
    std::int64_t frame = -1;  ///< frame index the event belongs to, -1 when none
    double t = 0.0;           ///< session clock, seconds
    nlohmann::json payload = nlohmann::json::object();

    nlohmann::json to_json() const;
    static EventMessage from_json(const nlohmann::json& j);
    /// Compact single-line form; key order is fixed, so equal events give equal bytes.
    std::string to_line() const;
};

EventMessage recognition_event(const std::string& session, std::int64_t frame, double t,
                               const std::array<double, 4>& probabilities, const fsm::FsmState& fsm);
EventMessage control_event(const std::string& session, std::int64_t frame, const fsm::ControlEvent& e);
EventMessage robot_state_event(const std::string& session, std::int64_t frame, double t, const fsm::RobotSim& robot);
EventMessage error_event(const std::string& session, std::int64_t frame, double t, std::string_view code,
                         std::string_view text);

/// Index of the largest probability; ties go to the lower class index.
ActionClass most_likely(const std::array<double, 4>& probabilities);

} // namespace teleop::stream
