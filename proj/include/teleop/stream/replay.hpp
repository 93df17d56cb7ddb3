#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <memory>
#include <ostream>
#include <vector>

#include "teleop/stream/session.hpp"

namespace teleop::stream {

struct ReplayConfig {
    SessionConfig session;
    std::string session_id = "replay";
    /// Wall-clock pacing relative to frame timestamps; 0 runs as fast as possible.
    /// Pacing never changes decisions, which follow frame timestamps only.
    double speed = 0.0;
};

struct ReplayResult {
    std::vector<EventMessage> events;
    LatencyMetrics metrics;
};

using EventSink = std::function<void(const EventMessage&)>;

/// Replays a recorded stream: one JSON object per line, either a frame in the
/// JSONL schema or an annotation {"mark": "action_end", "t": s, "action": name?}.
/// Bad lines become error events; the replay continues. The last event is a
/// metrics summary.
ReplayResult replay(std::istream& in, const ReplayConfig& config, std::shared_ptr<Recognizer> recognizer,
                    std::shared_ptr<const fsm::TrajectoryLibrary> library, const EventSink& sink = {});

ReplayResult replay_file(const std::filesystem::path& path, const ReplayConfig& config,
                         std::shared_ptr<Recognizer> recognizer, std::shared_ptr<const fsm::TrajectoryLibrary> library,
                         const EventSink& sink = {});

/// One event per line.
void write_event_log(std::ostream& out, const std::vector<EventMessage>& events);

} // namespace teleop::stream
