#pragma once

#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "teleop/fsm/robot.hpp"
#include "teleop/graph/frame_io.hpp"
#include "teleop/stream/messages.hpp"
#include "teleop/train/synthetic.hpp"

namespace teleop::testing {

inline std::shared_ptr<const fsm::TrajectoryLibrary> shipped_trajectories() {
    return std::make_shared<const fsm::TrajectoryLibrary>(
        fsm::TrajectoryLibrary::load(std::filesystem::path(TELEOP_CONFIG_DIR) / "trajectories.json"));
}

/// Gap-free stream at the generator's frame rate, as JSONL text.
inline std::string stream_text(std::size_t frames, double fps = 20.0, std::uint64_t seed = 3,
                               ActionClass action = ActionClass::Cut) {
    train::SyntheticConfig cfg;
    cfg.frames = static_cast<int>(frames);
    cfg.fps = fps;
    auto video = train::generate_synthetic_video(action, seed, 0.01, cfg);
    std::ostringstream out;
    for (const auto& f : video.frames) out << graph::frame_to_line(f) << '\n';
    return out.str();
}

inline std::vector<stream::EventMessage> of_kind(const std::vector<stream::EventMessage>& events,
                                                 stream::EventKind kind) {
    std::vector<stream::EventMessage> out;
    for (const auto& e : events) {
        if (e.kind == kind) out.push_back(e);
    }
    return out;
}

} // namespace teleop::testing
