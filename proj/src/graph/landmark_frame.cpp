#include "teleop/graph/landmark_frame.hpp"

#include <cmath>
#include <string>

namespace teleop::graph {

std::optional<std::size_t> slot_for_landmark(int id) {
    for (std::size_t i = 0; i < kLandmarkIds.size(); ++i) {
        if (kLandmarkIds[i] == id) return i;
    }
    return std::nullopt;
}

const PointSample& LandmarkFrame::landmark(int id) const {
    auto slot = slot_for_landmark(id);
    if (!slot) throw ValidationError("untracked landmark id " + std::to_string(id));
    return points[*slot];
}

PointSample& LandmarkFrame::landmark(int id) {
    auto slot = slot_for_landmark(id);
    if (!slot) throw ValidationError("untracked landmark id " + std::to_string(id));
    return points[*slot];
}

namespace {

std::string slot_name(std::size_t slot) {
    return slot == kObjectSlot ? std::string("object") : "landmark " + std::to_string(kLandmarkIds[slot]);
}

void check_point(const Point2& p, std::size_t slot, std::int64_t frame_index) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw ValidationError("frame " + std::to_string(frame_index) + ": non-finite " + slot_name(slot));
    }
    if (p.x < kCoordMin || p.x > kCoordMax || p.y < kCoordMin || p.y > kCoordMax) {
        throw ValidationError("frame " + std::to_string(frame_index) + ": " + slot_name(slot) +
                              " outside normalized range [" + std::to_string(kCoordMin) + ", " +
                              std::to_string(kCoordMax) + "]");
    }
}

} // namespace

void validate_frame(const LandmarkFrame& frame) {
    if (frame.frame_index < 0) throw ValidationError("negative frame index");
    if (!std::isfinite(frame.timestamp)) throw ValidationError("non-finite timestamp");
    for (std::size_t slot = 0; slot < kNodesPerFrame; ++slot) {
        if (frame.points[slot].present()) check_point(frame.points[slot].xy, slot, frame.frame_index);
    }
}

LandmarkFrame normalize_frame(const RawPoints& raw, FrameDims dims, std::int64_t frame_index,
                              double timestamp) {
    if (!(dims.width > 0.0) || !(dims.height > 0.0) || !std::isfinite(dims.width) ||
        !std::isfinite(dims.height)) {
        throw ConfigError("frame dimensions must be positive");
    }
    LandmarkFrame frame;
    frame.frame_index = frame_index;
    frame.timestamp = timestamp;
    auto put = [&](std::size_t slot, const std::optional<Point2>& px) {
        if (!px) return;
        frame.points[slot] = {{px->x / dims.width, px->y / dims.height}, Validity::Observed};
    };
    for (std::size_t i = 0; i < kLandmarkCount; ++i) put(i, raw.landmarks[i]);
    put(kObjectSlot, raw.object);
    validate_frame(frame);
    return frame;
}

NodeFeatures build_frame_nodes(const LandmarkFrame& frame) {
    const PointSample& shoulder = frame.points[kLeftShoulderSlot];
    if (!shoulder.present()) throw AwaitingObservation();
    NodeFeatures out;
    for (std::size_t slot = 0; slot < kNodesPerFrame; ++slot) {
        const Point2& p = frame.points[slot].xy;
        out[slot] = {p.x - shoulder.xy.x, p.y - shoulder.xy.y};
    }
    out[kLeftShoulderSlot] = {0.0, 0.0};
    return out;
}

} // namespace teleop::graph
