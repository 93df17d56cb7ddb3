#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "teleop/common/error.hpp"

namespace teleop::graph {

/// BlazePose ids of the tracked upper-body landmarks, in node order.
inline constexpr std::array<int, 7> kLandmarkIds{11, 12, 14, 16, 18, 20, 22};

inline constexpr std::size_t kLandmarkCount = kLandmarkIds.size();
inline constexpr std::size_t kNodesPerFrame = kLandmarkCount + 1;
inline constexpr std::size_t kLeftShoulderSlot = 0;
inline constexpr std::size_t kIndexFingerSlot = 5;
inline constexpr std::size_t kObjectSlot = 7;

/// Admissible range for normalized coordinates (off-frame slack included).
inline constexpr double kCoordMin = -0.25;
inline constexpr double kCoordMax = 1.25;

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

enum class Validity : std::uint8_t {
    Missing,   ///< never observed; coordinates are (0, 0)
    Observed,
    Carried,   ///< copied from the last observation of this point
};

struct PointSample {
    Point2 xy;
    Validity validity = Validity::Missing;

    bool present() const { return validity != Validity::Missing; }
    friend bool operator==(const PointSample&, const PointSample&) = default;
};

/// One timestamped frame of normalized absolute coordinates.
///
/// Slots follow the fixed node order [11, 12, 14, 16, 18, 20, 22, object].
/// Relativization to the left shoulder happens in build_frame_nodes so that
/// carry-forward operates on absolute positions.
struct LandmarkFrame {
    std::int64_t frame_index = 0;
    double timestamp = 0.0;
    std::array<PointSample, kNodesPerFrame> points{};

    const PointSample& landmark(int id) const;
    PointSample& landmark(int id);
    const PointSample& object() const { return points[kObjectSlot]; }
    PointSample& object() { return points[kObjectSlot]; }

    friend bool operator==(const LandmarkFrame&, const LandmarkFrame&) = default;
};

/// Slot index of a BlazePose id, or nullopt for untracked ids.
std::optional<std::size_t> slot_for_landmark(int id);

struct FrameDims {
    double width = 640.0;
    double height = 480.0;
};

/// Pixel-space detections for one frame; nullopt marks an undetected point.
struct RawPoints {
    std::array<std::optional<Point2>, kLandmarkCount> landmarks{};
    std::optional<Point2> object;
};

/// Divides pixel coordinates by the frame size and validates the result.
/// Throws ConfigError on non-positive dims, ValidationError on non-finite or
/// out-of-slack coordinates.
LandmarkFrame normalize_frame(const RawPoints& raw, FrameDims dims, std::int64_t frame_index,
                              double timestamp);

/// Checks finiteness and the [kCoordMin, kCoordMax] range of present points.
void validate_frame(const LandmarkFrame& frame);

/// Raised while no left-shoulder observation exists to anchor the features.
class AwaitingObservation : public Error {
public:
    AwaitingObservation() : Error("awaiting first full observation (left shoulder never seen)") {}
};

/// Per-frame node features: each point minus the left shoulder of the same frame.
using NodeFeatures = std::array<Point2, kNodesPerFrame>;

NodeFeatures build_frame_nodes(const LandmarkFrame& frame);

} // namespace teleop::graph
