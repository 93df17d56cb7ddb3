#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>

#include "teleop/graph/landmark_frame.hpp"
#include "teleop/graph/window_graph.hpp"

namespace teleop::graph {

enum class GapPolicy {
    Reject,              ///< a skipped frame index raises FrameGapError
    TreatAsConsecutive,  ///< indices with holes are buffered as if adjacent
};

class FrameOrderError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class FrameGapError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

enum class PushStatus {
    Filling,           ///< frame buffered, window not yet full
    Emitted,           ///< window full, graph returned
    AwaitingShoulder,  ///< dropped: no left-shoulder position known yet
};

struct PushResult {
    PushStatus status = PushStatus::Filling;
    std::optional<WindowGraph> graph;
};

/// Sliding window over a landmark stream with per-point carry-forward.
///
/// Single writer. Emits one WindowGraph per push once N_w frames are held.
class WindowBuffer {
public:
    explicit WindowBuffer(std::size_t window_size, GapPolicy gap_policy = GapPolicy::Reject);

    /// Throws FrameOrderError for a non-increasing index and, under
    /// GapPolicy::Reject, FrameGapError for a skipped index. A throwing push
    /// leaves the buffer unchanged.
    PushResult push(LandmarkFrame frame);

    /// Drops buffered frames; the carry-forward cache and last index survive.
    void restart();

    std::size_t window_size() const { return window_size_; }
    std::size_t buffered() const { return frames_.size(); }
    std::optional<std::int64_t> last_index() const { return last_index_; }

    /// Carry-forward applied to a raw frame against the current cache, without buffering.
    LandmarkFrame fill_missing(const LandmarkFrame& frame) const;

private:
    std::size_t window_size_;
    GapPolicy gap_policy_;
    std::deque<LandmarkFrame> frames_;
    std::array<std::optional<Point2>, kNodesPerFrame> last_seen_{};
    std::optional<std::int64_t> last_index_;
};

} // namespace teleop::graph
