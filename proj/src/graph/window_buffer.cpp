#include "teleop/graph/window_buffer.hpp"

#include <string>
#include <vector>

namespace teleop::graph {

WindowBuffer::WindowBuffer(std::size_t window_size, GapPolicy gap_policy)
    : window_size_(window_size), gap_policy_(gap_policy) {
    if (window_size_ < 1) throw ConfigError("window size must be >= 1");
}

LandmarkFrame WindowBuffer::fill_missing(const LandmarkFrame& frame) const {
    LandmarkFrame out = frame;
    for (std::size_t slot = 0; slot < kNodesPerFrame; ++slot) {
        PointSample& p = out.points[slot];
        if (p.validity == Validity::Observed) continue;
        if (last_seen_[slot]) {
            p = {*last_seen_[slot], Validity::Carried};
        } else {
            p = {{0.0, 0.0}, Validity::Missing};
        }
    }
    return out;
}

PushResult WindowBuffer::push(LandmarkFrame frame) {
    if (last_index_ && frame.frame_index <= *last_index_) {
        throw FrameOrderError("out-of-order frame " + std::to_string(frame.frame_index) + " after " +
                              std::to_string(*last_index_));
    }
    if (gap_policy_ == GapPolicy::Reject && !frames_.empty() &&
        frame.frame_index != frames_.back().frame_index + 1) {
        throw FrameGapError("frame gap: " + std::to_string(frames_.back().frame_index) + " -> " +
                            std::to_string(frame.frame_index));
    }
    validate_frame(frame);

    LandmarkFrame filled = fill_missing(frame);
    for (std::size_t slot = 0; slot < kNodesPerFrame; ++slot) {
        if (frame.points[slot].validity == Validity::Observed) last_seen_[slot] = frame.points[slot].xy;
    }
    last_index_ = frame.frame_index;

    if (!filled.points[kLeftShoulderSlot].present()) return {PushStatus::AwaitingShoulder, std::nullopt};

    frames_.push_back(std::move(filled));
    if (frames_.size() > window_size_) frames_.pop_front();
    if (frames_.size() < window_size_) return {PushStatus::Filling, std::nullopt};

    std::vector<LandmarkFrame> window(frames_.begin(), frames_.end());
    return {PushStatus::Emitted, build_window_graph_unchecked(window)};
}

void WindowBuffer::restart() { frames_.clear(); }

} // namespace teleop::graph
