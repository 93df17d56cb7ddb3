#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "teleop/graph/landmark_frame.hpp"

namespace teleop::graph {

struct Edge {
    std::uint32_t source = 0;
    std::uint32_t target = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected per-frame links as slot pairs: the BlazePose arm/hand chain plus finger-object.
inline constexpr std::array<std::pair<std::size_t, std::size_t>, 8> kSpatialLinks{{
    {0, 1},  // 11-12
    {1, 2},  // 12-14
    {2, 3},  // 14-16
    {3, 4},  // 16-18
    {3, 6},  // 16-22
    {3, 5},  // 16-20
    {4, 5},  // 18-20
    {5, 7},  // 20-object
}};

/// Edge structure shared by every window of the same size.
struct WindowTopology {
    std::size_t window_size = 0;
    std::size_t node_count = 0;
    std::vector<Edge> spatial;   ///< both directions of every link
    std::vector<Edge> temporal;  ///< both directions, node k of frame i <-> node k of frame i+1
    std::vector<Edge> all;       ///< spatial followed by temporal
};

/// Cached, immutable topology for a window size >= 1.
std::shared_ptr<const WindowTopology> window_topology(std::size_t window_size);

inline constexpr std::size_t node_index(std::size_t frame_offset, std::size_t slot) {
    return frame_offset * kNodesPerFrame + slot;
}

/// Node features and edges for N_w consecutive frames. Immutable after construction.
class WindowGraph {
public:
    WindowGraph(std::vector<Point2> node_features, std::shared_ptr<const WindowTopology> topology,
                std::int64_t first_frame, std::optional<int> label = std::nullopt);

    std::size_t window_size() const { return topology_->window_size; }
    std::size_t node_count() const { return topology_->node_count; }
    std::int64_t first_frame() const { return first_frame_; }
    std::int64_t last_frame() const { return first_frame_ + static_cast<std::int64_t>(window_size()) - 1; }
    std::optional<int> label() const { return label_; }

    /// (8 N_w) rows of (x, y), frame-major in fixed slot order.
    std::span<const Point2> node_features() const { return features_; }
    std::span<const Edge> spatial_edges() const { return topology_->spatial; }
    std::span<const Edge> temporal_edges() const { return topology_->temporal; }
    std::span<const Edge> edges() const { return topology_->all; }
    const std::shared_ptr<const WindowTopology>& topology() const { return topology_; }

    WindowGraph with_label(std::optional<int> label) const;

    friend bool operator==(const WindowGraph& a, const WindowGraph& b) {
        return a.window_size() == b.window_size() && a.first_frame_ == b.first_frame_ &&
               a.label_ == b.label_ && a.features_ == b.features_;
    }

private:
    std::vector<Point2> features_;
    std::shared_ptr<const WindowTopology> topology_;
    std::int64_t first_frame_ = 0;
    std::optional<int> label_;
};

/// Builds the window graph for exactly N_w frames with consecutive indices.
WindowGraph build_window_graph(std::span<const LandmarkFrame> frames,
                               std::optional<int> label = std::nullopt);

/// Same as build_window_graph but skips the consecutive-index check.
WindowGraph build_window_graph_unchecked(std::span<const LandmarkFrame> frames,
                                         std::optional<int> label = std::nullopt);

} // namespace teleop::graph
