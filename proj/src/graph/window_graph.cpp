#include "teleop/graph/window_graph.hpp"

#include <map>
#include <mutex>
#include <string>

namespace teleop::graph {

namespace {

std::shared_ptr<const WindowTopology> make_topology(std::size_t window_size) {
    auto topo = std::make_shared<WindowTopology>();
    topo->window_size = window_size;
    topo->node_count = kNodesPerFrame * window_size;
    topo->spatial.reserve(2 * kSpatialLinks.size() * window_size);
    topo->temporal.reserve(2 * kNodesPerFrame * (window_size - 1));
    for (std::size_t f = 0; f < window_size; ++f) {
        for (auto [a, b] : kSpatialLinks) {
            auto u = static_cast<std::uint32_t>(node_index(f, a));
            auto v = static_cast<std::uint32_t>(node_index(f, b));
            topo->spatial.push_back({u, v});
            topo->spatial.push_back({v, u});
        }
    }
    for (std::size_t f = 0; f + 1 < window_size; ++f) {
        for (std::size_t k = 0; k < kNodesPerFrame; ++k) {
            auto u = static_cast<std::uint32_t>(node_index(f, k));
            auto v = static_cast<std::uint32_t>(node_index(f + 1, k));
            topo->temporal.push_back({u, v});
            topo->temporal.push_back({v, u});
        }
    }
    topo->all = topo->spatial;
    topo->all.insert(topo->all.end(), topo->temporal.begin(), topo->temporal.end());
    return topo;
}

} // namespace

std::shared_ptr<const WindowTopology> window_topology(std::size_t window_size) {
    if (window_size < 1) throw ValidationError("window size must be >= 1");
    static std::mutex mutex;
    static std::map<std::size_t, std::shared_ptr<const WindowTopology>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[window_size];
    if (!slot) slot = make_topology(window_size);
    return slot;
}

WindowGraph::WindowGraph(std::vector<Point2> node_features,
                         std::shared_ptr<const WindowTopology> topology, std::int64_t first_frame,
                         std::optional<int> label)
    : features_(std::move(node_features)),
      topology_(std::move(topology)),
      first_frame_(first_frame),
      label_(label) {
    if (!topology_) throw ValidationError("window graph without topology");
    if (features_.size() != topology_->node_count) {
        throw ShapeError("window graph expects " + std::to_string(topology_->node_count) +
                         " node features, got " + std::to_string(features_.size()));
    }
}

WindowGraph WindowGraph::with_label(std::optional<int> label) const {
    WindowGraph copy = *this;
    copy.label_ = label;
    return copy;
}

WindowGraph build_window_graph_unchecked(std::span<const LandmarkFrame> frames,
                                         std::optional<int> label) {
    if (frames.empty()) throw ValidationError("window needs at least one frame");
    auto topo = window_topology(frames.size());
    std::vector<Point2> features;
    features.reserve(topo->node_count);
    for (const LandmarkFrame& frame : frames) {
        NodeFeatures nodes = build_frame_nodes(frame);
        features.insert(features.end(), nodes.begin(), nodes.end());
    }
    return WindowGraph(std::move(features), std::move(topo), frames.front().frame_index, label);
}

WindowGraph build_window_graph(std::span<const LandmarkFrame> frames, std::optional<int> label) {
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (frames[i].frame_index != frames[i - 1].frame_index + 1) {
            throw ValidationError("non-consecutive frames in window: " +
                                  std::to_string(frames[i - 1].frame_index) + " then " +
                                  std::to_string(frames[i].frame_index));
        }
    }
    return build_window_graph_unchecked(frames, label);
}

} // namespace teleop::graph
