#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "teleop/gnn/gcn.hpp"
#include "teleop/graph/window_graph.hpp"
#include "teleop/train/synthetic.hpp"

namespace teleop::train {

struct SampleOrigin {
    std::size_t video = 0;         ///< index into the source video list
    std::int64_t start_frame = 0;
};

/// Every contiguous window of every video, labeled by its video.
struct WindowedDataset {
    std::size_t window_size = 0;
    std::vector<graph::WindowGraph> graphs;
    std::vector<int> labels;
    std::vector<SampleOrigin> origins;

    std::size_t size() const { return graphs.size(); }
    bool empty() const { return graphs.empty(); }
    std::vector<gnn::GraphView> views() const;
};

/// N_s = N_v (N_f - N_w + 1) for equal-length videos.
constexpr std::size_t expected_sample_count(std::size_t videos, std::size_t frames, std::size_t window) {
    return window > frames ? 0 : videos * (frames - window + 1);
}

/// Streams each video through a WindowBuffer (carry-forward included).
/// Throws ValidationError when window_size exceeds a video's length.
WindowedDataset window_dataset(std::span<const VideoRecord> videos, std::size_t window_size);

/// Same, restricted to the listed video indices; origins keep the indices into videos.
WindowedDataset window_dataset(std::span<const VideoRecord> videos, std::span<const std::size_t> subset,
                               std::size_t window_size);

struct SplitRatios {
    double train = 0.70;
    double valid = 0.15;
    double test = 0.15;
};

/// Video indices per split.
struct VideoSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    std::vector<std::size_t> test;
};

/// Class-stratified split at video granularity, deterministic per seed.
/// Per class: n_train = round(n r_train), n_valid = round(n r_valid), test gets the rest.
/// Throws ValidationError when ratios do not sum to 1 or a class ends up absent from a split.
VideoSplit split_by_video(std::span<const VideoRecord> videos, SplitRatios ratios, std::uint64_t seed);

/// On-disk corpus: <dir>/manifest.json (id, label, split, seed, source, file) plus one JSONL file per video.
struct LoadedDataset {
    std::vector<VideoRecord> videos;
    VideoSplit split;
    nlohmann::json metadata;
};

void write_dataset(const std::filesystem::path& dir, std::span<const VideoRecord> videos, const VideoSplit& split,
                   const nlohmann::json& metadata = nlohmann::json::object());

LoadedDataset read_dataset(const std::filesystem::path& dir);

} // namespace teleop::train
