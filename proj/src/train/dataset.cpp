#include "teleop/train/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "teleop/graph/frame_io.hpp"
#include "teleop/graph/window_buffer.hpp"

namespace teleop::train {

using nlohmann::json;

std::vector<gnn::GraphView> WindowedDataset::views() const {
    std::vector<gnn::GraphView> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) out.push_back(gnn::view_of(g));
    return out;
}

WindowedDataset window_dataset(std::span<const VideoRecord> videos, std::span<const std::size_t> subset,
                               std::size_t window_size) {
    if (window_size < 1) throw ValidationError("window size must be >= 1");
    WindowedDataset ds;
    ds.window_size = window_size;
    for (std::size_t v : subset) {
        const VideoRecord& video = videos[v];
        if (window_size > video.frames.size()) {
            throw ValidationError("window size " + std::to_string(window_size) + " exceeds the " +
                                  std::to_string(video.frames.size()) + " frames of video " + video.id);
        }
        graph::WindowBuffer buffer(window_size);
        for (const auto& frame : video.frames) {
            auto result = buffer.push(frame);
            if (!result.graph) continue;
            ds.origins.push_back({v, result.graph->first_frame()});
            ds.labels.push_back(to_index(video.label));
            ds.graphs.push_back(result.graph->with_label(to_index(video.label)));
        }
    }
    return ds;
}

WindowedDataset window_dataset(std::span<const VideoRecord> videos, std::size_t window_size) {
    std::vector<std::size_t> all(videos.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return window_dataset(videos, all, window_size);
}

VideoSplit split_by_video(std::span<const VideoRecord> videos, SplitRatios r, std::uint64_t seed) {
    if (r.train < 0 || r.valid < 0 || r.test < 0 || std::abs(r.train + r.valid + r.test - 1.0) > 1e-9) {
        throw ValidationError("split ratios must be non-negative and sum to 1");
    }
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < videos.size(); ++i) by_class[to_index(videos[i].label)].push_back(i);

    VideoSplit split;
    std::mt19937_64 rng(seed);
    for (ActionClass a : kAllActions) {
        auto& idx = by_class[to_index(a)];
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n = static_cast<double>(idx.size());
        const auto n_train = static_cast<std::size_t>(std::llround(n * r.train));
        const auto n_valid = std::min(idx.size() - std::min(idx.size(), n_train),
                                      static_cast<std::size_t>(std::llround(n * r.valid)));
        const std::size_t n_test = idx.size() - std::min(idx.size(), n_train + n_valid);
        if (n_train == 0 || n_valid == 0 || n_test == 0) {
            throw ValidationError("class " + std::string(to_string(a)) + " has no videos in some split (" +
                                  std::to_string(idx.size()) + " videos)");
        }
        split.train.insert(split.train.end(), idx.begin(), idx.begin() + static_cast<long>(n_train));
        split.valid.insert(split.valid.end(), idx.begin() + static_cast<long>(n_train),
                           idx.begin() + static_cast<long>(n_train + n_valid));
        split.test.insert(split.test.end(), idx.begin() + static_cast<long>(n_train + n_valid), idx.end());
    }
    for (auto* part : {&split.train, &split.valid, &split.test}) std::sort(part->begin(), part->end());
    return split;
}

namespace {

std::string source_name(VideoSource s) { return s == VideoSource::Synthetic ? "synthetic" : "recorded"; }

} // namespace

void write_dataset(const std::filesystem::path& dir, std::span<const VideoRecord> videos, const VideoSplit& split,
                   const json& metadata) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> split_of(videos.size());
    for (auto i : split.train) split_of.at(i) = "train";
    for (auto i : split.valid) split_of.at(i) = "valid";
    for (auto i : split.test) split_of.at(i) = "test";

    json entries = json::array();
    for (std::size_t i = 0; i < videos.size(); ++i) {
        const VideoRecord& v = videos[i];
        const std::string file = v.id + ".jsonl";
        graph::write_frames_jsonl(dir / file, v.frames);
        json e = {{"id", v.id},
                  {"label", std::string(to_string(v.label))},
                  {"split", split_of[i]},
                  {"source", source_name(v.source)},
                  {"file", file}};
        e["seed"] = v.seed ? json(*v.seed) : json(nullptr);
        entries.push_back(std::move(e));
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) throw ConfigError("cannot write manifest in " + dir.string());
    out << json{{"videos", std::move(entries)}, {"metadata", metadata}}.dump(2) << '\n';
}

LoadedDataset read_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ConfigError("no manifest.json in " + dir.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw ConfigError("malformed manifest: " + std::string(e.what()));
    }
    LoadedDataset ds;
    ds.metadata = manifest.value("metadata", json::object());
    for (const json& e : manifest.at("videos")) {
        VideoRecord v;
        v.id = e.at("id").get<std::string>();
        auto label = action_from_string(e.at("label").get<std::string>());
        if (!label) throw ConfigError("unknown label for video " + v.id);
        v.label = *label;
        v.source = e.value("source", std::string("synthetic")) == "recorded" ? VideoSource::Recorded
                                                                             : VideoSource::Synthetic;
        if (e.contains("seed") && !e["seed"].is_null()) v.seed = e["seed"].get<std::uint64_t>();
        v.frames = graph::read_frames_jsonl(dir / e.at("file").get<std::string>());
        const std::size_t idx = ds.videos.size();
        const std::string split = e.value("split", std::string());
        if (split == "train") ds.split.train.push_back(idx);
        else if (split == "valid") ds.split.valid.push_back(idx);
        else if (split == "test") ds.split.test.push_back(idx);
        ds.videos.push_back(std::move(v));
    }
    return ds;
}

} // namespace teleop::train
