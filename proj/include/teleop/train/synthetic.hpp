#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "teleop/common/action.hpp"
#include "teleop/graph/landmark_frame.hpp"

namespace teleop::train {

enum class VideoSource { Synthetic, Recorded };

struct VideoRecord {
    std::string id;
    ActionClass label = ActionClass::Cut;
    std::vector<graph::LandmarkFrame> frames;
    VideoSource source = VideoSource::Synthetic;
    std::optional<std::uint64_t> seed;
};

/// Motion-model parameters for the synthetic corpus. Distances are in
/// normalized frame units, frequencies in Hz.
struct SyntheticConfig {
    int frames = 150;
    double fps = 20.0;
    double dropout_probability = 0.01;  ///< per point per frame, before noise

    double body_jitter = 0.05;    ///< uniform whole-body offset per video
    double scale_jitter = 0.10;   ///< relative limb-scale variation
    double speed_jitter = 0.20;   ///< relative tempo variation
    double amplitude_jitter = 0.20;

    double cut_frequency = 1.5;
    double cut_amplitude = 0.08;
    double stab_period = 1.6;
    double stab_depth = 0.16;
    double flip_frequency = 0.8;
    double flip_radius = 0.096;
    double flip_lift = 0.08;
    double push_period = 2.0;
    double push_travel = 0.16;

    static SyntheticConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Deterministic per (action, seed, noise_level, config). Gaussian jitter with
/// standard deviation noise_level is added to every observed point.
VideoRecord generate_synthetic_video(ActionClass action, std::uint64_t seed, double noise_level,
                                     const SyntheticConfig& config = {});

/// videos_per_class videos of each action, ids like "cut_003", seeds derived from base_seed.
std::vector<VideoRecord> generate_corpus(int videos_per_class, std::uint64_t base_seed, double noise_level,
                                         const SyntheticConfig& config = {});

} // namespace teleop::train
