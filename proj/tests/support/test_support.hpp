#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "teleop/graph/landmark_frame.hpp"

namespace teleop::testing {

/// Fully observed frame with every point drawn uniformly from [lo, hi].
inline graph::LandmarkFrame random_frame(std::mt19937_64& rng, std::int64_t index, double lo = 0.1,
                                         double hi = 0.9) {
    std::uniform_real_distribution<double> u(lo, hi);
    graph::LandmarkFrame f;
    f.frame_index = index;
    f.timestamp = static_cast<double>(index) / 20.0;
    for (auto& p : f.points) p = {{u(rng), u(rng)}, graph::Validity::Observed};
    return f;
}

/// Random stream with independent per-point dropout (shoulder never dropped in frame 0).
inline std::vector<graph::LandmarkFrame> random_stream(std::uint64_t seed, std::size_t length,
                                                       double dropout) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution drop(dropout);
    std::vector<graph::LandmarkFrame> frames;
    for (std::size_t i = 0; i < length; ++i) {
        auto f = random_frame(rng, static_cast<std::int64_t>(i));
        for (std::size_t s = 0; s < f.points.size(); ++s) {
            if (i == 0 && s == graph::kLeftShoulderSlot) continue;
            if (drop(rng)) f.points[s] = {};
        }
        frames.push_back(f);
    }
    return frames;
}

} // namespace teleop::testing
