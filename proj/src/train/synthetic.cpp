#include "teleop/train/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace teleop::train {

namespace {

using graph::Point2;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct VideoStyle {
    Point2 body_offset;
    double scale = 1.0;
    double speed = 1.0;
    double amplitude = 1.0;
    double phase = 0.0;  ///< cycles, in [0, 1)
    Point2 object_rest;
};

// Smooth 0 -> 1 ramp on [0, 1].
double smoothstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

// Plunge-and-retract depth profile over one cycle u in [0, 1): dwell, fast plunge, hold, slow retract.
double stab_profile(double u) {
    if (u < 0.40) return 0.0;
    if (u < 0.55) return smoothstep((u - 0.40) / 0.15);
    if (u < 0.65) return 1.0;
    return 1.0 - smoothstep((u - 0.65) / 0.35);
}

// Triangle wave in [-1, 1] with unit period.
double triangle(double u) {
    u -= std::floor(u);
    return u < 0.5 ? 4.0 * u - 1.0 : 3.0 - 4.0 * u;
}

struct Pose {
    Point2 finger;  // index finger, landmark 20
    Point2 object;
};

Pose action_pose(ActionClass action, double t, const VideoStyle& st, const SyntheticConfig& c) {
    const Point2 anchor{st.object_rest.x, st.object_rest.y - 0.08 * st.scale};
    const double amp = st.amplitude * st.scale;
    Pose p{anchor, st.object_rest};
    switch (action) {
    case ActionClass::Cut: {
        const double w = kTwoPi * (c.cut_frequency * st.speed * t + st.phase);
        p.finger = {anchor.x + 0.3 * c.cut_amplitude * amp * std::sin(2.0 * w),
                    anchor.y + c.cut_amplitude * amp * std::sin(w)};
        break;
    }
    case ActionClass::Stab: {
        double u = t * st.speed / c.stab_period + st.phase;
        u -= std::floor(u);
        p.finger = {anchor.x, anchor.y + c.stab_depth * amp * stab_profile(u)};
        break;
    }
    case ActionClass::Flip: {
        const double w = kTwoPi * (c.flip_frequency * st.speed * t + st.phase);
        const double r = c.flip_radius * amp;
        p.finger = {anchor.x + r * std::cos(w), anchor.y + r * std::sin(w)};
        const double lift = std::pow(std::max(0.0, -std::sin(w)), 2.0);  // apex: hand at the top of the arc
        p.object = {st.object_rest.x + 0.3 * r * std::cos(w) * lift, st.object_rest.y - c.flip_lift * amp * lift};
        break;
    }
    case ActionClass::Push: {
        const double x = anchor.x + c.push_travel * amp * triangle(t * st.speed / c.push_period + st.phase);
        p.finger = {x, anchor.y + 0.06 * st.scale};
        p.object = {x + 0.03 * st.scale, p.finger.y + 0.02 * st.scale};
        break;
    }
    }
    return p;
}

// Upper body posed around the finger; returns points in slot order.
std::array<Point2, graph::kNodesPerFrame> body_points(const Pose& pose, const VideoStyle& st) {
    const double s = st.scale;
    const Point2 off = st.body_offset;
    const Point2 left_shoulder{0.60 + off.x, 0.35 + off.y};
    const Point2 right_shoulder{0.60 - 0.20 * s + off.x, 0.35 + off.y};
    const Point2 f{pose.finger.x + off.x, pose.finger.y + off.y};
    const Point2 wrist{f.x + 0.010 * s, f.y - 0.035 * s};
    const Point2 elbow{0.5 * (right_shoulder.x + wrist.x) - 0.06 * s, 0.5 * (right_shoulder.y + wrist.y) + 0.03 * s};
    const Point2 pinky{f.x + 0.015 * s, f.y - 0.005 * s};
    const Point2 thumb{f.x - 0.020 * s, f.y - 0.010 * s};
    const Point2 object{pose.object.x + off.x, pose.object.y + off.y};
    return {left_shoulder, right_shoulder, elbow, wrist, pinky, f, thumb, object};
}

} // namespace

SyntheticConfig SyntheticConfig::from_json(const nlohmann::json& j) {
    SyntheticConfig c;
#define TELEOP_READ(field) c.field = j.value(#field, c.field)
    TELEOP_READ(frames);
    TELEOP_READ(fps);
    TELEOP_READ(dropout_probability);
    TELEOP_READ(body_jitter);
    TELEOP_READ(scale_jitter);
    TELEOP_READ(speed_jitter);
    TELEOP_READ(amplitude_jitter);
    TELEOP_READ(cut_frequency);
    TELEOP_READ(cut_amplitude);
    TELEOP_READ(stab_period);
    TELEOP_READ(stab_depth);
    TELEOP_READ(flip_frequency);
    TELEOP_READ(flip_radius);
    TELEOP_READ(flip_lift);
    TELEOP_READ(push_period);
    TELEOP_READ(push_travel);
#undef TELEOP_READ
    return c;
}

nlohmann::json SyntheticConfig::to_json() const {
    return {{"frames", frames},
            {"fps", fps},
            {"dropout_probability", dropout_probability},
            {"body_jitter", body_jitter},
            {"scale_jitter", scale_jitter},
            {"speed_jitter", speed_jitter},
            {"amplitude_jitter", amplitude_jitter},
            {"cut_frequency", cut_frequency},
            {"cut_amplitude", cut_amplitude},
            {"stab_period", stab_period},
            {"stab_depth", stab_depth},
            {"flip_frequency", flip_frequency},
            {"flip_radius", flip_radius},
            {"flip_lift", flip_lift},
            {"push_period", push_period},
            {"push_travel", push_travel}};
}

VideoRecord generate_synthetic_video(ActionClass action, std::uint64_t seed, double noise_level,
                                     const SyntheticConfig& c) {
    if (noise_level < 0.0) throw ValidationError("noise level must be >= 0");
    if (c.frames < 1 || !(c.fps > 0.0)) throw ConfigError("synthetic video needs frames >= 1 and fps > 0");

    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(to_index(action) + 1)));
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    VideoStyle st;
    st.body_offset = {c.body_jitter * sym(rng), c.body_jitter * sym(rng)};
    st.scale = 1.0 + c.scale_jitter * sym(rng);
    st.speed = 1.0 + c.speed_jitter * sym(rng);
    st.amplitude = 1.0 + c.amplitude_jitter * sym(rng);
    st.phase = unit(rng);
    st.object_rest = {0.45 + 0.03 * sym(rng), 0.75 + 0.02 * sym(rng)};

    std::normal_distribution<double> jitter(0.0, 1.0);
    std::bernoulli_distribution drop(std::clamp(c.dropout_probability, 0.0, 1.0));

    VideoRecord video;
    video.label = action;
    video.source = VideoSource::Synthetic;
    video.seed = seed;
    char id[64];
    std::snprintf(id, sizeof id, "%s_s%llu", std::string(to_string(action)).c_str(),
                  static_cast<unsigned long long>(seed));
    video.id = id;
    video.frames.reserve(static_cast<std::size_t>(c.frames));

    for (int i = 0; i < c.frames; ++i) {
        const double t = i / c.fps;
        const auto pts = body_points(action_pose(action, t, st, c), st);
        graph::LandmarkFrame frame;
        frame.frame_index = i;
        frame.timestamp = t;
        for (std::size_t slot = 0; slot < pts.size(); ++slot) {
            // Draw unconditionally so the random stream does not depend on which points drop.
            const bool dropped = drop(rng) && i > 0;
            const double nx = jitter(rng) * noise_level, ny = jitter(rng) * noise_level;
            if (dropped) continue;
            Point2 p{std::clamp(pts[slot].x + nx, graph::kCoordMin, graph::kCoordMax),
                     std::clamp(pts[slot].y + ny, graph::kCoordMin, graph::kCoordMax)};
            frame.points[slot] = {p, graph::Validity::Observed};
        }
        video.frames.push_back(frame);
    }
    return video;
}

std::vector<VideoRecord> generate_corpus(int videos_per_class, std::uint64_t base_seed, double noise_level,
                                         const SyntheticConfig& config) {
    std::vector<VideoRecord> videos;
    std::seed_seq seq{base_seed};
    std::vector<std::uint32_t> raw(static_cast<std::size_t>(2 * videos_per_class * 4));
    seq.generate(raw.begin(), raw.end());
    std::size_t k = 0;
    for (ActionClass a : kAllActions) {
        for (int v = 0; v < videos_per_class; ++v, k += 2) {
            const std::uint64_t seed = (static_cast<std::uint64_t>(raw[k]) << 32) | raw[k + 1];
            VideoRecord rec = generate_synthetic_video(a, seed, noise_level, config);
            char id[32];
            std::snprintf(id, sizeof id, "%s_%03d", std::string(to_string(a)).c_str(), v);
            rec.id = id;
            videos.push_back(std::move(rec));
        }
    }
    return videos;
}

} // namespace teleop::train
