#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "teleop/graph/frame_io.hpp"
#include "teleop/graph/landmark_frame.hpp"
#include "teleop/graph/window_buffer.hpp"
#include "teleop/graph/window_graph.hpp"
#include "graph_oracle.hpp"
#include "test_support.hpp"

using namespace teleop;
using namespace teleop::graph;
using teleop::testing::enumerate_edges;

namespace {

RawPoints all_at(Point2 px) {
    RawPoints raw;
    for (auto& l : raw.landmarks) l = px;
    raw.object = px;
    return raw;
}

LandmarkFrame uniform_frame(std::int64_t index, Point2 p) {
    LandmarkFrame f;
    f.frame_index = index;
    f.timestamp = static_cast<double>(index) * 0.05;
    for (auto& s : f.points) s = {p, Validity::Observed};
    return f;
}

std::vector<LandmarkFrame> uniform_frames(std::size_t n) {
    std::vector<LandmarkFrame> frames;
    for (std::size_t i = 0; i < n; ++i) frames.push_back(uniform_frame(static_cast<std::int64_t>(i), {0.5, 0.5}));
    return frames;
}

// Replay oracle for carry-forward, written separately from WindowBuffer.
std::vector<LandmarkFrame> replay_carry_forward(const std::vector<LandmarkFrame>& raw) {
    std::vector<LandmarkFrame> out;
    std::array<std::optional<Point2>, 8> last{};
    for (const auto& f : raw) {
        LandmarkFrame g = f;
        for (std::size_t s = 0; s < 8; ++s) {
            if (f.points[s].validity == Validity::Observed) {
                last[s] = f.points[s].xy;
            } else if (last[s]) {
                g.points[s] = {*last[s], Validity::Carried};
            } else {
                g.points[s] = {{0, 0}, Validity::Missing};
            }
        }
        out.push_back(g);
    }
    return out;
}

} // namespace

TEST_CASE("normalize_frame divides by frame size") {
    const FrameDims dims{640, 480};
    CHECK(normalize_frame(all_at({320, 240}), dims, 0, 0).points[0].xy == Point2{0.5, 0.5});
    CHECK(normalize_frame(all_at({0, 0}), dims, 0, 0).points[3].xy == Point2{0.0, 0.0});
    auto corner = normalize_frame(all_at({640, 480}), dims, 0, 0);
    CHECK(corner.object().xy == Point2{1.0, 1.0});
    CHECK(corner.object().validity == Validity::Observed);
}

TEST_CASE("normalize_frame rejects bad input") {
    CHECK_THROWS_AS(normalize_frame(all_at({1, 1}), {0, 480}, 0, 0), ConfigError);
    CHECK_THROWS_AS(normalize_frame(all_at({NAN, 1}), {640, 480}, 0, 0), ValidationError);
    CHECK_THROWS_AS(normalize_frame(all_at({INFINITY, 1}), {640, 480}, 0, 0), ValidationError);
    CHECK_THROWS_AS(normalize_frame(all_at({900, 1}), {640, 480}, 0, 0), ValidationError);
    // inside the slack band
    CHECK_NOTHROW(normalize_frame(all_at({-100, 580}), {640, 480}, 0, 0));

    RawPoints partial = all_at({10, 10});
    partial.object.reset();
    partial.landmarks[4].reset();
    auto f = normalize_frame(partial, {640, 480}, 3, 0.15);
    CHECK(f.object().validity == Validity::Missing);
    CHECK(f.landmark(18).validity == Validity::Missing);
    CHECK(f.landmark(20).validity == Validity::Observed);
}

TEST_CASE("build_frame_nodes relativizes to the left shoulder") {
    auto same = build_frame_nodes(uniform_frame(0, {0.5, 0.5}));
    for (const auto& p : same) CHECK(p == Point2{0.0, 0.0});

    auto f = uniform_frame(0, {0.5, 0.5});
    f.object().xy = {0.6, 0.5};
    auto nodes = build_frame_nodes(f);
    CHECK(nodes[kObjectSlot].x == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(nodes[kObjectSlot].y == 0.0);

    LandmarkFrame no_shoulder = uniform_frame(0, {0.5, 0.5});
    no_shoulder.points[kLeftShoulderSlot] = {};
    CHECK_THROWS_AS(build_frame_nodes(no_shoulder), AwaitingObservation);
}

TEST_CASE("node features are shift invariant") {
    std::mt19937_64 rng(11);
    SUBCASE("decimal offset agrees to rounding") {
        for (int trial = 0; trial < 200; ++trial) {
            auto f = teleop::testing::random_frame(rng, 0);
            auto shifted = f;
            for (auto& p : shifted.points) p.xy = {p.xy.x + 0.07, p.xy.y - 0.02};
            auto a = build_frame_nodes(f);
            auto b = build_frame_nodes(shifted);
            for (std::size_t s = 0; s < 8; ++s) {
                CHECK(std::abs(a[s].x - b[s].x) < 1e-12);
                CHECK(std::abs(a[s].y - b[s].y) < 1e-12);
            }
        }
    }
    SUBCASE("exactly representable offsets are bitwise invariant") {
        std::uniform_int_distribution<int> grid(0, 1 << 12);
        for (int trial = 0; trial < 200; ++trial) {
            LandmarkFrame f;
            for (auto& p : f.points) {
                p = {{grid(rng) / 8192.0 + 0.125, grid(rng) / 8192.0 + 0.125}, Validity::Observed};
            }
            const Point2 offset{grid(rng) / 16384.0 - 0.125, grid(rng) / 16384.0 - 0.125};
            auto shifted = f;
            for (auto& p : shifted.points) p.xy = {p.xy.x + offset.x, p.xy.y + offset.y};
            CHECK(build_frame_nodes(f) == build_frame_nodes(shifted));
        }
    }
}

TEST_CASE("window graph counts follow the closed forms for every window size up to 150") {
    for (std::size_t n = 1; n <= 150; ++n) {
        auto topo = window_topology(n);
        REQUIRE(topo->node_count == 8 * n);
        REQUIRE(topo->spatial.size() == 16 * n);
        REQUIRE(topo->temporal.size() == 16 * (n - 1));
        for (const Edge& e : topo->all) {
            REQUIRE(e.source < topo->node_count);
            REQUIRE(e.target < topo->node_count);
        }
        for (const Edge& e : topo->spatial) REQUIRE(e.source / 8 == e.target / 8);
        for (const Edge& e : topo->temporal) {
            REQUIRE(e.source % 8 == e.target % 8);
            REQUIRE((e.source / 8 + 1 == e.target / 8 || e.target / 8 + 1 == e.source / 8));
        }
    }
}

TEST_CASE("window graph edges match brute-force enumeration") {
    for (std::size_t n : {1u, 2u, 4u, 40u}) {
        auto census = enumerate_edges(n);
        auto g = build_window_graph(uniform_frames(n));
        CHECK(g.node_count() == 8 * n);
        CHECK(g.spatial_edges().size() == census.spatial);
        CHECK(g.temporal_edges().size() == census.temporal);
        std::set<std::pair<std::uint32_t, std::uint32_t>> spatial, temporal;
        for (auto e : g.spatial_edges()) spatial.insert({e.source, e.target});
        for (auto e : g.temporal_edges()) temporal.insert({e.source, e.target});
        CHECK(spatial == census.spatial_set);
        CHECK(temporal == census.temporal_set);
    }
    // N_w = 1, 4, 40 reference numbers
    CHECK(enumerate_edges(1).spatial == 16);
    CHECK(enumerate_edges(1).temporal == 0);
    CHECK(enumerate_edges(4).spatial == 64);
    CHECK(enumerate_edges(4).temporal == 48);
    CHECK(enumerate_edges(40).spatial == 640);
    CHECK(enumerate_edges(40).temporal == 624);
}

TEST_CASE("build_window_graph validates its frames") {
    auto frames = uniform_frames(3);
    frames[2].frame_index = 7;
    CHECK_THROWS_AS(build_window_graph(frames), ValidationError);
    CHECK_THROWS_AS(build_window_graph(std::span<const LandmarkFrame>{}), ValidationError);
    CHECK_THROWS_AS(window_topology(0), ValidationError);
}

TEST_CASE("window buffer fill and advance") {
    WindowBuffer buf(4);
    for (int i = 0; i < 3; ++i) {
        auto r = buf.push(uniform_frame(i, {0.5, 0.5}));
        CHECK(r.status == PushStatus::Filling);
        CHECK_FALSE(r.graph);
    }
    auto r = buf.push(uniform_frame(3, {0.5, 0.5}));
    REQUIRE(r.graph);
    CHECK(r.graph->first_frame() == 0);
    CHECK(r.graph->node_count() == 32);

    WindowBuffer twenty(4);
    int emitted = 0;
    for (int i = 0; i < 20; ++i) emitted += twenty.push(uniform_frame(i, {0.4, 0.4})).graph ? 1 : 0;
    CHECK(emitted == 17);
}

TEST_CASE("window buffer carries missing points forward") {
    WindowBuffer buf(2);
    auto a = uniform_frame(0, {0.5, 0.5});
    a.object().xy = {0.3, 0.3};
    buf.push(a);
    auto b = uniform_frame(1, {0.5, 0.5});
    b.object() = {};
    auto filled = buf.fill_missing(b);
    CHECK(filled.object().xy == Point2{0.3, 0.3});
    CHECK(filled.object().validity == Validity::Carried);
    auto r = buf.push(b);
    REQUIRE(r.graph);
    // object node of the second frame: (0.3, 0.3) - (0.5, 0.5)
    auto obj = r.graph->node_features()[node_index(1, kObjectSlot)];
    CHECK(obj.x == doctest::Approx(-0.2));
    CHECK(obj.y == doctest::Approx(-0.2));
}

TEST_CASE("window buffer ordering, gaps and missing shoulder") {
    WindowBuffer buf(3);
    buf.push(uniform_frame(5, {0.5, 0.5}));
    CHECK_THROWS_AS(buf.push(uniform_frame(5, {0.5, 0.5})), FrameOrderError);
    CHECK_THROWS_AS(buf.push(uniform_frame(4, {0.5, 0.5})), FrameOrderError);
    CHECK_THROWS_AS(buf.push(uniform_frame(8, {0.5, 0.5})), FrameGapError);
    CHECK(buf.buffered() == 1);

    WindowBuffer lenient(3, GapPolicy::TreatAsConsecutive);
    lenient.push(uniform_frame(0, {0.5, 0.5}));
    lenient.push(uniform_frame(4, {0.5, 0.5}));
    CHECK(lenient.push(uniform_frame(9, {0.5, 0.5})).graph.has_value());

    WindowBuffer waiting(2);
    auto f = uniform_frame(0, {0.5, 0.5});
    f.points[kLeftShoulderSlot] = {};
    CHECK(waiting.push(f).status == PushStatus::AwaitingShoulder);
    CHECK(waiting.buffered() == 0);
    CHECK(waiting.push(uniform_frame(1, {0.5, 0.5})).status == PushStatus::Filling);
}

TEST_CASE("streaming output equals slice-wise construction") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::size_t window = 1 + seed % 7;
        auto raw = teleop::testing::random_stream(seed, 60, 0.15);
        auto replayed = replay_carry_forward(raw);
        WindowBuffer buf(window);
        std::size_t k = 0;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            auto r = buf.push(raw[i]);
            if (i + 1 < window) {
                CHECK_FALSE(r.graph);
                continue;
            }
            REQUIRE(r.graph);
            auto expected = build_window_graph(std::span(replayed).subspan(i + 1 - window, window));
            CHECK(*r.graph == expected);
            ++k;
        }
        CHECK(k == raw.size() - window + 1);
    }
}

TEST_CASE("frame JSON schema") {
    auto j = nlohmann::json::parse(
        R"({"i": 4, "t": 0.2, "lm": {"11":[0.5,0.4], "12":[0.3,0.4], "14":[0.3,0.6], "16":[0.35,0.7],
            "18":[0.36,0.72], "20":[0.37,0.73], "22":[0.34,0.72]}, "obj": null, "extra": 1})");
    auto f = frame_from_json(j);
    CHECK(f.frame_index == 4);
    CHECK(f.landmark(11).xy == Point2{0.5, 0.4});
    CHECK(f.object().validity == Validity::Missing);
    CHECK(frame_from_json(frame_to_json(f)) == f);

    CHECK_THROWS_AS(frame_from_json(nlohmann::json::parse(R"({"i": 5})")), ValidationError);
    CHECK_THROWS_AS(frame_from_json(nlohmann::json::parse(R"({"i": 1, "t": 0, "lm": {"11": [2.0, 0.1]}})")),
                    ValidationError);
    CHECK_THROWS_AS(frame_from_json(nlohmann::json::parse(R"({"i": 1, "t": 0, "lm": {"11": [0.1]}})")),
                    ValidationError);
}
