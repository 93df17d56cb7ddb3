#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "teleop/gnn/checkpoint.hpp"
#include "teleop/gnn/gcn.hpp"
#include "teleop/gnn/model.hpp"
#include "teleop/gnn/optim.hpp"
#include "teleop/graph/window_graph.hpp"
#include "test_support.hpp"

using namespace teleop;
using namespace teleop::gnn;
using teleop::testing::randomized_params;
using graph::Edge;

namespace {

using MatD = Matrix<double>;

// Dense oracle: D^-1/2 (A + I) D^-1/2 with A[t][s] = multiplicity of edge s->t.
MatD dense_normalized_adjacency(std::size_t n, std::span<const Edge> edges) {
    MatD a = MatD::Identity(static_cast<long>(n), static_cast<long>(n));
    for (const Edge& e : edges) a(e.target, e.source) += 1.0;
    Eigen::VectorXd deg = a.rowwise().sum();
    for (long i = 0; i < a.rows(); ++i)
        for (long j = 0; j < a.cols(); ++j) a(i, j) /= std::sqrt(deg(i) * deg(j));
    return a;
}

std::vector<graph::WindowGraph> random_windows(std::uint64_t seed, std::size_t count, std::size_t window) {
    std::vector<graph::WindowGraph> out;
    for (std::size_t k = 0; k < count; ++k) {
        auto frames = teleop::testing::random_stream(seed * 1000 + k, window, 0.0);
        out.push_back(graph::build_window_graph(frames));
    }
    return out;
}

std::vector<GraphView> views(const std::vector<graph::WindowGraph>& gs) {
    std::vector<GraphView> v;
    for (const auto& g : gs) v.push_back(view_of(g));
    return v;
}

} // namespace

TEST_CASE("gcn layer on an isolated node is the identity") {
    MatD x(1, 2);
    x << 0.3, -0.7;
    auto out = gcn_layer_forward<double>(x, {}, MatD::Identity(2, 2), RowVector<double>::Zero(2));
    CHECK(out(0, 0) == doctest::Approx(0.3));
    CHECK(out(0, 1) == doctest::Approx(-0.7));
}

TEST_CASE("gcn layer on two connected nodes averages") {
    MatD x(2, 2);
    x << 1, 0, 0, 1;
    const std::vector<Edge> edges{{0, 1}, {1, 0}};
    auto out = gcn_layer_forward<double>(x, edges, MatD::Identity(2, 2), RowVector<double>::Zero(2));
    const MatD expected = dense_normalized_adjacency(2, edges) * x;
    for (long i = 0; i < 2; ++i) {
        for (long j = 0; j < 2; ++j) {
            CHECK(out(i, j) == doctest::Approx(0.5).epsilon(1e-12));
            CHECK(out(i, j) == doctest::Approx(expected(i, j)).epsilon(1e-12));
        }
    }
}

TEST_CASE("gcn layer with zero weight returns the bias") {
    auto g = random_windows(3, 1, 4)[0];
    MatD x = MatD::Random(static_cast<long>(g.node_count()), 2);
    RowVector<double> c(5);
    c << 1, -2, 3, 0.5, 7;
    auto out = gcn_layer_forward<double>(x, g.edges(), MatD::Zero(2, 5), c);
    for (long r = 0; r < out.rows(); ++r) CHECK((out.row(r) - c).norm() == 0.0);
}

TEST_CASE("sparse propagation matches the dense oracle") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng() % 30;
        std::vector<Edge> edges;
        for (std::size_t k = 0; k < 3 * n; ++k) {
            edges.push_back({static_cast<std::uint32_t>(rng() % n), static_cast<std::uint32_t>(rng() % n)});
        }
        Propagator<double> prop(n, edges);
        MatD diff = prop.dense() - dense_normalized_adjacency(n, edges);
        CHECK(diff.cwiseAbs().maxCoeff() < 1e-12);
    }
    const std::vector<Edge> bad{{0, 3}};
    CHECK_THROWS_AS(Propagator<double>(3, bad), ShapeError);
    CHECK_THROWS_AS(gcn_layer_forward<double>(MatD::Zero(3, 2), {}, MatD::Zero(3, 4), RowVector<double>::Zero(4)),
                    ShapeError);
}

TEST_CASE("global mean pool") {
    MatD same(3, 2);
    same << 1, 2, 1, 2, 1, 2;
    CHECK(global_mean_pool<double>(same) == RowVector<double>((RowVector<double>(2) << 1, 2).finished()));
    MatD two(2, 2);
    two << 2, 0, 0, 2;
    auto m = global_mean_pool<double>(two);
    CHECK(m(0) == 1.0);
    CHECK(m(1) == 1.0);
    MatD r = MatD::Random(7, 3);
    MatD p = r.colwise().reverse();
    CHECK((global_mean_pool<double>(r) - global_mean_pool<double>(p)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(global_mean_pool<double>(MatD(0, 3)), ShapeError);
}

TEST_CASE("cross entropy values") {
    const std::array<double, 4> zero{0, 0, 0, 0};
    for (int label = 0; label < 4; ++label) CHECK(cross_entropy_loss(zero, label) == doctest::Approx(std::log(4.0)));
    CHECK(cross_entropy_loss(std::array<double, 4>{100, 0, 0, 0}, 0) == doctest::Approx(0.0).epsilon(1e-12));
    // scalar oracle: ln(1 + 3 e^-1)
    const double oracle = std::log(1.0 + 3.0 * std::exp(-1.0));
    CHECK(oracle == doctest::Approx(0.743668).epsilon(1e-6));
    CHECK(cross_entropy_loss(std::array<double, 4>{1, 0, 0, 0}, 0) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK_THROWS_AS(cross_entropy_loss(zero, 4), ValidationError);
    CHECK_THROWS_AS(cross_entropy_loss(zero, -1), ValidationError);

    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 30);
    for (int i = 0; i < 1000; ++i) {
        std::array<double, 4> l{n(rng), n(rng), n(rng), n(rng)};
        CHECK(cross_entropy_loss(l, static_cast<int>(rng() % 4)) >= 0.0);
    }
}

TEST_CASE("model forward basics") {
    auto gs = random_windows(7, 1, 4);
    auto v = view_of(gs[0]);
    ModelConfig cfg;
    auto params = init_params<float>(cfg, 1);
    params.classifier_weight.setZero();
    params.classifier_bias.setZero();
    auto r = model_forward<float>(v, params, Mode::Inference, 0);
    for (double p : r.probabilities) CHECK(p == doctest::Approx(0.25));

    auto trained = init_params<float>(cfg, 2);
    auto a = model_forward<float>(v, trained, Mode::Inference, 0);
    auto b = model_forward<float>(v, trained, Mode::Inference, 12345);
    CHECK(a.probabilities == b.probabilities);
    CHECK_FALSE(a.trace.retained);

    auto t1 = model_forward<float>(v, trained, Mode::Training, 77);
    auto t2 = model_forward<float>(v, trained, Mode::Training, 77);
    CHECK(t1.probabilities == t2.probabilities);
    for (int l = 0; l < kNumLayers; ++l) {
        CHECK(t1.trace.layers[l].dropout_mask == t2.trace.layers[l].dropout_mask);
        CHECK(t1.trace.layers[l].pre_activation == t2.trace.layers[l].pre_activation);
    }
    auto t3 = model_forward<float>(v, trained, Mode::Training, 78);
    CHECK_FALSE(t1.trace.layers[0].dropout_mask == t3.trace.layers[0].dropout_mask);
}

TEST_CASE("model forward reports the failing layer on NaN") {
    auto gs = random_windows(8, 1, 2);
    auto params = init_params<double>(ModelConfig{}, 3);
    params.gcn[1].weight(0, 0) = std::nan("");
    try {
        model_forward<double>(view_of(gs[0]), params, Mode::Inference, 0);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("gcn layer 2") != std::string::npos);
    }
}

TEST_CASE("softmax normalization and node-permutation invariance") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        auto g = random_windows(100 + trial, 1, 1 + trial % 6)[0];
        auto params = randomized_params(16, trial);
        auto base = model_forward<double>(view_of(g), params, Mode::Inference, 0);
        const double sum = std::accumulate(base.probabilities.begin(), base.probabilities.end(), 0.0);
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        for (double p : base.probabilities) CHECK((p >= 0.0 && p <= 1.0));

        std::vector<std::uint32_t> perm(g.node_count());
        std::iota(perm.begin(), perm.end(), 0u);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<graph::Point2> nodes(g.node_count());
        for (std::size_t i = 0; i < nodes.size(); ++i) nodes[perm[i]] = g.node_features()[i];
        std::vector<Edge> edges;
        for (const Edge& e : g.edges()) edges.push_back({perm[e.source], perm[e.target]});
        auto permuted = model_forward<double>(GraphView{nodes, edges}, params, Mode::Inference, 0);
        for (int c = 0; c < kNumClasses; ++c) CHECK(std::abs(permuted.probabilities[c] - base.probabilities[c]) <= 1e-9);
    }
}

TEST_CASE("logit bias gradient at uniform softmax") {
    auto gs = random_windows(9, 1, 3);
    auto v = view_of(gs[0]);
    auto params = init_params<double>(ModelConfig{}, 4);
    params.classifier_weight.setZero();
    params.classifier_bias.setZero();
    auto fwd = model_forward<double>(v, params, Mode::Training, 5);
    const int label = 0;
    auto grads = model_backward<double>(fwd.trace, params, std::span(&label, 1));
    CHECK(grads.classifier_bias(0) == doctest::Approx(-0.75));
    for (int c = 1; c < 4; ++c) CHECK(grads.classifier_bias(c) == doctest::Approx(0.25));
}

TEST_CASE("backward rejects inference traces and bad labels") {
    auto gs = random_windows(10, 1, 2);
    auto params = init_params<double>(ModelConfig{}, 4);
    auto inf = model_forward<double>(view_of(gs[0]), params, Mode::Inference, 0);
    const int label = 1;
    CHECK_THROWS_AS(model_backward<double>(inf.trace, params, std::span(&label, 1)), Error);
    auto tr = model_forward<double>(view_of(gs[0]), params, Mode::Training, 0);
    const int bad = 4;
    CHECK_THROWS_AS(model_backward<double>(tr.trace, params, std::span(&bad, 1)), ValidationError);
}

TEST_CASE("gradients agree with central finite differences") {
    auto gs = random_windows(11, 2, 3);
    auto vs = views(gs);
    const std::vector<int> labels{2, 1};
    ModelConfig cfg;
    cfg.hidden = 8;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto params = randomized_params(8, seed);
        auto r = teleop::testing::finite_difference_check(vs, labels, params, 40 + seed);
        INFO("worst: " << r.worst_parameter << " err " << r.max_relative_error);
        CHECK(r.checked == params.trainable_count());
        CHECK(r.max_relative_error < 1e-4);
    }
}

TEST_CASE("gradients stay finite over 1000 seeded random trials") {
    bool all_finite = true;
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
        std::mt19937_64 rng(trial);
        const std::size_t batch = 1 + rng() % 3;
        auto gs = random_windows(5000 + trial, batch, 1 + rng() % 4);
        auto vs = views(gs);
        std::vector<int> labels;
        for (std::size_t i = 0; i < batch; ++i) labels.push_back(static_cast<int>(rng() % 4));
        auto params = randomized_params(8, trial);
        auto trace = forward_batch<double>(vs, params, Mode::Training, trial, true);
        auto grads = model_backward<double>(trace, params, labels);
        grads.for_each_trainable([&](const std::string&, const auto& t) { all_finite = all_finite && t.allFinite(); });
    }
    CHECK(all_finite);
}

TEST_CASE("adamw update equations") {
    AdamWConfig c;
    // scalar oracle, written out step by step
    const double m = (1 - c.beta1) * 1.0, v = (1 - c.beta2) * 1.0;
    const double m_hat = m / (1 - c.beta1), v_hat = v / (1 - c.beta2);
    const double oracle = 1.0 * (1 - c.lr * c.weight_decay) - c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    CHECK(oracle == doctest::Approx(0.998990).epsilon(1e-6));

    double theta = 1.0, g = 1.0, m1 = 0.0, m2 = 0.0;
    adamw_update<double>({&theta, 1}, {&g, 1}, {&m1, 1}, {&m2, 1}, 1, c);
    CHECK(theta == doctest::Approx(oracle).epsilon(1e-15));

    AdamWConfig no_decay = c;
    no_decay.weight_decay = 0.0;
    double t2 = 0.42, zero = 0.0, a = 0.0, b = 0.0;
    adamw_update<double>({&t2, 1}, {&zero, 1}, {&a, 1}, {&b, 1}, 1, no_decay);
    CHECK(t2 == 0.42);

    double t3 = 0.42;
    a = b = 0.0;
    adamw_update<double>({&t3, 1}, {&zero, 1}, {&a, 1}, {&b, 1}, 1, c);
    CHECK(t3 == doctest::Approx(0.42 * (1 - c.lr * c.weight_decay)).epsilon(1e-15));
}

TEST_CASE("one adamw step descends a scalar quadratic below the oracle threshold") {
    // loss = k theta^2 / 2, gradient k theta. For theta > 0 the first step gives
    // theta' = theta (1 - lr wd) - lr r, r = g / (|g| + eps); the loss drops iff |theta'| < theta,
    // i.e. lr < 2 theta / (theta wd + r).
    for (double theta0 : {0.003, 0.05, 1.0, 4.0}) {
        for (double k : {0.5, 2.0}) {
            AdamWConfig c;
            const double g = k * theta0;
            const double r = g / (std::abs(g) + c.epsilon);
            const double threshold = 2.0 * theta0 / (theta0 * c.weight_decay + r);
            auto loss = [&](double t) { return 0.5 * k * t * t; };
            for (double frac : {0.1, 0.5, 0.99}) {
                c.lr = frac * threshold;
                double t = theta0, gg = g, a = 0, b = 0;
                adamw_update<double>({&t, 1}, {&gg, 1}, {&a, 1}, {&b, 1}, 1, c);
                CHECK(loss(t) < loss(theta0));
            }
            c.lr = 1.01 * threshold;
            double t = theta0, gg = g, a = 0, b = 0;
            adamw_update<double>({&t, 1}, {&gg, 1}, {&a, 1}, {&b, 1}, 1, c);
            CHECK(loss(t) >= loss(theta0));
        }
    }
}

TEST_CASE("adamw_step skips non-finite gradients") {
    ModelConfig cfg;
    cfg.hidden = 4;
    auto params = init_params<float>(cfg, 1);
    auto before = params;
    auto state = AdamWState<float>::create(cfg, {});
    auto grads = ModelParams<float>::zeros(cfg);
    grads.bn[0].running_var.setZero();
    grads.gcn[2].bias(1) = std::numeric_limits<float>::infinity();
    auto report = adamw_step(params, grads, state);
    CHECK_FALSE(report.applied);
    CHECK(report.reason.find("gcn2.bias") != std::string::npos);
    CHECK(state.step == 0);
    CHECK(params.gcn[0].weight == before.gcn[0].weight);

    grads.gcn[2].bias(1) = 0.1f;
    CHECK(adamw_step(params, grads, state).applied);
    CHECK(state.step == 1);
}

TEST_CASE("plateau scheduler") {
    SUBCASE("rising metric keeps the rate") {
        PlateauScheduler s;
        for (int e = 0; e < 50; ++e) s.step(0.01 * e);
        CHECK(s.lr() == 0.001);
    }
    SUBCASE("ten flat epochs after the best halve the rate") {
        PlateauScheduler s;
        s.step(0.8);
        for (int e = 0; e < 9; ++e) CHECK_FALSE(s.step(0.8));
        CHECK(s.lr() == 0.001);
        CHECK(s.step(0.8));
        CHECK(s.lr() == doctest::Approx(0.0005));
        CHECK(s.stagnant_epochs() == 0);
    }
    SUBCASE("nine flat epochs then improvement") {
        PlateauScheduler s;
        s.step(0.5);
        for (int e = 0; e < 9; ++e) s.step(0.5);
        CHECK(s.stagnant_epochs() == 9);
        s.step(0.6);
        CHECK(s.stagnant_epochs() == 0);
        CHECK(s.lr() == 0.001);
    }
    SUBCASE("floor and monotonicity") {
        PlateauScheduler s({0.001, 0.5, 1, 0.0003});
        double prev = s.lr();
        for (int e = 0; e < 20; ++e) {
            s.step(0.1);
            CHECK(s.lr() <= prev);
            prev = s.lr();
        }
        CHECK(s.lr() == doctest::Approx(0.0003));
    }
}

TEST_CASE("checkpoint round trip and shape checks") {
    ModelConfig cfg;
    cfg.hidden = 6;
    Checkpoint ck;
    ck.params = init_params<float>(cfg, 9);
    ck.params.bn[1].running_mean(2) = 0.123456f;
    ck.training = {{"window_size", 40}};
    auto j = checkpoint_to_json(ck);
    auto back = checkpoint_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.params.config == cfg);
    CHECK(back.training["window_size"] == 40);
    bool equal = true;
    std::vector<const float*> a;
    ck.params.for_each_tensor([&](const std::string&, const auto& t) { a.push_back(t.data()); });
    std::size_t i = 0;
    back.params.for_each_tensor([&](const std::string&, const auto& t) {
        equal = equal && std::equal(t.data(), t.data() + t.size(), a[i++]);
    });
    CHECK(equal);

    auto bad = j;
    bad["tensors"]["gcn1.weight"]["shape"] = {6, 5};
    CHECK_THROWS_AS(checkpoint_from_json(bad), ShapeError);
    auto bad_version = j;
    bad_version["version"] = 99;
    CHECK_THROWS_AS(checkpoint_from_json(bad_version), ConfigError);
}
