#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include <json.hpp>

#include "teleop/common/action.hpp"
#include "teleop/gnn/model.hpp"
#include "teleop/graph/window_graph.hpp"

namespace teleop::stream {

/// Window graph in, class probabilities out. Implementations must be
/// deterministic; a throw is reported as an error event for that frame.
class Recognizer {
public:
    virtual ~Recognizer() = default;
    virtual std::array<double, 4> recognize(const graph::WindowGraph& window) = 0;
    virtual nlohmann::json info() const = 0;
};

/// Inference-mode GCN.
class GcnRecognizer final : public Recognizer {
public:
    explicit GcnRecognizer(gnn::ModelParams<float> params, nlohmann::json metadata = nlohmann::json::object());

    std::array<double, 4> recognize(const graph::WindowGraph& window) override;
    nlohmann::json info() const override;

private:
    gnn::ModelParams<float> params_;
    nlohmann::json metadata_;
};

/// Replays a fixed action script, one entry per call, cycling at the end.
/// The scripted class gets probability `confidence`, the others share the rest.
class ScriptedRecognizer final : public Recognizer {
public:
    explicit ScriptedRecognizer(std::vector<ActionClass> script, double confidence = 0.85);

    std::array<double, 4> recognize(const graph::WindowGraph& window) override;
    nlohmann::json info() const override;
    std::size_t calls() const { return calls_; }

private:
    std::vector<ActionClass> script_;
    double confidence_;
    std::size_t calls_ = 0;
};

} // namespace teleop::stream
