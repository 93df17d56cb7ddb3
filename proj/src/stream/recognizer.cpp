#include "teleop/stream/recognizer.hpp"

#include "teleop/common/error.hpp"
#include "teleop/gnn/gcn.hpp"

namespace teleop::stream {

GcnRecognizer::GcnRecognizer(gnn::ModelParams<float> params, nlohmann::json metadata)
    : params_(std::move(params)), metadata_(std::move(metadata)) {
    params_.validate();
}

std::array<double, 4> GcnRecognizer::recognize(const graph::WindowGraph& window) {
    return gnn::model_forward<float>(gnn::view_of(window), params_, gnn::Mode::Inference, 0).probabilities;
}

nlohmann::json GcnRecognizer::info() const {
    nlohmann::json j = metadata_;
    j["recognizer"] = "gcn";
    j["hidden"] = params_.config.hidden;
    j["parameters"] = params_.trainable_count();
    return j;
}

ScriptedRecognizer::ScriptedRecognizer(std::vector<ActionClass> script, double confidence)
    : script_(std::move(script)), confidence_(confidence) {
    if (script_.empty()) throw ConfigError("scripted recognizer needs a non-empty script");
    if (!(confidence_ > 0.25 && confidence_ <= 1.0)) throw ConfigError("confidence must be in (0.25, 1]");
}

std::array<double, 4> ScriptedRecognizer::recognize(const graph::WindowGraph&) {
    const ActionClass a = script_[calls_++ % script_.size()];
    const double rest = (1.0 - confidence_) / 3.0;
    std::array<double, 4> p{rest, rest, rest, rest};
    p[to_index(a)] = confidence_;
    return p;
}

nlohmann::json ScriptedRecognizer::info() const {
    return {{"recognizer", "scripted"}, {"script_length", script_.size()}};
}

} // namespace teleop::stream
