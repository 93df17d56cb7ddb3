#include "teleop/gnn/checkpoint.hpp"

#include <fstream>

#include "teleop/common/error.hpp"

namespace teleop::gnn {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "teleop-gcn-checkpoint";
}

json checkpoint_to_json(const Checkpoint& ckpt) {
    const ModelConfig& c = ckpt.params.config;
    json tensors = json::object();
    ckpt.params.for_each_tensor([&](const std::string& name, const auto& t) {
        std::vector<float> data(t.data(), t.data() + t.size());
        tensors[name] = {{"shape", {t.rows(), t.cols()}}, {"data", std::move(data)}};
    });
    return {
        {"format", kFormat},
        {"version", kCheckpointVersion},
        {"model",
         {{"hidden", c.hidden},
          {"dropout", c.dropout},
          {"leaky_slope", c.leaky_slope},
          {"bn_momentum", c.bn_momentum},
          {"bn_eps", c.bn_eps},
          {"input_dim", kInputDim},
          {"classes", kNumClasses},
          {"layers", kNumLayers}}},
        {"training", ckpt.training},
        {"tensors", std::move(tensors)},
    };
}

Checkpoint checkpoint_from_json(const json& j) {
    if (j.value("format", std::string()) != kFormat) throw ConfigError("not a model checkpoint");
    if (j.value("version", 0) != kCheckpointVersion) {
        throw ConfigError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
    }
    const json& m = j.at("model");
    if (m.value("input_dim", 0) != kInputDim || m.value("classes", 0) != kNumClasses ||
        m.value("layers", 0) != kNumLayers) {
        throw ShapeError("checkpoint architecture does not match this build");
    }
    ModelConfig cfg;
    cfg.hidden = m.at("hidden").get<int>();
    cfg.dropout = m.at("dropout").get<double>();
    cfg.leaky_slope = m.at("leaky_slope").get<double>();
    cfg.bn_momentum = m.at("bn_momentum").get<double>();
    cfg.bn_eps = m.at("bn_eps").get<double>();

    Checkpoint ckpt;
    ckpt.params = ModelParams<float>::zeros(cfg);
    ckpt.training = j.value("training", json::object());
    const json& tensors = j.at("tensors");
    ckpt.params.for_each_tensor([&](const std::string& name, auto& t) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ShapeError("checkpoint lacks tensor " + name);
        auto shape = it->at("shape").get<std::vector<long>>();
        if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols()) {
            throw ShapeError("checkpoint tensor " + name + " has mismatched shape");
        }
        auto data = it->at("data").get<std::vector<float>>();
        if (data.size() != static_cast<std::size_t>(t.size())) {
            throw ShapeError("checkpoint tensor " + name + " has " + std::to_string(data.size()) + " values");
        }
        std::copy(data.begin(), data.end(), t.data());
    });
    ckpt.params.validate();
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << checkpoint_to_json(ckpt).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed checkpoint " + path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

} // namespace teleop::gnn
