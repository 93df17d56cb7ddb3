#pragma once

#include <filesystem>

#include <json.hpp>

#include "teleop/gnn/model.hpp"

namespace teleop::gnn {

inline constexpr int kCheckpointVersion = 1;

/// Model plus free-form training metadata (window size, optimizer settings, ...).
struct Checkpoint {
    ModelParams<float> params;
    nlohmann::json training = nlohmann::json::object();
};

/// JSON container: {"format", "version", "model": {...}, "training": {...},
/// "tensors": {name: {"shape": [r, c], "data": [...]}}}. Row-major data.
nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);

/// Throws ConfigError on a wrong format/version and ShapeError on shape mismatches.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace teleop::gnn
