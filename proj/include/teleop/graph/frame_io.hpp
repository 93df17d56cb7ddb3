#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "teleop/graph/landmark_frame.hpp"

namespace teleop::graph {

/// Parses one frame object of the JSONL schema:
///   {"i": idx, "t": sec, "lm": {"11": [x, y], ...}, "obj": [x, y] | null}
/// Absent or null landmark entries are Missing. Unknown fields are ignored.
/// Throws ValidationError on schema or range violations.
LandmarkFrame frame_from_json(const nlohmann::json& j);

/// Inverse of frame_from_json. Missing points serialize as absent / null.
nlohmann::json frame_to_json(const LandmarkFrame& frame);

/// One compact JSON line, no trailing newline.
std::string frame_to_line(const LandmarkFrame& frame);

std::vector<LandmarkFrame> read_frames_jsonl(const std::filesystem::path& path);
void write_frames_jsonl(const std::filesystem::path& path, const std::vector<LandmarkFrame>& frames);

} // namespace teleop::graph
