#include "teleop/graph/frame_io.hpp"

#include <fstream>

namespace teleop::graph {

using nlohmann::json;

namespace {

Point2 point_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ValidationError(std::string(what) + " must be [x, y]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

json point_to_json(const Point2& p) { return json::array({p.x, p.y}); }

} // namespace

LandmarkFrame frame_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("frame must be a JSON object");
    LandmarkFrame frame;

    auto idx = j.find("i");
    if (idx == j.end() || !idx->is_number_integer()) throw ValidationError("frame index \"i\" missing or not an integer");
    frame.frame_index = idx->get<std::int64_t>();
    if (frame.frame_index < 0) throw ValidationError("frame index must be >= 0");

    auto ts = j.find("t");
    if (ts == j.end() || !ts->is_number()) throw ValidationError("timestamp \"t\" missing or not a number");
    frame.timestamp = ts->get<double>();

    auto lm = j.find("lm");
    if (lm == j.end() || !lm->is_object()) throw ValidationError("landmark map \"lm\" missing");
    for (std::size_t slot = 0; slot < kLandmarkCount; ++slot) {
        auto it = lm->find(std::to_string(kLandmarkIds[slot]));
        if (it == lm->end() || it->is_null()) continue;
        frame.points[slot] = {point_from_json(*it, "landmark"), Validity::Observed};
    }

    auto obj = j.find("obj");
    if (obj != j.end() && !obj->is_null()) {
        frame.points[kObjectSlot] = {point_from_json(*obj, "obj"), Validity::Observed};
    }

    validate_frame(frame);
    return frame;
}

json frame_to_json(const LandmarkFrame& frame) {
    json lm = json::object();
    for (std::size_t slot = 0; slot < kLandmarkCount; ++slot) {
        if (frame.points[slot].present()) lm[std::to_string(kLandmarkIds[slot])] = point_to_json(frame.points[slot].xy);
    }
    json out = {{"i", frame.frame_index}, {"t", frame.timestamp}, {"lm", std::move(lm)}};
    out["obj"] = frame.object().present() ? point_to_json(frame.object().xy) : json(nullptr);
    return out;
}

std::string frame_to_line(const LandmarkFrame& frame) { return frame_to_json(frame).dump(); }

std::vector<LandmarkFrame> read_frames_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<LandmarkFrame> frames;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            frames.push_back(frame_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return frames;
}

void write_frames_jsonl(const std::filesystem::path& path, const std::vector<LandmarkFrame>& frames) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    for (const auto& f : frames) out << frame_to_line(f) << '\n';
}

} // namespace teleop::graph
