#include "teleop/stream/replay.hpp"

#include <chrono>
#include <fstream>
#include <string>
#include <thread>

#include "teleop/common/error.hpp"

namespace teleop::stream {

using nlohmann::json;

namespace {

class Pacer {
public:
    explicit Pacer(double speed) : speed_(speed) {}

    void wait_for(double t) {
        if (speed_ <= 0.0) return;
        if (!started_) {
            started_ = true;
            origin_ = t;
            start_ = std::chrono::steady_clock::now();
            return;
        }
        const auto due = start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>((t - origin_) / speed_));
        std::this_thread::sleep_until(due);
    }

private:
    double speed_;
    bool started_ = false;
    double origin_ = 0.0;
    std::chrono::steady_clock::time_point start_;
};

} // namespace

ReplayResult replay(std::istream& in, const ReplayConfig& config, std::shared_ptr<Recognizer> recognizer,
                    std::shared_ptr<const fsm::TrajectoryLibrary> library, const EventSink& sink) {
    Session session(config.session_id, config.session, std::move(recognizer), std::move(library));
    ReplayResult result;
    Pacer pacer(config.speed);
    auto emit = [&](const std::vector<EventMessage>& events) {
        for (const EventMessage& e : events) {
            if (sink) sink(e);
            result.events.push_back(e);
        }
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (!j.is_discarded() && j.is_object() && j.contains("mark")) {
            if (j["mark"] == "action_end" && j.contains("t") && j["t"].is_number()) {
                std::optional<ActionClass> action;
                if (j.contains("action") && j["action"].is_string()) {
                    action = action_from_string(j["action"].get<std::string>());
                }
                session.mark_action_end(j["t"].get<double>(), action);
            } else {
                emit({error_event(config.session_id, -1, 0.0, "annotation",
                                  "line " + std::to_string(line_no) + ": unsupported annotation")});
            }
            continue;
        }
        if (!j.is_discarded() && j.is_object() && j.contains("t") && j["t"].is_number()) {
            pacer.wait_for(j["t"].get<double>());
        }
        IngestResult ingested = session.ingest_line(line);
        emit(ingested.events);
        emit(session.drain());
    }
    emit({session.metrics_event()});
    result.metrics = session.metrics_snapshot();
    return result;
}

ReplayResult replay_file(const std::filesystem::path& path, const ReplayConfig& config,
                         std::shared_ptr<Recognizer> recognizer, std::shared_ptr<const fsm::TrajectoryLibrary> library,
                         const EventSink& sink) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open replay file " + path.string());
    return replay(in, config, std::move(recognizer), std::move(library), sink);
}

void write_event_log(std::ostream& out, const std::vector<EventMessage>& events) {
    for (const EventMessage& e : events) out << e.to_line() << '\n';
}

} // namespace teleop::stream
