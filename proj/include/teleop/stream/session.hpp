#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "teleop/fsm/controller.hpp"
#include "teleop/graph/window_buffer.hpp"
#include "teleop/stream/messages.hpp"
#include "teleop/stream/recognizer.hpp"

namespace teleop::stream {

struct SessionConfig {
    std::size_t window_size = 40;
    double fps = 20.0;
    fsm::FsmConfig fsm;
    std::size_t queue_capacity = 64;
    graph::GapPolicy gap_policy = graph::GapPolicy::Reject;

    void validate() const;
    nlohmann::json to_json() const;
};

struct CommandLatency {
    ActionClass action = ActionClass::Cut;
    double command_t = 0.0;
    std::optional<double> action_end_t;  ///< operator completion, known only from replay annotations
    std::optional<double> delay;         ///< command_t - action_end_t
};

struct LatencyMetrics {
    std::optional<double> fill_delay;      ///< first recognition - first frame + one frame period
    std::optional<double> update_rate_hz;  ///< recognitions per second after the first
    std::size_t frames_ingested = 0;
    std::size_t frames_processed = 0;
    std::size_t recognitions = 0;
    std::size_t dropped = 0;   ///< evicted by queue overflow
    std::size_t rejected = 0;  ///< refused at ingest
    std::vector<CommandLatency> commands;
    bool partial = true;  ///< fewer than two recognitions so far

    nlohmann::json to_json() const;
};

struct IngestResult {
    bool accepted = false;
    std::string code;  ///< empty, "parse", "schema", "out_of_order"
    std::string reason;
    std::vector<EventMessage> events;  ///< error events to publish (rejections, overflow)
};

/// One operator stream. Ingestion and the pipeline may run on different
/// threads: the bounded queue is the only state they share.
class Session {
public:
    Session(std::string id, SessionConfig config, std::shared_ptr<Recognizer> recognizer,
            std::shared_ptr<const fsm::TrajectoryLibrary> library);

    /// One JSONL frame line (no session or version fields required).
    IngestResult ingest_line(std::string_view line);
    IngestResult ingest_frame(graph::LandmarkFrame frame);

    /// Processes one queued frame. Returns nothing when the queue is empty.
    std::vector<EventMessage> pipeline_tick();
    std::vector<EventMessage> drain();

    /// Operator-action completion ground truth, used to pair command delays.
    void mark_action_end(double t, std::optional<ActionClass> action);

    LatencyMetrics metrics_snapshot() const;
    EventMessage metrics_event() const;

    const std::string& id() const { return id_; }
    const SessionConfig& config() const { return config_; }
    std::size_t queue_depth() const;

private:
    struct Mark {
        double t;
        std::optional<ActionClass> action;
        bool used = false;
    };

    void on_control(const std::vector<fsm::ControlEvent>& control, std::int64_t frame, std::vector<EventMessage>& out);

    std::string id_;
    SessionConfig config_;
    std::shared_ptr<Recognizer> recognizer_;

    mutable std::mutex queue_mutex_;
    std::deque<graph::LandmarkFrame> queue_;
    std::optional<std::int64_t> last_ingested_;
    double last_ingest_t_ = 0.0;

    // Pipeline context.
    graph::WindowBuffer buffer_;
    fsm::Controller controller_;
    std::vector<Mark> marks_;
    mutable std::mutex metrics_mutex_;
    LatencyMetrics metrics_;
    std::optional<double> first_frame_t_, first_recognition_t_, last_recognition_t_;
};

} // namespace teleop::stream
