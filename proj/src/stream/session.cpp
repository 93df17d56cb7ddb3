#include "teleop/stream/session.hpp"

#include <cmath>

#include "teleop/common/error.hpp"
#include "teleop/graph/frame_io.hpp"

namespace teleop::stream {

using nlohmann::json;

void SessionConfig::validate() const {
    if (window_size < 1) throw ConfigError("window size must be >= 1");
    if (!(fps > 0.0) || !std::isfinite(fps)) throw ConfigError("fps must be positive");
    if (queue_capacity < 1) throw ConfigError("queue capacity must be >= 1");
    fsm.validate();
}

json SessionConfig::to_json() const {
    return {{"window_size", window_size},
            {"fps", fps},
            {"k_consecutive", fsm.k},
            {"queue_capacity", queue_capacity},
            {"gap_policy", gap_policy == graph::GapPolicy::Reject ? "reject" : "consecutive"}};
}

json LatencyMetrics::to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json cmds = json::array();
    for (const auto& c : commands) {
        cmds.push_back({{"action", std::string(to_string(c.action))},
                        {"command_t", c.command_t},
                        {"action_end_t", opt(c.action_end_t)},
                        {"delay", opt(c.delay)}});
    }
    return {{"fill_delay", opt(fill_delay)},
            {"update_rate_hz", opt(update_rate_hz)},
            {"frames_ingested", frames_ingested},
            {"frames_processed", frames_processed},
            {"recognitions", recognitions},
            {"dropped", dropped},
            {"rejected", rejected},
            {"commands", cmds},
            {"partial", partial}};
}

Session::Session(std::string id, SessionConfig config, std::shared_ptr<Recognizer> recognizer,
                 std::shared_ptr<const fsm::TrajectoryLibrary> library)
    : id_(std::move(id)),
      config_(config),
      recognizer_(std::move(recognizer)),
      buffer_((config.validate(), config.window_size), config.gap_policy),
      controller_(config.fsm, std::move(library)) {
    if (!recognizer_) throw ConfigError("session needs a recognizer");
}

IngestResult Session::ingest_line(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        std::lock_guard lock(metrics_mutex_);
        ++metrics_.rejected;
        IngestResult r{false, "parse", e.what(), {}};
        r.events.push_back(error_event(id_, -1, last_ingest_t_, "parse", e.what()));
        return r;
    }
    graph::LandmarkFrame frame;
    try {
        frame = graph::frame_from_json(j);
    } catch (const std::exception& e) {
        std::lock_guard lock(metrics_mutex_);
        ++metrics_.rejected;
        IngestResult r{false, "schema", e.what(), {}};
        r.events.push_back(error_event(id_, j.is_object() ? j.value("i", std::int64_t{-1}) : -1, last_ingest_t_,
                                       "schema", e.what()));
        return r;
    }
    return ingest_frame(std::move(frame));
}

IngestResult Session::ingest_frame(graph::LandmarkFrame frame) {
    IngestResult r;
    try {
        graph::validate_frame(frame);
    } catch (const Error& e) {
        std::lock_guard lock(metrics_mutex_);
        ++metrics_.rejected;
        r = {false, "schema", e.what(), {}};
        r.events.push_back(error_event(id_, frame.frame_index, last_ingest_t_, "schema", e.what()));
        return r;
    }
    std::optional<graph::LandmarkFrame> evicted;
    {
        std::lock_guard lock(queue_mutex_);
        if (last_ingested_ && frame.frame_index <= *last_ingested_) {
            const std::string why = "frame " + std::to_string(frame.frame_index) + " after " +
                                    std::to_string(*last_ingested_);
            r = {false, "out_of_order", why, {}};
            r.events.push_back(error_event(id_, frame.frame_index, last_ingest_t_, "out_of_order", why));
        } else {
            last_ingested_ = frame.frame_index;
            last_ingest_t_ = frame.timestamp;
            queue_.push_back(std::move(frame));
            if (queue_.size() > config_.queue_capacity) {
                evicted = std::move(queue_.front());
                queue_.pop_front();
            }
            r.accepted = true;
        }
    }
    std::lock_guard lock(metrics_mutex_);
    if (!r.accepted) {
        ++metrics_.rejected;
        return r;
    }
    ++metrics_.frames_ingested;
    if (evicted) {
        ++metrics_.dropped;
        r.events.push_back(error_event(id_, evicted->frame_index, evicted->timestamp, "queue_overflow",
                                       "dropped oldest queued frame; " + std::to_string(metrics_.dropped) +
                                           " dropped so far"));
    }
    return r;
}

std::size_t Session::queue_depth() const {
    std::lock_guard lock(queue_mutex_);
    return queue_.size();
}

void Session::mark_action_end(double t, std::optional<ActionClass> action) { marks_.push_back({t, action}); }

void Session::on_control(const std::vector<fsm::ControlEvent>& control, std::int64_t frame,
                         std::vector<EventMessage>& out) {
    for (const fsm::ControlEvent& e : control) {
        out.push_back(control_event(id_, frame, e));
        if (e.kind != fsm::ControlKind::Start) continue;
        CommandLatency c{e.action, e.time, std::nullopt, std::nullopt};
        Mark* match = nullptr;
        for (Mark& m : marks_) {
            if (m.used || m.t > e.time) continue;
            if (m.action && *m.action != e.action) continue;
            if (!match || m.t >= match->t) match = &m;
        }
        if (match) {
            match->used = true;
            c.action_end_t = match->t;
            c.delay = e.time - match->t;
        }
        std::lock_guard lock(metrics_mutex_);
        metrics_.commands.push_back(c);
    }
}

std::vector<EventMessage> Session::pipeline_tick() {
    std::vector<EventMessage> out;
    graph::LandmarkFrame frame;
    {
        std::lock_guard lock(queue_mutex_);
        if (queue_.empty()) return out;
        frame = std::move(queue_.front());
        queue_.pop_front();
    }
    const std::int64_t idx = frame.frame_index;
    const double t = frame.timestamp;
    if (!first_frame_t_) first_frame_t_ = t;

    graph::PushResult pushed;
    try {
        pushed = buffer_.push(frame);
    } catch (const graph::FrameGapError& e) {
        out.push_back(error_event(id_, idx, t, "gap", std::string(e.what()) + "; window restarted"));
        buffer_.restart();
        pushed = buffer_.push(frame);
    }

    bool recognized = false;
    if (pushed.status == graph::PushStatus::Emitted) {
        try {
            const auto probs = recognizer_->recognize(*pushed.graph);
            double sum = 0.0;
            for (double p : probs) {
                if (!std::isfinite(p) || p < 0.0) throw NumericError("invalid probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-6) throw NumericError("probabilities sum to " + std::to_string(sum));
            auto control = controller_.on_recognition(most_likely(probs), t);
            out.push_back(recognition_event(id_, idx, t, probs, controller_.state()));
            on_control(control, idx, out);
            recognized = true;
            if (!first_recognition_t_) first_recognition_t_ = t;
            last_recognition_t_ = t;
        } catch (const std::exception& e) {
            out.push_back(error_event(id_, idx, t, "inference", e.what()));
        }
    } else if (pushed.status == graph::PushStatus::AwaitingShoulder) {
        out.push_back(error_event(id_, idx, t, "awaiting_shoulder", "no left-shoulder observation yet"));
    }
    if (!recognized) on_control(controller_.advance_to(t), idx, out);
    out.push_back(robot_state_event(id_, idx, t, controller_.robot()));

    std::lock_guard lock(metrics_mutex_);
    ++metrics_.frames_processed;
    if (recognized) ++metrics_.recognitions;
    if (first_recognition_t_) metrics_.fill_delay = *first_recognition_t_ - *first_frame_t_ + 1.0 / config_.fps;
    if (metrics_.recognitions >= 2 && *last_recognition_t_ > *first_recognition_t_) {
        metrics_.update_rate_hz =
            static_cast<double>(metrics_.recognitions - 1) / (*last_recognition_t_ - *first_recognition_t_);
    }
    metrics_.partial = metrics_.recognitions < 2;
    return out;
}

std::vector<EventMessage> Session::drain() {
    std::vector<EventMessage> out;
    while (true) {
        auto events = pipeline_tick();
        if (events.empty()) break;
        out.insert(out.end(), events.begin(), events.end());
    }
    return out;
}

LatencyMetrics Session::metrics_snapshot() const {
    std::lock_guard lock(metrics_mutex_);
    return metrics_;
}

EventMessage Session::metrics_event() const {
    return {EventKind::Metrics, id_, -1, controller_.now(), metrics_snapshot().to_json()};
}

} // namespace teleop::stream
