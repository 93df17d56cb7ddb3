#include "teleop/fsm/controller.hpp"

#include "teleop/common/error.hpp"

namespace teleop::fsm {

std::string to_string(ControlKind k) {
    switch (k) {
    case ControlKind::Start: return "start";
    case ControlKind::Queued: return "queued";
    case ControlKind::Complete: return "complete";
    }
    return "?";
}

Controller::Controller(FsmConfig config, std::shared_ptr<const TrajectoryLibrary> library, double start_time)
    : config_(config), library_(std::move(library)), now_(start_time) {
    config_.validate();
    if (!library_) throw ConfigError("controller needs a trajectory library");
    robot_ = RobotSim::at_home(*library_);
}

std::vector<ControlEvent> Controller::advance_to(double t) {
    std::vector<ControlEvent> events;
    double remaining = t - now_;
    while (remaining > 0.0 && robot_.busy()) {
        RobotTick tick = robot_tick(robot_, remaining);
        robot_ = tick.sim;
        if (!tick.completed) break;
        const double done_at = t - tick.leftover;
        FsmStep step = fsm_complete(state_);
        state_ = step.state;
        events.push_back({ControlKind::Complete, *tick.completed, done_at, state_});
        if (step.start) {
            robot_ = robot_start(robot_, library_->trajectory_for(*step.start));
            events.push_back({ControlKind::Start, *step.start, done_at, state_});
        }
        remaining = tick.leftover;
    }
    if (t > now_) now_ = t;
    return events;
}

std::vector<ControlEvent> Controller::on_recognition(ActionClass recognized, double t) {
    std::vector<ControlEvent> events = advance_to(t);
    FsmStep step = fsm_step(state_, recognized, config_);
    state_ = step.state;
    if (step.start) {
        robot_ = robot_start(robot_, library_->trajectory_for(*step.start));
        events.push_back({ControlKind::Start, *step.start, now_, state_});
    } else if (step.queued) {
        events.push_back({ControlKind::Queued, recognized, now_, state_});
    }
    return events;
}

} // namespace teleop::fsm
