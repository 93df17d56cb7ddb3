#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "teleop/fsm/fsm.hpp"
#include "teleop/fsm/robot.hpp"

namespace teleop::fsm {

enum class ControlKind {
    Start,     ///< robot began a trajectory
    Queued,    ///< accepted action parked in the pending slot
    Complete,  ///< trajectory finished, robot back home
};

struct ControlEvent {
    ControlKind kind = ControlKind::Start;
    ActionClass action = ActionClass::Cut;
    double time = 0.0;  ///< simulated seconds; completions carry their exact in-tick instant
    FsmState state;     ///< FSM state right after the event
};

/// Owns one FsmState and one RobotSim. Time only moves forward.
class Controller {
public:
    Controller(FsmConfig config, std::shared_ptr<const TrajectoryLibrary> library, double start_time = 0.0);

    /// Moves the robot to time t first, so completions due by t are settled,
    /// then debounces the recognition. A start command begins motion at t.
    std::vector<ControlEvent> on_recognition(ActionClass recognized, double t);

    /// Advances the robot to t, chaining pending trajectories at their exact start times.
    std::vector<ControlEvent> advance_to(double t);

    const FsmState& state() const { return state_; }
    const RobotSim& robot() const { return robot_; }
    const FsmConfig& config() const { return config_; }
    const TrajectoryLibrary& library() const { return *library_; }
    double now() const { return now_; }

private:
    FsmConfig config_;
    std::shared_ptr<const TrajectoryLibrary> library_;
    FsmState state_;
    RobotSim robot_;
    double now_;
};

std::string to_string(ControlKind k);

} // namespace teleop::fsm
