#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "teleop/common/action.hpp"

namespace teleop::fsm {

/// Endpoint position in meters.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

double distance(const Vec3& a, const Vec3& b);
Vec3 lerp(const Vec3& a, const Vec3& b, double u);

/// Piecewise-linear waypoint path; durations[i] covers waypoints[i] -> waypoints[i+1].
struct Trajectory {
    ActionClass action = ActionClass::Cut;
    std::vector<Vec3> waypoints;
    std::vector<double> durations;

    double total_duration() const;
    /// Position after t seconds, clamped to the path ends.
    Vec3 position_at(double t) const;
    /// Highest per-segment speed in m/s.
    double peak_speed() const;
};

/// The four preset trajectories plus the shared home pose and speed limit.
class TrajectoryLibrary {
public:
    /// Validates: every action present, >= 2 waypoints, one positive duration
    /// per segment, starts and ends at home, no segment faster than max_speed.
    TrajectoryLibrary(std::array<Trajectory, 4> trajectories, Vec3 home, double max_speed);

    /// Schema: {"home": [x,y,z], "max_speed": m/s,
    ///          "cut": {"waypoints": [[x,y,z], ...], "durations": [s, ...]}, ...}
    static TrajectoryLibrary from_json(const nlohmann::json& j);
    static TrajectoryLibrary load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    const Trajectory& trajectory_for(ActionClass action) const { return trajectories_[to_index(action)]; }
    const Vec3& home() const { return home_; }
    double max_speed() const { return max_speed_; }

private:
    std::array<Trajectory, 4> trajectories_;
    Vec3 home_;
    double max_speed_;
};

struct ActiveMotion {
    std::shared_ptr<const Trajectory> trajectory;
    double elapsed = 0.0;
};

struct RobotSim {
    Vec3 home;
    Vec3 endpoint;
    double max_speed = 0.0;
    std::optional<ActiveMotion> active;

    static RobotSim at_home(const TrajectoryLibrary& library);
    bool busy() const { return active.has_value(); }
    std::optional<ActionClass> action() const;
};

/// Begins a trajectory from the home pose. Throws Error if the robot is busy.
RobotSim robot_start(const RobotSim& sim, const Trajectory& trajectory);

struct RobotTick {
    RobotSim sim;
    std::optional<ActionClass> completed;  ///< trajectory that finished during this tick
    double leftover = 0.0;                 ///< part of dt after completion
};

/// Advances simulated time by dt > 0. The endpoint is evaluated from the
/// absolute elapsed time, so splitting dt into pieces reaches the same point.
/// On completion the robot parks at home and reports the unused time.
RobotTick robot_tick(const RobotSim& sim, double dt);

} // namespace teleop::fsm
