#include "teleop/fsm/robot.hpp"

#include <cmath>
#include <fstream>

#include "teleop/common/error.hpp"

namespace teleop::fsm {

using nlohmann::json;

namespace {

constexpr double kHomeTolerance = 1e-9;
constexpr double kSpeedSlack = 1e-12;

Vec3 vec_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
    Vec3 v{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z)) throw ConfigError(where + ": non-finite");
    return v;
}

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

void validate(const Trajectory& t, ActionClass expected, const Vec3& home, double max_speed) {
    const std::string name(to_string(expected));
    if (t.action != expected) throw ConfigError(name + ": trajectory labeled " + std::string(to_string(t.action)));
    if (t.waypoints.size() < 2) throw ConfigError(name + ": needs at least 2 waypoints");
    if (t.durations.size() != t.waypoints.size() - 1) {
        throw ConfigError(name + ": expected " + std::to_string(t.waypoints.size() - 1) + " durations, got " +
                          std::to_string(t.durations.size()));
    }
    for (double d : t.durations) {
        if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError(name + ": durations must be positive");
    }
    if (distance(t.waypoints.front(), home) > kHomeTolerance) throw ConfigError(name + ": must start at home");
    if (distance(t.waypoints.back(), home) > kHomeTolerance) throw ConfigError(name + ": must end at home");
    for (std::size_t i = 0; i + 1 < t.waypoints.size(); ++i) {
        const double v = distance(t.waypoints[i], t.waypoints[i + 1]) / t.durations[i];
        if (v > max_speed + kSpeedSlack) {
            throw ConfigError(name + ": segment " + std::to_string(i) + " needs " + std::to_string(v) +
                              " m/s, limit is " + std::to_string(max_speed));
        }
    }
}

} // namespace

double distance(const Vec3& a, const Vec3& b) { return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z); }

Vec3 lerp(const Vec3& a, const Vec3& b, double u) {
    return {a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u, a.z + (b.z - a.z) * u};
}

double Trajectory::total_duration() const {
    double total = 0.0;
    for (double d : durations) total += d;
    return total;
}

Vec3 Trajectory::position_at(double t) const {
    if (waypoints.empty()) return {};
    if (t <= 0.0) return waypoints.front();
    double start = 0.0;
    for (std::size_t i = 0; i < durations.size(); ++i) {
        if (t < start + durations[i]) return lerp(waypoints[i], waypoints[i + 1], (t - start) / durations[i]);
        start += durations[i];
    }
    return waypoints.back();
}

double Trajectory::peak_speed() const {
    double peak = 0.0;
    for (std::size_t i = 0; i < durations.size(); ++i) {
        peak = std::max(peak, distance(waypoints[i], waypoints[i + 1]) / durations[i]);
    }
    return peak;
}

TrajectoryLibrary::TrajectoryLibrary(std::array<Trajectory, 4> trajectories, Vec3 home, double max_speed)
    : trajectories_(std::move(trajectories)), home_(home), max_speed_(max_speed) {
    if (!(max_speed_ > 0.0) || !std::isfinite(max_speed_)) throw ConfigError("max_speed must be positive");
    for (ActionClass a : kAllActions) validate(trajectories_[to_index(a)], a, home_, max_speed_);
}

TrajectoryLibrary TrajectoryLibrary::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("trajectory library must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() != "home" && it.key() != "max_speed" && !action_from_string(it.key())) {
            throw ConfigError("trajectory library: unknown key '" + it.key() + "'");
        }
    }
    if (!j.contains("home")) throw ConfigError("trajectory library: missing home");
    if (!j.contains("max_speed")) throw ConfigError("trajectory library: missing max_speed");
    const Vec3 home = vec_from_json(j["home"], "home");
    std::array<Trajectory, 4> trajectories;
    for (ActionClass a : kAllActions) {
        const std::string name(to_string(a));
        if (!j.contains(name)) throw ConfigError("trajectory library: missing action '" + name + "'");
        const json& entry = j[name];
        Trajectory& t = trajectories[to_index(a)];
        t.action = a;
        if (!entry.contains("waypoints") || !entry.contains("durations")) {
            throw ConfigError(name + ": needs waypoints and durations");
        }
        for (const json& w : entry["waypoints"]) t.waypoints.push_back(vec_from_json(w, name + " waypoint"));
        t.durations = entry["durations"].get<std::vector<double>>();
    }
    return TrajectoryLibrary(std::move(trajectories), home, j["max_speed"].get<double>());
}

TrajectoryLibrary TrajectoryLibrary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trajectory library " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("trajectory library " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

json TrajectoryLibrary::to_json() const {
    json j = {{"home", vec_to_json(home_)}, {"max_speed", max_speed_}};
    for (const Trajectory& t : trajectories_) {
        json waypoints = json::array();
        for (const Vec3& w : t.waypoints) waypoints.push_back(vec_to_json(w));
        j[std::string(to_string(t.action))] = {{"waypoints", waypoints}, {"durations", t.durations}};
    }
    return j;
}

RobotSim RobotSim::at_home(const TrajectoryLibrary& library) {
    return RobotSim{library.home(), library.home(), library.max_speed(), std::nullopt};
}

std::optional<ActionClass> RobotSim::action() const {
    if (!active) return std::nullopt;
    return active->trajectory->action;
}

RobotSim robot_start(const RobotSim& sim, const Trajectory& trajectory) {
    if (sim.busy()) throw Error("robot is already executing a trajectory");
    RobotSim next = sim;
    next.active = ActiveMotion{std::make_shared<const Trajectory>(trajectory), 0.0};
    next.endpoint = trajectory.position_at(0.0);
    return next;
}

RobotTick robot_tick(const RobotSim& sim, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("robot_tick needs dt > 0");
    RobotTick out{sim, std::nullopt, 0.0};
    if (!sim.active) return out;
    const Trajectory& t = *sim.active->trajectory;
    const double elapsed = sim.active->elapsed + dt;
    const double total = t.total_duration();
    if (elapsed >= total) {
        out.completed = t.action;
        out.leftover = elapsed - total;
        out.sim.active.reset();
        out.sim.endpoint = sim.home;
    } else {
        out.sim.active->elapsed = elapsed;
        out.sim.endpoint = t.position_at(elapsed);
    }
    return out;
}

} // namespace teleop::fsm
