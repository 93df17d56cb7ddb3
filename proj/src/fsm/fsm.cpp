#include "teleop/fsm/fsm.hpp"

#include "teleop/common/error.hpp"

namespace teleop::fsm {

void FsmConfig::validate() const {
    if (k < 1) throw ConfigError("K must be >= 1, got " + std::to_string(k));
}

std::string to_string(Mode m) { return m == Mode::Idle ? "idle" : "executing"; }

nlohmann::json FsmState::to_json() const {
    auto opt = [](const std::optional<ActionClass>& a) {
        return a ? nlohmann::json(std::string(teleop::to_string(*a))) : nlohmann::json(nullptr);
    };
    return {{"mode", to_string(mode)},
            {"executing", opt(executing)},
            {"candidate", opt(candidate)},
            {"count", count},
            {"pending", opt(pending)}};
}

FsmStep fsm_step(const FsmState& state, ActionClass recognized, const FsmConfig& config) {
    FsmStep out{state, std::nullopt, false};
    FsmState& s = out.state;
    const int k = config.k < 1 ? 1 : config.k;
    if (s.candidate == recognized) {
        if (s.count >= k) return out;  // saturated: this run already fired
        ++s.count;
    } else {
        s.candidate = recognized;
        s.count = 1;
    }
    if (s.count < k) return out;

    if (s.mode == Mode::Idle) {
        s.mode = Mode::Executing;
        s.executing = recognized;
        out.start = recognized;
    } else {
        s.pending = recognized;
        out.queued = true;
    }
    return out;
}

FsmStep fsm_complete(const FsmState& state) {
    FsmStep out{state, std::nullopt, false};
    FsmState& s = out.state;
    if (s.mode == Mode::Idle) return out;
    if (s.pending) {
        s.executing = s.pending;
        out.start = s.pending;
        s.pending.reset();
    } else {
        s.mode = Mode::Idle;
        s.executing.reset();
    }
    return out;
}

} // namespace teleop::fsm
