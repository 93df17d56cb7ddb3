#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "teleop/common/action.hpp"

namespace teleop::fsm {

struct FsmConfig {
    /// Consecutive identical recognitions required before an action is accepted.
    int k = 5;

    void validate() const;
};

enum class Mode { Idle, Executing };

/// Debounce state. The run-length counter saturates at K, so one run of
/// identical recognitions yields at most one accepted action however long it lasts.
struct FsmState {
    Mode mode = Mode::Idle;
    std::optional<ActionClass> executing;  ///< set iff mode == Executing
    std::optional<ActionClass> candidate;
    int count = 0;
    std::optional<ActionClass> pending;  ///< only while Executing; latest accepted action wins

    friend bool operator==(const FsmState&, const FsmState&) = default;
    nlohmann::json to_json() const;
};

struct FsmStep {
    FsmState state;
    std::optional<ActionClass> start;  ///< start command emitted by this step
    bool queued = false;               ///< an accepted action went to the pending slot
};

/// Feeds one recognition. Total: never throws.
FsmStep fsm_step(const FsmState& state, ActionClass recognized, const FsmConfig& config);

/// The executing trajectory finished: start the pending action if any, else go idle.
/// The run-length counter is untouched. Calling this while Idle is a no-op.
FsmStep fsm_complete(const FsmState& state);

std::string to_string(Mode m);

} // namespace teleop::fsm
