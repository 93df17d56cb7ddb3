#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace teleop {

enum class ActionClass : int { Cut = 0, Stab = 1, Flip = 2, Push = 3 };

inline constexpr std::array<ActionClass, 4> kAllActions{ActionClass::Cut, ActionClass::Stab, ActionClass::Flip,
                                                        ActionClass::Push};

inline constexpr int to_index(ActionClass a) { return static_cast<int>(a); }

inline constexpr std::string_view to_string(ActionClass a) {
    switch (a) {
    case ActionClass::Cut: return "cut";
    case ActionClass::Stab: return "stab";
    case ActionClass::Flip: return "flip";
    case ActionClass::Push: return "push";
    }
    return "?";
}

inline std::optional<ActionClass> action_from_string(std::string_view s) {
    for (ActionClass a : kAllActions) {
        if (to_string(a) == s) return a;
    }
    return std::nullopt;
}

inline std::optional<ActionClass> action_from_index(int i) {
    if (i < 0 || i >= static_cast<int>(kAllActions.size())) return std::nullopt;
    return static_cast<ActionClass>(i);
}

} // namespace teleop
