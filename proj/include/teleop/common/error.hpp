#pragma once

#include <stdexcept>
#include <string>

namespace teleop {

/// Base class for every error raised by the teleop libraries.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration: zero frame dims, missing trajectories, shape mismatches on load.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data that violates a documented invariant (non-finite, out of range, wrong order).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Tensor or graph shapes that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A NaN or infinity surfaced inside a numeric routine.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace teleop
