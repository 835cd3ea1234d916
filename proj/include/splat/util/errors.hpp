#pragma once

#include <stdexcept>
#include <string>

namespace splat {

// Caller handed us something that violates an operation's precondition.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numeric domain was left (singular covariance, depth behind near plane, ...).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed external data: COLMAP text, PLY, PNG/PPM, JSON.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Internal state got out of sync (stale blend log, shape mismatch).
struct ConsistencyError : std::runtime_error {
    explicit ConsistencyError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration (overlapping damage class colors, invalid thresholds).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace splat
