#pragma once

#include <stdexcept>
#include <string>

namespace mfglq {

/// Malformed or inconsistent configuration (bad JSON, shape mismatch, ...).
/// CLI exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Model parameters violate a structural invariant (symmetry, lambda range,
/// singular control weight, ...).  CLI exit code 3.
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// The feedback representation broke down: a matrix that must stay invertible
/// along the solve (I - P*F_blk, R-tilde operator, I - P2*L23) lost rank, or a
/// Riccati solution escaped the blow-up cap.  Carries the time at which the
/// breakdown was detected.  CLI exit code 4.
struct breakdown_error : std::runtime_error {
    double time;
    breakdown_error(const std::string& what, double t)
        : std::runtime_error(what + " at t=" + std::to_string(t)), time(t) {}
};

/// Non-finite values or other numerical failure.  CLI exit code 5.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace mfglq
