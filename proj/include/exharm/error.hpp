#pragma once

#include <stdexcept>
#include <string>

namespace exharm {

/// Raised when a configuration or argument violates a documented precondition.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a computation fails numerically (blow-up, non-convergence, ...).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double last_valid_time = 0.0)
        : std::runtime_error(what), last_valid_time_(last_valid_time) {}

    double last_valid_time() const noexcept { return last_valid_time_; }

private:
    double last_valid_time_;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ValidationError(message);
}

} // namespace exharm
