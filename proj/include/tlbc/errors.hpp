#pragma once

#include <stdexcept>
#include <string>

namespace tlbc {

/// Malformed input: bad parameters, unknown names, unparsable documents.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-convergence, optimizer failure, or any other numerical breakdown.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The switched-circuit integrator produced a non-finite state.
class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, double time)
        : NumericalError(what), time_(time) {}

    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

}  // namespace tlbc
