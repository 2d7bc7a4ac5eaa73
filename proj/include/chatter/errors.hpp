#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace chatter {

/// Base class for every error raised by the solver. Carries the interval index
/// (when the failure happened inside a propagation) so callers can report where
/// a run went wrong.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, std::optional<int> interval = std::nullopt)
        : std::runtime_error(what), interval_(interval) {}

    std::optional<int> interval() const { return interval_; }

private:
    std::optional<int> interval_;
};

/// g, f, Psi or a derivative returned NaN/Inf.
class NonFiniteEvaluation : public Error {
public:
    using Error::Error;
};

/// No admissible control keeps the next state inside the state bounds.
class InfeasibleLevels : public Error {
public:
    using Error::Error;
};

class EmptyGrid : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// The regularized shooting correction matrix could not be inverted.
class SingularCorrection : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Rethrow `e` (a chatter::Error subtype) with the interval index attached.
template <typename E>
[[noreturn]] void rethrow_at_interval(const E& e, int interval) {
    throw E(std::string(e.what()) + " (interval " + std::to_string(interval) + ")", interval);
}

}  // namespace chatter
