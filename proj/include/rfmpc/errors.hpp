#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rfmpc {

enum class ErrorKind {
    IntegrationDiverged,
    RankDeficient,
    InvalidFunnel,
    InvalidActivation,
    InvalidPlant,
    InvalidModel,
    MissingTransform,
    Domain,
    InfeasibleStart,
    OcpInfeasible,
    FunnelViolation,
    Config,
};

std::string_view to_string(ErrorKind kind);

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised when an integrator produces a non-finite state.
class IntegrationDiverged : public Error {
public:
    IntegrationDiverged(double last_finite_time, const std::string& what)
        : Error(ErrorKind::IntegrationDiverged, what), last_finite_time_(last_finite_time) {}

    double last_finite_time() const noexcept { return last_finite_time_; }

private:
    double last_finite_time_;
};

}  // namespace rfmpc
