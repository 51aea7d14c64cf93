#pragma once

#include <stdexcept>
#include <string>

namespace atomchip {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Field requested inside a conductor exclusion zone.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// A minimizer or line search failed to converge.
class SearchError : public Error {
public:
    using Error::Error;
};

/// A stationary point was found but its Hessian is not positive definite.
class SaddleError : public Error {
public:
    using Error::Error;
};

/// Continuation lost the identity of a tracked well.
class TrackingError : public Error {
public:
    using Error::Error;
};

/// Metropolis sampling could not explore the requested distribution.
class SamplingError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration (e.g. an unstable time step).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Too few samples for a statistical estimator.
class StatisticsError : public Error {
public:
    using Error::Error;
};

/// Problems in a scene description. `kind` is one of
/// "syntax", "schema", "unit", "constraint".
class SceneError : public Error {
public:
    SceneError(std::string kind, const std::string& what)
        : Error(kind + " error: " + what), kind_(std::move(kind)), detail_(what) {}
    [[nodiscard]] const std::string& kind() const { return kind_; }
    /// Message without the kind prefix.
    [[nodiscard]] const std::string& detail() const { return detail_; }

private:
    std::string kind_;
    std::string detail_;
};

}  // namespace atomchip
