#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xaiaug {

/// Base of every error thrown by the library. The CLI maps subclasses onto
/// process exit codes (see exit_code()).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Invalid parameters or configuration; includes over-pruning and unknown
/// rules or families.
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Invalid invocation of an operation (empty dataset, wrong model arity).
class UsageError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class DimensionError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class IndexError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Inputs that do not belong together (stale trace, mismatched optimizer
/// state, logs of different length).
class ConsistencyError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// An input violates a documented precondition (e.g. a normalized relevance
/// outside [-1, 1], a non-binary mask).
class PreconditionError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Weight importance whose raw outer product is identically zero; callers
/// fall back to uniform importance.
class DegenerateImportanceError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

/// A non-finite value appeared. `layer()` names the offending layer, or
/// npos when the failure is not tied to a layer.
class NumericError : public Error {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    NumericError(const std::string& what, std::size_t layer = npos)
        : Error(layer == npos ? what : what + " (layer " + std::to_string(layer) + ")"),
          layer_(layer) {}

    std::size_t layer() const noexcept { return layer_; }
    int exit_code() const noexcept override { return 4; }

    /// Same error with `prefix` prepended to the message.
    NumericError with_prefix(const std::string& prefix) const { return NumericError(prefix + what(), layer_, 0); }

private:
    NumericError(const std::string& formatted, std::size_t layer, int) : Error(formatted), layer_(layer) {}

    std::size_t layer_;
};

}  // namespace xaiaug
