#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mhmm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain numeric argument.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// A logit link was asked to invert a row whose reference entry is zero.
class SingularLink : public Error {
public:
    using Error::Error;
};

/// A covariance or scale matrix failed its positive-definiteness check.
class CovarianceError : public Error {
public:
    using Error::Error;
};

/// Inconsistent dimensions or options in a configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input data (dataset rows, state labels).
class DataError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Every state has zero filtered mass at some time step.
class FilteringDegeneracy : public Error {
public:
    FilteringDegeneracy(std::size_t time_index, const std::string& what)
        : Error(what), time_index_(time_index) {}

    /// Zero-based time index at which the forward recursion collapsed.
    std::size_t time_index() const noexcept { return time_index_; }

private:
    std::size_t time_index_;
};

/// A chain hit a non-finite value or a degenerate filter and was stopped.
class SamplerAbort : public Error {
public:
    using Error::Error;
};

}  // namespace mhmm
