#pragma once

#include <stdexcept>
#include <string>

namespace nratio {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NotSymmetric : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

/// Linearized covariance of the CDF thresholds is not positive definite.
class DegenerateCovariance : public Error {
public:
    using Error::Error;
};

class NonFinite : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class WindowEmpty : public Error {
public:
    using Error::Error;
};

/// Internal consistency failure of a numerical routine (e.g. a probability far outside [0, 1]).
class NumericalFailure : public Error {
public:
    using Error::Error;
};

} // namespace nratio
