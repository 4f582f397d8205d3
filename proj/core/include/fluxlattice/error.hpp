#pragma once

#include <stdexcept>
#include <string>

namespace fluxlattice {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller supplied parameters that violate a documented precondition
// (bad site index, Delta = 0 with lambda != 0, dimension mismatch, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A well-posed request that the numerics could not honour.
class NumericalError : public Error {
public:
    using Error::Error;
};

// The band has collapsed (zero bandwidth); wave vectors and group
// velocities are undefined.
class FlatBandError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Energy at or outside the band where an in-band energy is required.
class OutOfBandError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SingularSystemError : public NumericalError {
public:
    SingularSystemError(const std::string& what, double condition)
        : NumericalError(what), condition_(condition) {}
    double condition_number() const noexcept { return condition_; }

private:
    double condition_;
};

} // namespace fluxlattice
