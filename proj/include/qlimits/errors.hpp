#pragma once

#include <stdexcept>
#include <string>

namespace qlimits {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: non-finite entries, zero states, negative weights.
class InputError : public Error {
public:
    using Error::Error;
};

/// Operand dimensions do not agree.
class DimensionError : public InputError {
public:
    using InputError::InputError;
};

/// A value falls outside its documented range (ranks, cutoffs, indices).
class RangeError : public InputError {
public:
    using InputError::InputError;
};

/// A matrix that must be Hermitian is not, within tolerance.
class HermiticityError : public InputError {
public:
    using InputError::InputError;
};

/// Device weights violate sum_alpha rho(alpha, k) = 1.
class NormalizationError : public InputError {
public:
    using InputError::InputError;
};

/// The eigensolver failed or produced a decomposition outside tolerance.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A bound check was requested outside the regime where it applies (t >= t0).
class RegimeError : public Error {
public:
    using Error::Error;
};

}  // namespace qlimits
