#pragma once

#include <stdexcept>
#include <string>

namespace vmionet {

/// Base class for every failure raised by the toolkit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input violated a documented precondition (bad sizes, invalid geometry, ...).
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error(what) {}
};

/// A numerical procedure failed to reach its target (CG, Cholesky, training).
class NumericalFailure : public Error {
public:
    explicit NumericalFailure(const std::string& what) : Error(what) {}
};

}  // namespace vmionet
