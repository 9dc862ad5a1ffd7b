#pragma once

#include <stdexcept>
#include <string>

namespace sdflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed mesh file or a mesh that violates the closed/oriented contract.
class MeshError : public Error {
public:
    using Error::Error;
};

/// Invalid argument to a generator, operator or solver routine.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: unbounded cotangents, solver breakdown, bracket failure.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Bad run configuration (unknown key, unparsable value).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Missing or corrupt data file (diagnostics table, run summary).
class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace sdflow
