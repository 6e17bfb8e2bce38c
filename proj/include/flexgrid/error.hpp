#pragma once

#include <stdexcept>
#include <string>

namespace flexgrid {

// Base for all library errors. Subclasses map onto distinct CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration or arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Input data that cannot be read or violates a schema/invariant.
class DataError : public Error {
public:
    using Error::Error;
};

// Internal cross-check failed; indicates a bug rather than bad input.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

}  // namespace flexgrid
