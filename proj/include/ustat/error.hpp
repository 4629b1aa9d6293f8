#pragma once

#include <stdexcept>
#include <string>

namespace ustat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Axis sets that do not form a valid partition or disjoint cover.
class InvalidPartition : public Error {
public:
    using Error::Error;
};

/// Lengths or shapes that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Arguments outside the domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A norm method was asked for a partition it cannot handle.
class UnsupportedMethod : public Error {
public:
    using Error::Error;
};

/// Exact enumeration would visit more states than the configured budget.
class BudgetExceeded : public Error {
public:
    using Error::Error;
};

/// Malformed or unknown fields in a JSON document.
class SchemaError : public Error {
public:
    using Error::Error;
};

} // namespace ustat
