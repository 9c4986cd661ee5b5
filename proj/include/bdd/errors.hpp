#pragma once

#include <stdexcept>
#include <string>

namespace bdd {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Iteration budget exhausted before reaching the requested tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Evaluation requested at a pole of the expression (log of zero).
class SingularityError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

// Malformed container bytes (bad magic, truncation, trailing data).
class FormatError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class SizeError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace bdd
