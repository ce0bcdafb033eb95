#pragma once

#include <stdexcept>
#include <string>

namespace scfm {

// Common base so callers can catch any library error in one handler.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class GraphError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class TimeSingularityError : public Error {
public:
    using Error::Error;
};

class SolverStallError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ConstructionError : public Error {
public:
    using Error::Error;
};

class DegenerateRepresentationError : public Error {
public:
    using Error::Error;
};

class EstimatorDegenerateError : public Error {
public:
    using Error::Error;
};

class VerificationError : public Error {
public:
    using Error::Error;
};

} // namespace scfm
