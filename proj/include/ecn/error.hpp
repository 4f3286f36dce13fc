#pragma once

#include <stdexcept>
#include <string>

namespace ecn {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inputs whose shapes do not agree (strategy sized for another topology, ...).
class StructuralError : public Error {
public:
    using Error::Error;
};

// (I - Phi^T) is singular: some routing cycle has unit fraction product.
class DivergentCirculation : public Error {
public:
    using Error::Error;
};

// Queueing cost evaluated at or beyond its service rate.
class CapacityExceeded : public Error {
public:
    using Error::Error;
};

// Fixed next-hop table that loops or passes through a designated server.
class IllRouted : public Error {
public:
    using Error::Error;
};

// A node that cannot reach any designated server of some item.
class DisconnectedDemand : public Error {
public:
    using Error::Error;
};

// Positive routing fractions contain a cycle where none is allowed.
class RoutingLoop : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(int line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

// Optimizer cost blew up relative to its starting point.
class StepsizeTooLarge : public Error {
public:
    using Error::Error;
};

// Internal invariant breach; indicates a bug rather than bad input.
class InvariantError : public Error {
public:
    using Error::Error;
};

} // namespace ecn
