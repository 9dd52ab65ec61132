#pragma once

#include <stdexcept>
#include <string>

namespace fee {

// Base class for all library errors. The CLI maps these to exit code 2
// (bad input or configuration); solver non-convergence is reported through
// result structs instead of exceptions and maps to exit code 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Domain violations on function arguments (negative depth, b = 0, ...).
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Vanishing trigonometric denominators, empty wedge-angle intervals, poses
// for which the earthmoving geometry degenerates.
class SingularGeometry : public Error {
public:
    using Error::Error;
};

// Malformed trace/config files; messages carry line/column where known.
class ParseError : public Error {
public:
    using Error::Error;
};

// Structurally valid file with unusable content (bad bounds, unknown keys).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Inputs carry no signal for the requested operation (e.g. a dig trace that
// never engages the soil).
class NoInformation : public Error {
public:
    using Error::Error;
};

// Sensitivity output variance is exactly zero; indices are undefined.
class ZeroVariance : public Error {
public:
    using Error::Error;
};

// A caller asked for something the API forbids by contract (e.g. building a
// reduced-order model that fixes a dominant parameter).
class ContractViolation : public Error {
public:
    using Error::Error;
};

// Requested baseline sweep area cannot fit inside the workspace.
class InfeasibleBaseline : public Error {
public:
    using Error::Error;
};

} // namespace fee
