#pragma once

#include <stdexcept>
#include <string>

namespace evosr {

/// Root of the library's exception hierarchy.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- problem / linear algebra ---
struct InvariantViolation : Error {
    using Error::Error;
};
struct ZeroDiagonal : InvariantViolation {
    using InvariantViolation::InvariantViolation;
};
struct DimensionTooSmall : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

// --- evolutionary operators ---
struct InvalidParams : Error {
    using Error::Error;
};
struct OddSubpopulation : Error {
    using Error::Error;
};
struct UnevaluatedError : Error {
    using Error::Error;
};
struct EmptyCollection : Error {
    using Error::Error;
};

// --- engine ---
struct IndivisiblePopulation : Error {
    using Error::Error;
};

// Failures of transport, framing or cluster coordination. A run hit by one
// of these mid-flight is reported as aborted with the partial result kept.
struct TransportError : Error {
    using Error::Error;
};
struct NetworkError : TransportError {
    using TransportError::TransportError;
};
struct HandshakeFailure : TransportError {
    using TransportError::TransportError;
};
struct DigestMismatch : TransportError {
    using TransportError::TransportError;
};
struct GatherTimeout : TransportError {
    GatherTimeout(const std::string& what, int slave) : TransportError(what), slave_index(slave) {}
    int slave_index = -1;
};

// --- wire codec ---
struct FrameTooShort : TransportError {
    using TransportError::TransportError;
};
struct OversizeFrame : TransportError {
    using TransportError::TransportError;
};
struct MalformedPayload : TransportError {
    using TransportError::TransportError;
};
struct VersionMismatch : TransportError {
    using TransportError::TransportError;
};
struct NonFiniteValue : Error {
    using Error::Error;
};

// --- metrics ---
struct MissingSlaveSamples : Error {
    using Error::Error;
};
struct ZeroDistributedTime : Error {
    using Error::Error;
};

}  // namespace evosr
