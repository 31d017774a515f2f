#pragma once

// ueval/error.hpp — error taxonomy shared across the harness.
//
// Each category maps to a distinct CLI exit code (see tools/). Exceptions
// carry human-readable context; protocol errors additionally carry the raw
// model transcript that caused them.

#include <stdexcept>
#include <string>
#include <vector>

namespace ueval {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid or inconsistent run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed input documents (plan files, manifests, stores).
class SchemaError : public Error {
public:
    using Error::Error;
};

// Chat backend produced unusable output after all retries.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::vector<std::string> transcript = {})
        : Error(what), transcript_(std::move(transcript)) {}

    const std::vector<std::string>& transcript() const { return transcript_; }

private:
    std::vector<std::string> transcript_;
};

// Network-level failure talking to an endpoint.
class TransportError : public Error {
public:
    using Error::Error;
};

// A backend (or persisted stage output) violated its contract, e.g. feature
// dimension changed mid-run or a store was produced under a different config.
class ContractError : public Error {
public:
    using Error::Error;
};

// Correlation requested over an all-constant rank vector.
class UndefinedCorrelationError : public Error {
public:
    using Error::Error;
};

}  // namespace ueval
