#pragma once

#include <stdexcept>
#include <string>

namespace msqa {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input values or configuration.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A pipeline stage was invoked before the stage it depends on produced output.
class DependencyError : public Error {
public:
    DependencyError(std::string missing_stage, const std::string& what)
        : Error(what), missing_stage_(std::move(missing_stage)) {}
    const std::string& missing_stage() const noexcept { return missing_stage_; }

private:
    std::string missing_stage_;
};

// Retriable backend failure: connection errors, throttling, 5xx.
class TransientBackendError : public Error {
public:
    using Error::Error;
};

// Backend answered, but not in the agreed wire format.
class ProtocolError : public Error {
public:
    using Error::Error;
};

// Non-retriable backend failure (4xx other than throttling, auth problems).
class BackendError : public Error {
public:
    using Error::Error;
};

class FailureCeilingExceeded : public Error {
public:
    using Error::Error;
};

}  // namespace msqa
