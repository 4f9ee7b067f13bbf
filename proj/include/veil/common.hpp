// Error taxonomy and exit-code mapping shared by the library and the CLI.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace veil {

// Exit codes: 0 ok, 1 I/O or unexpected, 2 validation/format, 3 numeric,
// 4 key mismatch.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
    virtual int exit_code() const { return 1; }
};

struct ValidationError : Error {
    using Error::Error;
    int exit_code() const override { return 2; }
};

// Malformed container/manifest contents. Same exit code as validation.
struct FormatError : ValidationError {
    using ValidationError::ValidationError;
};

struct IoError : Error {
    using Error::Error;
    int exit_code() const override { return 1; }
};

struct NumericError : Error {
    using Error::Error;
    int exit_code() const override { return 3; }
};

struct KeyMismatchError : Error {
    using Error::Error;
    int exit_code() const override { return 4; }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

}  // namespace veil
