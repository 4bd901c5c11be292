#pragma once

#include <stdexcept>
#include <string>

namespace bristolnet {

/// Violated operation precondition or type invariant (bad shapes, bad labels, ...).
struct ContractViolation : std::logic_error {
    explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

/// Invalid user-supplied configuration (unknown key, out-of-range value).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem trouble: unreadable, unwritable, missing.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed file contents (bad magic, truncation, version mismatch).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dataset-level problem (record missing a required field).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values where finite ones are guaranteed.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Specimen/scene constraints cannot be satisfied (infeasible coverage).
struct GenerationError : std::runtime_error {
    explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bristolnet

#define BNET_REQUIRE(cond, msg)                                  \
    do {                                                         \
        if (!(cond)) throw ::bristolnet::ContractViolation(msg); \
    } while (0)
