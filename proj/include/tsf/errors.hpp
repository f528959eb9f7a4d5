#pragma once

#include <stdexcept>
#include <string>

namespace tsf {

// Error taxonomy used across the engine. Each maps to a distinct failure
// class so callers (and the CLI exit codes) can tell misuse apart from
// bad input data.

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IndexError : std::runtime_error {
    explicit IndexError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated API contract: non-scalar backward, empty evaluation set, ...
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged (non-finite loss or gradients). Carries the path of the
// last good checkpoint when one was written.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg, std::string checkpoint = "")
        : std::runtime_error(msg), last_good_checkpoint(std::move(checkpoint)) {}
    std::string last_good_checkpoint;
};

}  // namespace tsf
