#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccl {

/// Malformed or out-of-range configuration. `line` is 0 when not tied to a file line.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg, std::size_t line = 0)
        : std::runtime_error(line == 0 ? msg : "line " + std::to_string(line) + ": " + msg),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A computation produced or met a value it cannot continue from (non-finite loss,
/// degenerate marginal, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ccl
