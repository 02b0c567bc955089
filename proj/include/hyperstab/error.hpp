#pragma once

#include <stdexcept>
#include <string>

namespace hyperstab {

/// Failure categories. The numeric values are the CLI exit codes.
enum class ErrorKind : int {
    InvalidConfig = 2,
    Divergence = 3,
    SeriesNonDecay = 4,
    ParseError = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

}  // namespace hyperstab
