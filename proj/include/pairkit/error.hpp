#pragma once

#include <stdexcept>
#include <string>

namespace pairkit {

/// Error category, printed as the machine-parseable prefix of CLI failures.
enum class ErrorKind { Io, Parse, Validation, Coverage, Usage, Numeric };

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace pairkit
