#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace beesense {

enum class ErrorKind {
    Format,           // malformed container or header
    Unsupported,      // valid container, unsupported content
    EmptyInput,
    Parse,
    Range,
    InsufficientData,
    Domain,
    Shape,
    Parameter,
    State,
    Precondition,
    Data,
    Version,
    Validation,
    Io,
    NonFinite,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        fail(kind, message);
    }
}

}  // namespace beesense
