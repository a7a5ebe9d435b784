#include "beesense/error.hpp"

namespace beesense {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Format: return "format error";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::EmptyInput: return "empty input";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Precondition: return "precondition error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Version: return "version error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Io: return "io error";
    case ErrorKind::NonFinite: return "non-finite value";
    }
    return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace beesense
