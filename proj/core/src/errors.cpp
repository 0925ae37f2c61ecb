#include "firelite/errors.hpp"

namespace firelite {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Shape: return "shape error";
        case ErrorKind::Data: return "data error";
        case ErrorKind::Config: return "config error";
        case ErrorKind::Weight: return "weight error";
        case ErrorKind::Format: return "format error";
        case ErrorKind::Version: return "version error";
        case ErrorKind::Corruption: return "corruption error";
        case ErrorKind::Truncation: return "truncation error";
        case ErrorKind::Io: return "I/O error";
        case ErrorKind::Decode: return "decode error";
        case ErrorKind::Domain: return "domain error";
        case ErrorKind::Layout: return "layout error";
    }
    return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace firelite
