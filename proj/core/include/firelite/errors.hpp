#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace firelite {

/// Classification of every failure the engine can report. Callers (the CLI in
/// particular) map these onto stable exit codes.
enum class ErrorKind {
    Shape,
    Data,
    Config,
    Weight,
    Format,
    Version,
    Corruption,
    Truncation,
    Io,
    Decode,
    Domain,
    Layout,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace firelite
