#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace attacksim {

enum class ErrorCode {
    SchemaViolation,
    DeadAgent,
    Parameter,
    Addressing,
    BadDescriptor,
    ConnectionReset,
    Bind,
    Lookup,
    NotFound,
    Channel,
    DeadMachine,
    ChainBroken,
    Command,
    Parse,
    Validation,
    Busy,
    Unsupported,
    Wire,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the simulator carries one of the codes above so
/// that the control layer can map it onto a transport status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by proxy_syscall when a hop in the agent chain is not alive.
class ChainBrokenError : public Error {
public:
    ChainBrokenError(std::uint64_t hop, const std::string& message)
        : Error(ErrorCode::ChainBroken, message), hop_(hop) {}

    std::uint64_t dead_hop() const noexcept { return hop_; }

private:
    std::uint64_t hop_;
};

/// Markup and scenario parse failures; line/column are 1-based, 0 if unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line = 0, std::size_t column = 0)
        : Error(ErrorCode::Parse, format(message, line, column)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& message, std::size_t line, std::size_t column) {
        if (line == 0) return message;
        return std::to_string(line) + ":" + std::to_string(column) + ": " + message;
    }

    std::size_t line_;
    std::size_t column_;
};

} // namespace attacksim
