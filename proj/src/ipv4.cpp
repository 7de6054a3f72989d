#include "attacksim/ipv4.hpp"

#include "attacksim/error.hpp"

#include <charconv>

namespace attacksim {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::SchemaViolation: return "schema-violation";
    case ErrorCode::DeadAgent: return "dead-agent";
    case ErrorCode::Parameter: return "parameter";
    case ErrorCode::Addressing: return "addressing";
    case ErrorCode::BadDescriptor: return "bad-descriptor";
    case ErrorCode::ConnectionReset: return "connection-reset";
    case ErrorCode::Bind: return "bind";
    case ErrorCode::Lookup: return "lookup";
    case ErrorCode::NotFound: return "not-found";
    case ErrorCode::Channel: return "channel";
    case ErrorCode::DeadMachine: return "dead-machine";
    case ErrorCode::ChainBroken: return "chain-broken";
    case ErrorCode::Command: return "command";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Busy: return "busy";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::Wire: return "wire";
    }
    return "unknown";
}

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
    std::uint32_t value = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (p == end || *p != '.') return std::nullopt;
            ++p;
        }
        unsigned part = 0;
        auto [next, ec] = std::from_chars(p, end, part);
        if (ec != std::errc{} || next == p || next - p > 3 || part > 255) return std::nullopt;
        value = (value << 8) | part;
        p = next;
    }
    if (p != end) return std::nullopt;
    return Ipv4(value);
}

Ipv4 Ipv4::from_string(std::string_view text) {
    auto parsed = parse(text);
    if (!parsed) throw Error(ErrorCode::Addressing, "malformed IPv4 address '" + std::string(text) + "'");
    return *parsed;
}

std::string Ipv4::to_string() const {
    return std::to_string(value_ >> 24) + "." + std::to_string((value_ >> 16) & 0xff) + "." +
           std::to_string((value_ >> 8) & 0xff) + "." + std::to_string(value_ & 0xff);
}

std::optional<Cidr> Cidr::parse(std::string_view text) {
    auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        auto addr = Ipv4::parse(text);
        if (!addr) return std::nullopt;
        return Cidr(*addr, 32);
    }
    auto addr = Ipv4::parse(text.substr(0, slash));
    if (!addr) return std::nullopt;
    int len = 0;
    auto tail = text.substr(slash + 1);
    auto [next, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), len);
    if (ec != std::errc{} || next != tail.data() + tail.size() || len < 0 || len > 32) return std::nullopt;
    return Cidr(*addr, len);
}

Cidr Cidr::from_string(std::string_view text) {
    auto parsed = parse(text);
    if (!parsed) throw Error(ErrorCode::Addressing, "malformed address block '" + std::string(text) + "'");
    return *parsed;
}

std::string Cidr::to_string() const {
    return base_.to_string() + "/" + std::to_string(len_);
}

std::uint64_t Cidr::host_count() const {
    std::uint64_t size = std::uint64_t{1} << (32 - len_);
    return len_ <= 30 ? size - 2 : size;
}

Ipv4 Cidr::host(std::uint64_t index) const {
    std::uint64_t offset = len_ <= 30 ? index + 1 : index;
    return Ipv4(static_cast<std::uint32_t>(base_.value() + offset));
}

} // namespace attacksim
