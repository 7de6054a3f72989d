#pragma once

// Universal syscall interface shared by every simulated platform, and its
// wire encoding for proxying between agents and over socketreal bridges.
//
// Encoding (all integers little-endian):
//   request  := version:u8 opcode:u16 argc:u32 value*
//   response := version:u8 status:i32 count:u32 value*
//   value    := tag:u8 (0 = int64, 1 = bytes)
//               int64 -> 8 bytes
//               bytes -> length:u32 data
//   frame    := length:u32 payload     (stream transports)

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace attacksim {

inline constexpr std::uint8_t kWireVersion = 1;

enum class Opcode : std::uint16_t {
    Open = 1,
    Read = 2,
    Write = 3,
    Close = 4,
    Socket = 5,
    Connect = 6,
    Bind = 7,
    Listen = 8,
    Accept = 9,
    Send = 10,
    Recv = 11,
    ListDir = 12,
    ExecBuiltin = 13,
    GetInfo = 14,
    Sleep = 15,
};

std::string_view to_string(Opcode op);
bool is_known_opcode(std::uint16_t raw);

enum class SysStatus : std::int32_t {
    Ok = 0,
    BadDescriptor = 1,
    NotFound = 2,
    Refused = 3,
    TimedOut = 4,
    Unreachable = 5,
    ConnectionReset = 6,
    AddressInUse = 7,
    WouldBlock = 8,
    Invalid = 9,
    PermissionDenied = 10,
    NotConnected = 11,
    UnknownCommand = 12,
    MachineDown = 13,
};

std::string_view to_string(SysStatus status);

using SysValue = std::variant<std::int64_t, std::string>;

struct SyscallRequest {
    Opcode opcode = Opcode::GetInfo;
    std::vector<SysValue> args;

    std::int64_t int_arg(std::size_t i) const;
    const std::string& bytes_arg(std::size_t i) const;

    friend bool operator==(const SyscallRequest&, const SyscallRequest&) = default;
};

struct SyscallResponse {
    SysStatus status = SysStatus::Ok;
    std::vector<SysValue> results;

    bool ok() const { return status == SysStatus::Ok; }
    std::int64_t int_result(std::size_t i) const;
    const std::string& bytes_result(std::size_t i) const;

    static SyscallResponse error(SysStatus status) { return {status, {}}; }

    friend bool operator==(const SyscallResponse&, const SyscallResponse&) = default;
};

std::string encode(const SyscallRequest& request);
std::string encode(const SyscallResponse& response);

/// Throw Error(Wire) on truncated, trailing or unknown content.
SyscallRequest decode_request(std::string_view bytes);
SyscallResponse decode_response(std::string_view bytes);

/// Length-prefixed framing for byte streams.
std::string frame(std::string_view payload);

/// Pops one complete frame from the front of `buffer` if present.
std::optional<std::string> take_frame(std::string& buffer);

namespace sys {

// Request builders, used by simulated threads and tests alike.
SyscallRequest open(std::string path, std::int64_t flags);
SyscallRequest read(std::int64_t fd, std::int64_t max);
SyscallRequest write(std::int64_t fd, std::string data);
SyscallRequest close(std::int64_t fd);
SyscallRequest socket(std::int64_t proto);
SyscallRequest connect(std::int64_t fd, std::string address, std::int64_t port);
SyscallRequest bind(std::int64_t fd, std::string address, std::int64_t port);
SyscallRequest listen(std::int64_t fd, std::int64_t backlog);
SyscallRequest accept(std::int64_t fd, bool nonblocking = false);
SyscallRequest send(std::int64_t fd, std::string data);
SyscallRequest send_to(std::int64_t fd, std::string data, std::string address, std::int64_t port);
SyscallRequest recv(std::int64_t fd, std::int64_t max, bool nonblocking = false);
SyscallRequest list_dir(std::string path);
SyscallRequest exec_builtin(std::string command_line);
SyscallRequest get_info(std::string what);
SyscallRequest sleep(std::int64_t ms);

inline constexpr std::int64_t kTcp = 0;
inline constexpr std::int64_t kUdp = 1;
inline constexpr std::int64_t kIcmp = 2;  // connect() is a reachability probe

inline constexpr std::int64_t kOpenRead = 0;
inline constexpr std::int64_t kOpenWrite = 1;  // create or truncate
inline constexpr std::int64_t kOpenAppend = 2;

} // namespace sys

} // namespace attacksim
