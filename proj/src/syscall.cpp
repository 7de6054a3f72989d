#include "attacksim/syscall.hpp"

#include "attacksim/error.hpp"

#include <cstring>

namespace attacksim {

namespace {

constexpr std::uint8_t kTagInt = 0;
constexpr std::uint8_t kTagBytes = 1;

template <typename T>
void put_le(std::string& out, T value) {
    auto u = static_cast<std::make_unsigned_t<T>>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        std::make_unsigned_t<T> u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return static_cast<T>(u);
    }

    std::string take(std::size_t n) {
        need(n);
        std::string out(bytes_.substr(pos_, n));
        pos_ += n;
        return out;
    }

    bool at_end() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw Error(ErrorCode::Wire, "truncated syscall message");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

void put_values(std::string& out, const std::vector<SysValue>& values) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(values.size()));
    for (const auto& v : values) {
        if (const auto* i = std::get_if<std::int64_t>(&v)) {
            out.push_back(static_cast<char>(kTagInt));
            put_le<std::int64_t>(out, *i);
        } else {
            const auto& s = std::get<std::string>(v);
            out.push_back(static_cast<char>(kTagBytes));
            put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
            out.append(s);
        }
    }
}

std::vector<SysValue> get_values(Reader& in) {
    auto count = in.get<std::uint32_t>();
    // every value occupies at least 5 bytes; reject absurd counts early
    if (count > in.remaining() / 5 + 1) throw Error(ErrorCode::Wire, "value count exceeds message size");
    std::vector<SysValue> values;
    values.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto tag = in.get<std::uint8_t>();
        if (tag == kTagInt) {
            values.emplace_back(in.get<std::int64_t>());
        } else if (tag == kTagBytes) {
            auto len = in.get<std::uint32_t>();
            values.emplace_back(in.take(len));
        } else {
            throw Error(ErrorCode::Wire, "unknown value tag " + std::to_string(tag));
        }
    }
    return values;
}

void check_version(Reader& in) {
    auto version = in.get<std::uint8_t>();
    if (version != kWireVersion) throw Error(ErrorCode::Wire, "unsupported wire version " + std::to_string(version));
}

template <typename T>
const T& value_at(const std::vector<SysValue>& values, std::size_t i, const char* what) {
    if (i >= values.size()) throw Error(ErrorCode::Parameter, std::string("missing ") + what + " #" + std::to_string(i));
    const auto* v = std::get_if<T>(&values[i]);
    if (!v) throw Error(ErrorCode::Parameter, std::string(what) + " #" + std::to_string(i) + " has the wrong type");
    return *v;
}

} // namespace

std::string_view to_string(Opcode op) {
    switch (op) {
    case Opcode::Open: return "open";
    case Opcode::Read: return "read";
    case Opcode::Write: return "write";
    case Opcode::Close: return "close";
    case Opcode::Socket: return "socket";
    case Opcode::Connect: return "connect";
    case Opcode::Bind: return "bind";
    case Opcode::Listen: return "listen";
    case Opcode::Accept: return "accept";
    case Opcode::Send: return "send";
    case Opcode::Recv: return "recv";
    case Opcode::ListDir: return "list-dir";
    case Opcode::ExecBuiltin: return "exec-builtin";
    case Opcode::GetInfo: return "getinfo";
    case Opcode::Sleep: return "sleep";
    }
    return "?";
}

bool is_known_opcode(std::uint16_t raw) {
    return raw >= static_cast<std::uint16_t>(Opcode::Open) && raw <= static_cast<std::uint16_t>(Opcode::Sleep);
}

std::string_view to_string(SysStatus status) {
    switch (status) {
    case SysStatus::Ok: return "ok";
    case SysStatus::BadDescriptor: return "bad-descriptor";
    case SysStatus::NotFound: return "not-found";
    case SysStatus::Refused: return "refused";
    case SysStatus::TimedOut: return "timed-out";
    case SysStatus::Unreachable: return "unreachable";
    case SysStatus::ConnectionReset: return "connection-reset";
    case SysStatus::AddressInUse: return "address-in-use";
    case SysStatus::WouldBlock: return "would-block";
    case SysStatus::Invalid: return "invalid";
    case SysStatus::PermissionDenied: return "permission-denied";
    case SysStatus::NotConnected: return "not-connected";
    case SysStatus::UnknownCommand: return "unknown-command";
    case SysStatus::MachineDown: return "machine-down";
    }
    return "?";
}

std::int64_t SyscallRequest::int_arg(std::size_t i) const { return value_at<std::int64_t>(args, i, "integer argument"); }
const std::string& SyscallRequest::bytes_arg(std::size_t i) const { return value_at<std::string>(args, i, "byte argument"); }
std::int64_t SyscallResponse::int_result(std::size_t i) const { return value_at<std::int64_t>(results, i, "integer result"); }
const std::string& SyscallResponse::bytes_result(std::size_t i) const {
    return value_at<std::string>(results, i, "byte result");
}

std::string encode(const SyscallRequest& request) {
    std::string out;
    out.push_back(static_cast<char>(kWireVersion));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(request.opcode));
    put_values(out, request.args);
    return out;
}

std::string encode(const SyscallResponse& response) {
    std::string out;
    out.push_back(static_cast<char>(kWireVersion));
    put_le<std::int32_t>(out, static_cast<std::int32_t>(response.status));
    put_values(out, response.results);
    return out;
}

SyscallRequest decode_request(std::string_view bytes) {
    Reader in(bytes);
    check_version(in);
    auto raw = in.get<std::uint16_t>();
    if (!is_known_opcode(raw)) throw Error(ErrorCode::Wire, "unknown opcode " + std::to_string(raw));
    SyscallRequest request{static_cast<Opcode>(raw), get_values(in)};
    if (!in.at_end()) throw Error(ErrorCode::Wire, "trailing bytes after syscall request");
    return request;
}

SyscallResponse decode_response(std::string_view bytes) {
    Reader in(bytes);
    check_version(in);
    auto raw = in.get<std::int32_t>();
    if (raw < 0 || raw > static_cast<std::int32_t>(SysStatus::MachineDown))
        throw Error(ErrorCode::Wire, "unknown status " + std::to_string(raw));
    SyscallResponse response{static_cast<SysStatus>(raw), get_values(in)};
    if (!in.at_end()) throw Error(ErrorCode::Wire, "trailing bytes after syscall response");
    return response;
}

std::string frame(std::string_view payload) {
    std::string out;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(payload.size()));
    out.append(payload);
    return out;
}

std::optional<std::string> take_frame(std::string& buffer) {
    if (buffer.size() < 4) return std::nullopt;
    Reader in(std::string_view(buffer).substr(0, 4));
    auto len = in.get<std::uint32_t>();
    if (buffer.size() < 4 + std::size_t{len}) return std::nullopt;
    std::string payload = buffer.substr(4, len);
    buffer.erase(0, 4 + std::size_t{len});
    return payload;
}

namespace sys {

SyscallRequest open(std::string path, std::int64_t flags) { return {Opcode::Open, {std::move(path), flags}}; }
SyscallRequest read(std::int64_t fd, std::int64_t max) { return {Opcode::Read, {fd, max}}; }
SyscallRequest write(std::int64_t fd, std::string data) { return {Opcode::Write, {fd, std::move(data)}}; }
SyscallRequest close(std::int64_t fd) { return {Opcode::Close, {fd}}; }
SyscallRequest socket(std::int64_t proto) { return {Opcode::Socket, {proto}}; }
SyscallRequest connect(std::int64_t fd, std::string address, std::int64_t port) {
    return {Opcode::Connect, {fd, std::move(address), port}};
}
SyscallRequest bind(std::int64_t fd, std::string address, std::int64_t port) {
    return {Opcode::Bind, {fd, std::move(address), port}};
}
SyscallRequest listen(std::int64_t fd, std::int64_t backlog) { return {Opcode::Listen, {fd, backlog}}; }
SyscallRequest accept(std::int64_t fd, bool nonblocking) {
    return {Opcode::Accept, {fd, std::int64_t{nonblocking ? 1 : 0}}};
}
SyscallRequest send(std::int64_t fd, std::string data) { return {Opcode::Send, {fd, std::move(data)}}; }
SyscallRequest send_to(std::int64_t fd, std::string data, std::string address, std::int64_t port) {
    return {Opcode::Send, {fd, std::move(data), std::move(address), port}};
}
SyscallRequest recv(std::int64_t fd, std::int64_t max, bool nonblocking) {
    return {Opcode::Recv, {fd, max, std::int64_t{nonblocking ? 1 : 0}}};
}
SyscallRequest list_dir(std::string path) { return {Opcode::ListDir, {std::move(path)}}; }
SyscallRequest exec_builtin(std::string command_line) { return {Opcode::ExecBuiltin, {std::move(command_line)}}; }
SyscallRequest get_info(std::string what) { return {Opcode::GetInfo, {std::move(what)}}; }
SyscallRequest sleep(std::int64_t ms) { return {Opcode::Sleep, {ms}}; }

} // namespace sys

} // namespace attacksim
