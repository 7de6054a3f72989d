#include "attacksim/bridge.hpp"

#include "attacksim/error.hpp"
#include "attacksim/world.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace attacksim {

RealListener::~RealListener() { stop(); }

void RealListener::start(std::uint16_t port) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(ErrorCode::Bind, std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
        auto msg = std::string(std::strerror(errno));
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error(ErrorCode::Bind, "bridge listen on port " + std::to_string(port) + ": " + msg);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void RealListener::stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (acceptor_.joinable()) acceptor_.join();
    {
        std::lock_guard lock(mu_);
        for (auto& [c, fd] : fds_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : readers_)
        if (t.joinable()) t.join();
    readers_.clear();
}

void RealListener::accept_loop() {
    while (running_) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_) return;
            continue;
        }
        std::uint64_t id;
        {
            std::lock_guard lock(mu_);
            id = next_connection_++;
            fds_[id] = fd;
        }
        on_open(id);
        std::lock_guard lock(mu_);
        readers_.emplace_back([this, id, fd] { read_loop(id, fd); });
    }
}

void RealListener::read_loop(std::uint64_t connection, int fd) {
    char buf[4096];
    for (;;) {
        auto n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) break;
        on_data(connection, std::string(buf, static_cast<std::size_t>(n)));
    }
    on_close(connection);
    std::lock_guard lock(mu_);
    fds_.erase(connection);
    ::close(fd);
}

void RealListener::write_all(std::uint64_t connection, const std::string& data) {
    int fd;
    {
        std::lock_guard lock(mu_);
        auto it = fds_.find(connection);
        if (it == fds_.end()) return;
        fd = it->second;
    }
    std::size_t off = 0;
    while (off < data.size()) {
        auto n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n <= 0) return;
        off += static_cast<std::size_t>(n);
    }
}

void RealListener::shutdown_connection(std::uint64_t connection) {
    std::lock_guard lock(mu_);
    auto it = fds_.find(connection);
    if (it != fds_.end()) ::shutdown(it->second, SHUT_RDWR);
}

PortBridge::PortBridge(World& world, Ipv4 address, std::uint16_t sim_port)
    : world_(world), address_(address), sim_port_(sim_port) {}

PortBridge::~PortBridge() { stop(); }

void PortBridge::send(std::uint64_t connection, const std::string& data) { write_all(connection, data); }

void PortBridge::close(std::uint64_t connection) { shutdown_connection(connection); }

void PortBridge::on_open(std::uint64_t connection) {
    world_.inbox().push([this, connection] {
        auto s = world_.accept_real(address_, sim_port_, connection, this);
        if (!s) {
            shutdown_connection(connection);
            return;
        }
        sockets_[connection] = std::move(s);
    });
}

void PortBridge::on_data(std::uint64_t connection, std::string data) {
    world_.inbox().push([this, connection, data = std::move(data)]() mutable {
        auto it = sockets_.find(connection);
        if (it != sockets_.end()) world_.real_data(it->second, std::move(data));
    });
}

void PortBridge::on_close(std::uint64_t connection) {
    world_.inbox().push([this, connection] {
        auto it = sockets_.find(connection);
        if (it == sockets_.end()) return;
        world_.real_closed(it->second);
        sockets_.erase(it);
    });
}

SyscallBridge::SyscallBridge(World& world, AgentId agent) : world_(world), agent_(agent) {}

SyscallBridge::~SyscallBridge() { stop(); }

void SyscallBridge::on_data(std::uint64_t connection, std::string data) {
    std::vector<std::string> requests;
    {
        std::lock_guard lock(mu_);
        auto& buf = buffers_[connection];
        buf += data;
        while (auto f = take_frame(buf)) requests.push_back(std::move(*f));
    }
    for (auto& payload : requests) {
        world_.inbox().push([this, connection, payload = std::move(payload)] {
            SyscallResponse response;
            try {
                response = world_.proxy_syscall(world_.chain_to(agent_), decode_request(payload));
            } catch (const ChainBrokenError&) {
                response = SyscallResponse::error(SysStatus::Unreachable);
            } catch (const Error&) {
                response = SyscallResponse::error(SysStatus::Invalid);
            }
            write_all(connection, frame(encode(response)));
        });
    }
}

void SyscallBridge::on_close(std::uint64_t connection) {
    std::lock_guard lock(mu_);
    buffers_.erase(connection);
}

} // namespace attacksim
