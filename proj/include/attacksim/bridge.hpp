#pragma once

// Bridges between real host sockets and the simulation. All world access
// happens on the engine thread: network threads only push commands into
// the world's inbox.

#include "attacksim/ipv4.hpp"
#include "attacksim/types.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace attacksim {

class World;
class SocketReal;

/// Outbound half of a bridged connection, called from the engine thread.
class BridgeSink {
public:
    virtual ~BridgeSink() = default;
    virtual void send(std::uint64_t connection, const std::string& data) = 0;
    virtual void close(std::uint64_t connection) = 0;
};

/// Shared plumbing: a loopback listener and one reader thread per client.
class RealListener {
public:
    virtual ~RealListener();

    /// Binds 127.0.0.1:port (0 picks a free port) and starts accepting.
    void start(std::uint16_t port = 0);
    void stop();
    std::uint16_t port() const { return port_; }

protected:
    virtual void on_open(std::uint64_t connection) = 0;
    virtual void on_data(std::uint64_t connection, std::string data) = 0;
    virtual void on_close(std::uint64_t connection) = 0;

    void write_all(std::uint64_t connection, const std::string& data);
    void shutdown_connection(std::uint64_t connection);

private:
    void accept_loop();
    void read_loop(std::uint64_t connection, int fd);

    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex mu_;
    std::map<std::uint64_t, int> fds_;
    std::vector<std::thread> readers_;
    std::uint64_t next_connection_ = 1;
};

/// Exposes a simulated TCP service (address, port) on a loopback port.
class PortBridge final : public RealListener, public BridgeSink {
public:
    PortBridge(World& world, Ipv4 address, std::uint16_t sim_port);
    ~PortBridge() override;

    void send(std::uint64_t connection, const std::string& data) override;
    void close(std::uint64_t connection) override;

private:
    void on_open(std::uint64_t connection) override;
    void on_data(std::uint64_t connection, std::string data) override;
    void on_close(std::uint64_t connection) override;

    World& world_;
    Ipv4 address_;
    std::uint16_t sim_port_;
    // engine-thread only
    std::map<std::uint64_t, std::shared_ptr<SocketReal>> sockets_;
};

/// Real program driving an agent: each framed request is proxied along the
/// agent chain and the framed response written back.
class SyscallBridge final : public RealListener {
public:
    SyscallBridge(World& world, AgentId agent);
    ~SyscallBridge() override;

private:
    void on_open(std::uint64_t) override {}
    void on_data(std::uint64_t connection, std::string data) override;
    void on_close(std::uint64_t connection) override;

    World& world_;
    AgentId agent_;
    std::mutex mu_;
    std::map<std::uint64_t, std::string> buffers_;
};

} // namespace attacksim
