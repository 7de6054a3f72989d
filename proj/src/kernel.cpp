// Syscall implementations, lazily materialized services and the exploit
// hook on application sockets.

#include "attacksim/bridge.hpp"
#include "attacksim/error.hpp"
#include "attacksim/world.hpp"

#include <algorithm>
#include <sstream>

namespace attacksim {

namespace {

SyscallResponse ok(std::vector<SysValue> results = {}) { return {SysStatus::Ok, std::move(results)}; }
ExecResult done(SyscallResponse r) { return ExecResult::completed(std::move(r)); }
ExecResult fail(SysStatus s) { return ExecResult::completed(SyscallResponse::error(s)); }

SimTask connection_handler(int fd, std::string banner) {
    if (!banner.empty()) {
        auto sent = co_await syscall(sys::send(fd, banner));
        if (!sent.ok()) {
            co_await syscall(sys::close(fd));
            co_return;
        }
    }
    for (;;) {
        auto r = co_await syscall(sys::recv(fd, 4096));
        if (!r.ok() || r.bytes_result(0).empty()) break;
    }
    co_await syscall(sys::close(fd));
}

SimTask service_loop(World& world, MachineId machine, ProcessId process, int listen_fd, std::string banner) {
    for (;;) {
        auto r = co_await syscall(sys::accept(listen_fd));
        if (!r.ok()) co_return;
        world.spawn(machine, process, connection_handler(static_cast<int>(r.int_result(0)), banner));
    }
}

} // namespace

struct Kernel {
    World& w;
    Machine& m;
    ProcessId process;
    ThreadId waiter;  // 0 outside simulated threads: never block

    ExecResult block_on(Descriptor& d) {
        if (waiter == 0) return fail(SysStatus::WouldBlock);
        d.waiters.insert(waiter);
        return ExecResult::blocked();
    }

    ExecResult timeout() {
        if (waiter == 0) return fail(SysStatus::TimedOut);
        return ExecResult::sleep_then(SyscallResponse::error(SysStatus::TimedOut), w.now_ + w.options_.filtered_timeout_ms);
    }

    std::shared_ptr<Descriptor> lookup(std::int64_t fd) {
        auto it = m.fds.find(static_cast<int>(fd));
        return it == m.fds.end() ? nullptr : it->second;
    }

    int install(std::shared_ptr<Descriptor> d) {
        int fd = m.lowest_free_fd();
        d->fd = fd;
        d->machine = m.id;
        d->owner = process;
        m.fds[fd] = std::move(d);
        return fd;
    }

    std::uint16_t ephemeral() {
        for (int i = 0; i < 16384; ++i) {
            std::uint16_t port = m.next_ephemeral;
            m.next_ephemeral = port == 65535 ? 49152 : static_cast<std::uint16_t>(port + 1);
            if (!m.bindings.count({Proto::Tcp, port}) && !m.bindings.count({Proto::Udp, port})) return port;
        }
        return 0;
    }

    ExecResult run(const SyscallRequest& r) {
        try {
            switch (r.opcode) {
            case Opcode::Open: return open(r.bytes_arg(0), r.int_arg(1));
            case Opcode::Read: return read(r.int_arg(0), r.int_arg(1));
            case Opcode::Write: return write(r.int_arg(0), r.bytes_arg(1));
            case Opcode::Close: return close(r.int_arg(0));
            case Opcode::Socket: return socket(r.int_arg(0));
            case Opcode::Connect: return connect(r.int_arg(0), r.bytes_arg(1), r.int_arg(2));
            case Opcode::Bind: return bind(r.int_arg(0), r.bytes_arg(1), r.int_arg(2));
            case Opcode::Listen: return listen(r.int_arg(0));
            case Opcode::Accept: return accept(r.int_arg(0), r.args.size() > 1 && r.int_arg(1) != 0);
            case Opcode::Send:
                if (r.args.size() >= 4) return send(r.int_arg(0), r.bytes_arg(1), &r.bytes_arg(2), r.int_arg(3));
                return send(r.int_arg(0), r.bytes_arg(1), nullptr, 0);
            case Opcode::Recv: return recv(r.int_arg(0), r.int_arg(1), r.args.size() > 2 && r.int_arg(2) != 0);
            case Opcode::ListDir: return list_dir(r.bytes_arg(0));
            case Opcode::ExecBuiltin: return exec(r.bytes_arg(0));
            case Opcode::GetInfo: return get_info(r.bytes_arg(0));
            case Opcode::Sleep: {
                auto ms = r.int_arg(0);
                if (ms < 0) return fail(SysStatus::Invalid);
                if (waiter == 0) return done(ok());
                return ExecResult::sleep_then(ok(), w.now_ + ms);
            }
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Parameter) return fail(SysStatus::Invalid);
            if (e.code() == ErrorCode::NotFound) return fail(SysStatus::NotFound);
            throw;
        }
        return fail(SysStatus::Invalid);
    }

    // ---- files ----

    ExecResult open(const std::string& path, std::int64_t flags) {
        auto f = std::make_shared<FileDescriptor>();
        f->path = normalize_path(path);
        if (flags == sys::kOpenRead) {
            if (!m.fs.is_file(f->path)) return fail(SysStatus::NotFound);
        } else if (flags == sys::kOpenWrite) {
            if (m.fs.is_dir(f->path)) return fail(SysStatus::Invalid);
            m.fs.write(f->path, "");
            f->writable = true;
        } else if (flags == sys::kOpenAppend) {
            if (m.fs.is_dir(f->path)) return fail(SysStatus::Invalid);
            if (!m.fs.is_file(f->path)) m.fs.write(f->path, "");
            f->offset = m.fs.read(f->path).size();
            f->writable = true;
        } else {
            return fail(SysStatus::Invalid);
        }
        return done(ok({std::int64_t{install(f)}}));
    }

    ExecResult read_file(FileDescriptor& f, std::int64_t max) {
        if (max < 0) return fail(SysStatus::Invalid);
        auto content = m.fs.read(f.path);
        if (f.offset >= content.size()) return done(ok({std::string()}));
        auto n = std::min<std::size_t>(static_cast<std::size_t>(max), content.size() - f.offset);
        auto out = content.substr(f.offset, n);
        f.offset += n;
        return done(ok({std::move(out)}));
    }

    ExecResult write_file(FileDescriptor& f, const std::string& data) {
        if (!f.writable) return fail(SysStatus::PermissionDenied);
        std::string content = m.fs.is_file(f.path) ? m.fs.read(f.path) : std::string();
        if (content.size() < f.offset) content.resize(f.offset, '\0');
        content.replace(f.offset, std::min(data.size(), content.size() - f.offset), data);
        m.fs.write(f.path, std::move(content));
        f.offset += data.size();
        return done(ok({static_cast<std::int64_t>(data.size())}));
    }

    ExecResult read(std::int64_t fd, std::int64_t max) {
        auto d = lookup(fd);
        if (!d) return fail(SysStatus::BadDescriptor);
        if (auto* f = dynamic_cast<FileDescriptor*>(d.get())) return read_file(*f, max);
        return recv(fd, max, false);
    }

    ExecResult write(std::int64_t fd, const std::string& data) {
        auto d = lookup(fd);
        if (!d) return fail(SysStatus::BadDescriptor);
        if (auto* f = dynamic_cast<FileDescriptor*>(d.get())) return write_file(*f, data);
        return send(fd, data, nullptr, 0);
    }

    ExecResult close(std::int64_t fd) {
        auto d = lookup(fd);
        if (!d) return fail(SysStatus::BadDescriptor);
        if (auto* s = dynamic_cast<Socket*>(d.get()); s && s->pinned) return done(ok());
        w.close_descriptor(m, static_cast<int>(fd), false);
        return done(ok());
    }

    ExecResult list_dir(const std::string& path) {
        if (!m.fs.is_dir(path)) return fail(SysStatus::NotFound);
        std::vector<SysValue> names;
        for (auto& n : m.fs.list(path)) names.emplace_back(std::move(n));
        return done(ok(std::move(names)));
    }

    // ---- sockets ----

    ExecResult socket(std::int64_t proto) {
        if (proto < 0 || proto > 2) return fail(SysStatus::Invalid);
        auto s = std::make_shared<SocketDirect>();
        s->proto = static_cast<Proto>(proto);
        return done(ok({std::int64_t{install(s)}}));
    }

    Socket* socket_at(std::int64_t fd) { return dynamic_cast<Socket*>(lookup(fd).get()); }

    bool port_reserved(std::uint16_t port) const {
        for (std::size_t i = 0; i < m.profile.applications.size(); ++i) {
            const auto& app = m.profile.applications[i];
            if (!app.running() || m.apps[i].crashed) continue;
            if (std::find(app.ports.begin(), app.ports.end(), port) == app.ports.end()) continue;
            auto p = m.processes.find(process);
            return p == m.processes.end() || p->second.app != i;
        }
        return false;
    }

    ExecResult bind(std::int64_t fd, const std::string& address, std::int64_t port) {
        auto* s = socket_at(fd);
        if (!s) return fail(SysStatus::BadDescriptor);
        if (s->state != SocketState::Closed || s->proto == Proto::Icmp) return fail(SysStatus::Invalid);
        auto addr = Ipv4::parse(address);
        if (!addr || (!addr->is_any() && !m.has_address(*addr)) || port < 0 || port > 65535)
            return fail(SysStatus::Invalid);
        auto p = static_cast<std::uint16_t>(port);
        if (p == 0) p = ephemeral();
        if (m.bindings.count({s->proto, p}) || port_reserved(p)) return fail(SysStatus::AddressInUse);
        s->pcb = Pcb{addr->is_any() ? m.primary() : *addr, p, Ipv4(), 0, s->proto, process};
        s->state = SocketState::Bound;
        m.bindings[{s->proto, p}] = std::static_pointer_cast<Socket>(lookup(fd));
        return done(ok({std::int64_t{p}}));
    }

    ExecResult listen(std::int64_t fd) {
        auto* s = socket_at(fd);
        if (!s) return fail(SysStatus::BadDescriptor);
        if (s->state != SocketState::Bound || s->proto != Proto::Tcp) return fail(SysStatus::Invalid);
        s->state = SocketState::Listening;
        return done(ok());
    }

    ExecResult accept(std::int64_t fd, bool nonblocking) {
        auto d = lookup(fd);
        auto* s = dynamic_cast<Socket*>(d.get());
        if (!s) return fail(SysStatus::BadDescriptor);
        if (s->state != SocketState::Listening) return fail(SysStatus::Invalid);
        if (s->backlog.empty()) {
            if (nonblocking) return fail(SysStatus::WouldBlock);
            return block_on(*s);
        }
        auto conn = std::move(s->backlog.front());
        s->backlog.pop_front();
        conn->owner = process;
        int newfd = m.lowest_free_fd();
        conn->fd = newfd;
        m.fds[newfd] = conn;
        const auto& pcb = *conn->pcb;
        return done(ok({std::int64_t{newfd}, pcb.remote.to_string(), std::int64_t{pcb.remote_port}}));
    }

    ExecResult connect(std::int64_t fd, const std::string& address, std::int64_t port) {
        auto d = lookup(fd);
        auto client = std::dynamic_pointer_cast<SocketDirect>(d);
        if (!client) return fail(SysStatus::BadDescriptor);
        if (client->state != SocketState::Closed && client->state != SocketState::Bound) return fail(SysStatus::Invalid);
        auto dst_addr = Ipv4::parse(address);
        if (!dst_addr || port < 0 || port > 65535) return fail(SysStatus::Invalid);
        auto dst_port = static_cast<std::uint16_t>(port);
        auto route = w.route(m.primary(), *dst_addr, client->proto, dst_port);

        if (client->proto == Proto::Icmp) {
            switch (route.status) {
            case RouteResult::Status::NoHost: return fail(SysStatus::NotFound);
            case RouteResult::Status::Unreachable: return fail(SysStatus::Unreachable);
            case RouteResult::Status::Filtered: return timeout();
            case RouteResult::Status::Path: break;
            }
            auto& target = w.machine(route.destination);
            if (target.state != MachineState::Up) return timeout();
            ++target.touches;
            return done(ok());
        }
        if (route.status == RouteResult::Status::Unreachable || route.status == RouteResult::Status::NoHost)
            return fail(SysStatus::Unreachable);
        if (route.status == RouteResult::Status::Filtered) return timeout();
        auto& target = w.machine(route.destination);
        if (target.state != MachineState::Up) return timeout();
        ++target.touches;

        if (!client->pcb) {
            auto p = ephemeral();
            client->pcb = Pcb{route.egress, p, Ipv4(), 0, client->proto, process};
        }
        client->pcb->remote = *dst_addr;
        client->pcb->remote_port = dst_port;

        if (client->proto == Proto::Udp) {
            client->state = SocketState::Connected;
            return done(ok());
        }

        auto listener = w.find_listener(target, dst_port);
        if (!listener) return fail(SysStatus::Refused);

        auto server = std::make_shared<SocketDirect>();
        server->proto = Proto::Tcp;
        server->machine = target.id;
        server->owner = listener->owner;
        server->app = listener->app;
        server->state = SocketState::Connected;
        server->pcb = Pcb{*dst_addr, dst_port, client->pcb->local, client->pcb->local_port, Proto::Tcp, listener->owner};
        server->peer = client;
        client->peer = server;
        client->state = SocketState::Connected;
        listener->backlog.push_back(server);
        w.wake_all(*listener);
        ++w.connections_;
        return done(ok());
    }

    ExecResult send(std::int64_t fd, const std::string& data, const std::string* address, std::int64_t port) {
        auto d = lookup(fd);
        if (!d) return fail(SysStatus::BadDescriptor);
        if (auto* f = dynamic_cast<FileDescriptor*>(d.get())) return write_file(*f, data);
        auto* s = static_cast<Socket*>(d.get());
        auto n = static_cast<std::int64_t>(data.size());

        if (s->proto == Proto::Udp) return send_datagram(*s, data, address, port);
        if (s->proto != Proto::Tcp) return fail(SysStatus::Invalid);
        if (s->state != SocketState::Connected) return fail(SysStatus::NotConnected);
        if (s->reset) return fail(SysStatus::ConnectionReset);

        if (auto* real = dynamic_cast<SocketReal*>(s)) {
            if (real->peer_closed || !real->sink) return fail(SysStatus::ConnectionReset);
            real->sink->send(real->connection, data);
            return done(ok({n}));
        }
        auto* direct = static_cast<SocketDirect*>(s);
        auto peer = direct->peer.lock();
        if (!peer || peer->state == SocketState::Closed) return fail(SysStatus::ConnectionReset);
        if (peer->app && data.compare(0, kExploitMagic.size(), kExploitMagic) == 0) {
            exploit(*direct, peer, data.substr(kExploitMagic.size()));
            return done(ok({n}));
        }
        peer->rx += data;
        w.wake_all(*peer);
        return done(ok({n}));
    }

    ExecResult send_datagram(Socket& s, const std::string& data, const std::string* address, std::int64_t port) {
        Ipv4 dst;
        std::uint16_t dst_port = 0;
        if (address) {
            auto a = Ipv4::parse(*address);
            if (!a || port < 0 || port > 65535) return fail(SysStatus::Invalid);
            dst = *a;
            dst_port = static_cast<std::uint16_t>(port);
        } else if (s.state == SocketState::Connected && s.pcb) {
            dst = s.pcb->remote;
            dst_port = s.pcb->remote_port;
        } else {
            return fail(SysStatus::NotConnected);
        }
        if (!s.pcb) s.pcb = Pcb{m.primary(), ephemeral(), Ipv4(), 0, Proto::Udp, process};
        auto n = static_cast<std::int64_t>(data.size());
        auto route = w.route(m.primary(), dst, Proto::Udp, dst_port);
        if (!route.ok()) return done(ok({n}));
        auto& target = w.machine(route.destination);
        if (target.state != MachineState::Up) return done(ok({n}));
        ++target.touches;
        auto it = target.bindings.find({Proto::Udp, dst_port});
        if (it == target.bindings.end()) return done(ok({n}));
        it->second->datagrams.push_back(Datagram{data, route.egress, s.pcb->local_port});
        w.wake_all(*it->second);
        return done(ok({n}));
    }

    ExecResult recv(std::int64_t fd, std::int64_t max, bool nonblocking) {
        auto d = lookup(fd);
        if (!d) return fail(SysStatus::BadDescriptor);
        if (auto* f = dynamic_cast<FileDescriptor*>(d.get())) return read_file(*f, max);
        auto* s = static_cast<Socket*>(d.get());
        if (max < 0) return fail(SysStatus::Invalid);

        if (s->proto == Proto::Udp) {
            if (!s->datagrams.empty()) {
                auto dg = std::move(s->datagrams.front());
                s->datagrams.pop_front();
                if (dg.data.size() > static_cast<std::size_t>(max)) dg.data.resize(static_cast<std::size_t>(max));
                return done(ok({std::move(dg.data), dg.from.to_string(), std::int64_t{dg.from_port}}));
            }
            if (s->state == SocketState::Closed) return fail(SysStatus::NotConnected);
            return nonblocking ? fail(SysStatus::WouldBlock) : block_on(*s);
        }
        if (s->proto != Proto::Tcp || s->state != SocketState::Connected) return fail(SysStatus::NotConnected);
        if (!s->rx.empty()) {
            auto n = std::min<std::size_t>(static_cast<std::size_t>(max), s->rx.size());
            std::string out = s->rx.substr(0, n);
            s->rx.erase(0, n);
            return done(ok({std::move(out)}));
        }
        if (s->reset) return fail(SysStatus::ConnectionReset);
        bool eof = s->peer_closed;
        if (auto* direct = dynamic_cast<SocketDirect*>(s)) eof = eof || direct->peer.expired();
        if (eof) return done(ok({std::string()}));
        return nonblocking ? fail(SysStatus::WouldBlock) : block_on(*s);
    }

    // ---- exploits ----

    void exploit(SocketDirect& client, const std::shared_ptr<SocketDirect>& server, const std::string& message) {
        auto vuln_id = message.substr(0, message.find_first_of(" \n"));
        const auto* entry = w.vulndb().find(vuln_id);
        auto& target = w.machine(server->machine);
        if (!entry || entry->local) {
            server->rx += std::string(kExploitMagic) + message;
            w.wake_all(*server);
            return;
        }
        auto index = *server->app;
        const auto app = target.profile.applications[index];
        auto res = resolve_exploit(*entry, target.profile, &app, w.rng());
        client.exploit_report = res;
        switch (res.kind) {
        case OutcomeKind::None:
            server->rx += std::string(kExploitMagic) + message;
            w.wake_all(*server);
            break;
        case OutcomeKind::CrashApp: w.crash_application(target.id, app.name); break;
        case OutcomeKind::ResetApp: w.reset_application(target.id, app.name); break;
        case OutcomeKind::CrashOs: w.crash_machine(target.id); break;
        case OutcomeKind::ResetOs: w.reset_machine(target.id); break;
        case OutcomeKind::AgentInstalled: {
            auto p = m.processes.find(process);
            AgentId parent = p != m.processes.end() && p->second.agent != kNoAgent ? p->second.agent : w.local_agent();
            ConnectionMethod method;
            method.kind = ChannelKind::ReuseConnection;
            method.port = server->pcb ? server->pcb->local_port : 0;
            method.reuse_fd = server->fd;
            server->pinned = true;
            auto agent = w.install_agent(target.id, method, parent,
                                         app.privilege == "root" ? Privilege::Root : Privilege::User, server->owner);
            client.rx += std::string(kAgentGreeting) + std::to_string(agent) + "\n";
            w.wake_all(client);
            break;
        }
        }
    }

    // ---- information ----

    ExecResult get_info(const std::string& what) {
        std::vector<SysValue> out;
        if (what == "os") {
            const auto& os = m.profile.os;
            out = {os.name, os.arch, os.version, os.edition, os.servicepack};
        } else if (what == "users") {
            for (const auto& u : m.users) out.emplace_back(u);
        } else if (what == "apps") {
            for (std::size_t i = 0; i < m.profile.applications.size(); ++i) {
                const auto& a = m.profile.applications[i];
                std::string ports;
                for (auto p : a.ports) ports += (ports.empty() ? "" : ",") + std::to_string(p);
                bool running = a.running() && !m.apps[i].crashed;
                out.emplace_back(a.name + "\t" + a.version_major + "\t" + a.version_minor + "\t" +
                                 (running ? "running" : "installed") + "\t" + ports);
            }
        } else if (what == "ifaces") {
            for (const auto& i : m.interfaces) {
                const auto& seg = w.segment(i.segment);
                out.emplace_back(i.address.to_string() + "/" + std::to_string(seg.prefix.prefix_len()));
            }
        } else if (what == "hostname") {
            out.emplace_back(m.name);
        } else if (what == "privilege") {
            out.emplace_back(std::string(to_string(privilege())));
        } else {
            return fail(SysStatus::Invalid);
        }
        return done(ok(std::move(out)));
    }

    Privilege privilege() const {
        auto p = m.processes.find(process);
        if (p != m.processes.end() && p->second.agent != kNoAgent && w.agents_.count(p->second.agent))
            return w.agents_.at(p->second.agent).privilege;
        return Privilege::User;
    }

    ExecResult exec(const std::string& line) {
        std::istringstream in(line);
        std::string cmd;
        in >> cmd;
        std::vector<std::string> args;
        for (std::string a; in >> a;) args.push_back(a);
        std::string out;
        if (cmd == "whoami") {
            out = std::string(to_string(privilege())) + "\n";
        } else if (cmd == "ifconfig") {
            for (std::size_t i = 0; i < m.interfaces.size(); ++i) {
                const auto& itf = m.interfaces[i];
                const auto& seg = w.segment(itf.segment);
                out += "eth" + std::to_string(i) + " inet " + itf.address.to_string() + "/" +
                       std::to_string(seg.prefix.prefix_len()) + "\n";
            }
        } else if (cmd == "ps") {
            for (const auto& [pid, p] : m.processes)
                out += std::to_string(pid) + " " + p.name + "\n";
        } else if (cmd == "ls") {
            auto path = args.empty() ? std::string("/") : args[0];
            if (!m.fs.is_dir(path)) {
                if (m.fs.is_file(path)) return done(ok({normalize_path(path) + "\n"}));
                return fail(SysStatus::NotFound);
            }
            for (const auto& n : m.fs.list(path)) out += n + "\n";
        } else if (cmd == "cat") {
            if (args.empty()) return fail(SysStatus::Invalid);
            for (const auto& path : args) {
                if (!m.fs.is_file(path)) return fail(SysStatus::NotFound);
                out += m.fs.read(path);
            }
        } else if (cmd == "hostname") {
            out = m.name + "\n";
        } else {
            return fail(SysStatus::UnknownCommand);
        }
        return done(ok({std::move(out)}));
    }
};

std::shared_ptr<Socket> World::find_listener(Machine& target, std::uint16_t port) {
    auto it = target.bindings.find({Proto::Tcp, port});
    if (it != target.bindings.end())
        return it->second->state == SocketState::Listening ? it->second : nullptr;
    for (std::size_t i = 0; i < target.profile.applications.size(); ++i) {
        const auto& app = target.profile.applications[i];
        if (!app.running() || target.apps[i].crashed || target.apps[i].process) continue;
        if (std::find(app.ports.begin(), app.ports.end(), port) == app.ports.end()) continue;
        materialize(target, i);
        auto again = target.bindings.find({Proto::Tcp, port});
        return again == target.bindings.end() ? nullptr : again->second;
    }
    return nullptr;
}

void World::materialize(Machine& target, std::size_t index) {
    const auto& app = target.profile.applications[index];
    auto pid = create_process(target.id, app.name, index);
    target.apps[index].process = pid;
    for (auto port : app.ports) {
        auto listener = std::make_shared<SocketDirect>();
        listener->proto = Proto::Tcp;
        listener->state = SocketState::Listening;
        listener->app = index;
        listener->machine = target.id;
        listener->owner = pid;
        listener->pcb = Pcb{target.primary(), port, Ipv4(), 0, Proto::Tcp, pid};
        int fd = target.lowest_free_fd();
        listener->fd = fd;
        target.fds[fd] = listener;
        target.bindings[{Proto::Tcp, port}] = listener;
        spawn(target.id, pid, service_loop(*this, target.id, pid, fd, app.banner));
    }
}

void World::wake_all(Descriptor& d) {
    for (auto t : d.waiters) scheduler_.wake(t);
    d.waiters.clear();
}

void World::close_descriptor(Machine& m, int fd, bool reset_peer) {
    auto it = m.fds.find(fd);
    if (it == m.fds.end()) return;
    auto d = it->second;
    m.fds.erase(it);
    auto* s = dynamic_cast<Socket*>(d.get());
    if (s) {
        if (s->pcb) {
            auto b = m.bindings.find({s->proto, s->pcb->local_port});
            if (b != m.bindings.end() && b->second.get() == s) m.bindings.erase(b);
        }
        for (auto& pending : s->backlog) {
            if (auto* direct = dynamic_cast<SocketDirect*>(pending.get())) {
                if (auto peer = direct->peer.lock()) {
                    peer->reset = true;
                    wake_all(*peer);
                }
            } else if (auto* real = dynamic_cast<SocketReal*>(pending.get()); real && real->sink) {
                real->sink->close(real->connection);
            }
        }
        s->backlog.clear();
        if (auto* direct = dynamic_cast<SocketDirect*>(s)) {
            if (auto peer = direct->peer.lock()) {
                if (reset_peer) peer->reset = true;
                else peer->peer_closed = true;
                wake_all(*peer);
            }
        } else if (auto* real = dynamic_cast<SocketReal*>(s); real && real->sink) {
            real->sink->close(real->connection);
        }
        s->state = SocketState::Closed;
    }
    wake_all(*d);
}

ExecResult World::execute(const ThreadInfo& thread, const SyscallRequest& request) {
    auto& m = machine(thread.machine);
    if (m.state != MachineState::Up) return ExecResult::completed(SyscallResponse::error(SysStatus::MachineDown));
    return Kernel{*this, m, thread.process, thread.id}.run(request);
}

SyscallResponse World::syscall_now(MachineId id, ProcessId process, const SyscallRequest& request) {
    auto& m = machine(id);
    if (m.state != MachineState::Up) return SyscallResponse::error(SysStatus::MachineDown);
    auto r = Kernel{*this, m, process, 0}.run(request);
    return std::move(r.response);
}

ProcessId World::create_process(MachineId id, std::string name, std::optional<std::size_t> app) {
    auto& m = machine(id);
    Process p;
    p.id = next_process_++;
    p.name = std::move(name);
    p.app = app;
    m.processes[p.id] = p;
    return p.id;
}

ThreadId World::spawn(MachineId machine_id, ProcessId process, SimTask task) {
    return scheduler_.spawn(machine_id, process, std::move(task));
}

void World::kill_process(MachineId id, ProcessId process, bool reset_peers) {
    auto& m = machine(id);
    scheduler_.kill_process(id, process);
    std::vector<int> owned;
    for (const auto& [fd, d] : m.fds)
        if (d->owner == process) owned.push_back(fd);
    for (auto fd : owned) close_descriptor(m, fd, reset_peers);
    auto p = m.processes.find(process);
    if (p != m.processes.end()) {
        if (p->second.app && m.apps[*p->second.app].process == process) m.apps[*p->second.app].process = 0;
        m.processes.erase(p);
    }
}

std::optional<Resolution> World::take_exploit_report(MachineId id, int fd) {
    auto& m = machine(id);
    auto it = m.fds.find(fd);
    if (it == m.fds.end()) return std::nullopt;
    auto* s = dynamic_cast<Socket*>(it->second.get());
    if (!s || !s->exploit_report) return std::nullopt;
    auto r = std::move(s->exploit_report);
    s->exploit_report.reset();
    return r;
}

std::shared_ptr<SocketReal> World::accept_real(Ipv4 address, std::uint16_t port, std::uint64_t connection,
                                               BridgeSink* sink) {
    auto* m = machine_at(address);
    if (!m || m->state != MachineState::Up) return nullptr;
    ++m->touches;
    auto listener = find_listener(*m, port);
    if (!listener) return nullptr;
    auto s = std::make_shared<SocketReal>();
    s->proto = Proto::Tcp;
    s->state = SocketState::Connected;
    s->machine = m->id;
    s->owner = listener->owner;
    s->app = listener->app;
    s->connection = connection;
    s->sink = sink;
    s->pcb = Pcb{address, port, Ipv4(), 0, Proto::Tcp, listener->owner};
    listener->backlog.push_back(s);
    wake_all(*listener);
    return s;
}

void World::real_data(const std::shared_ptr<SocketReal>& socket, std::string data) {
    socket->rx += data;
    wake_all(*socket);
}

void World::real_closed(const std::shared_ptr<SocketReal>& socket) {
    socket->peer_closed = true;
    socket->sink = nullptr;
    wake_all(*socket);
}

} // namespace attacksim
