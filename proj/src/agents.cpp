#include "attacksim/error.hpp"
#include "attacksim/world.hpp"

#include <algorithm>

namespace attacksim {

namespace {

Asset presence(const Machine& m, AgentId id, Privilege p, double probability) {
    return Asset{AssetKind::AgentPresence,
                 {{"host", m.primary().to_string()}, {"agent", std::to_string(id)}, {"privilege", std::string(to_string(p))}},
                 probability};
}

} // namespace

AgentId World::install_agent(MachineId id, const ConnectionMethod& method, AgentId parent, Privilege privilege,
                             ProcessId in_process) {
    auto& target = machine(id);
    if (target.state != MachineState::Up) throw Error(ErrorCode::DeadMachine, target.name + " is not running");
    const auto& up = live_agent(parent);
    const auto& parent_machine = machine(up.machine);

    switch (method.kind) {
    case ChannelKind::ConnectToTarget: {
        auto r = route(parent_machine.primary(), target.primary(), Proto::Tcp, method.port);
        if (!r.ok()) throw Error(ErrorCode::Channel, "no channel from parent to " + target.primary().to_string());
        ++connections_;
        break;
    }
    case ChannelKind::ConnectFromTarget:
    case ChannelKind::HttpTunnel: {
        std::uint16_t port = method.kind == ChannelKind::HttpTunnel ? 80 : method.port;
        auto r = route(target.primary(), parent_machine.primary(), Proto::Tcp, port);
        if (!r.ok()) throw Error(ErrorCode::Channel, "no channel from " + target.primary().to_string() + " to parent");
        ++connections_;
        break;
    }
    case ChannelKind::ReuseConnection: {
        // -1: the kernel already pinned a socket still waiting in a backlog
        if (method.reuse_fd < 0) break;
        auto it = target.fds.find(method.reuse_fd);
        auto* s = it == target.fds.end() ? nullptr : dynamic_cast<Socket*>(it->second.get());
        if (!s || s->state != SocketState::Connected)
            throw Error(ErrorCode::Channel, "reuse channel needs a connected socket");
        s->pinned = true;
        break;
    }
    case ChannelKind::Local:
        if (id != parent_machine.id) throw Error(ErrorCode::Channel, "local channel must stay on the parent's machine");
        break;
    }

    Agent a;
    a.id = next_agent_++;
    a.machine = id;
    a.privilege = privilege;
    a.parent = parent;
    a.channel = method;
    if (in_process && target.processes.count(in_process)) {
        a.process = in_process;
    } else {
        a.process = create_process(id, "agent");
    }
    target.processes[a.process].agent = a.id;
    agents_[a.id] = a;
    assert_asset(presence(target, a.id, privilege, 1.0));
    emit(EventCategory::Agent, {{"agent", a.id},
                                {"host", target.primary().to_string()},
                                {"parent", parent},
                                {"privilege", to_string(privilege)},
                                {"channel", to_string(method.kind)},
                                {"alive", true}});
    return a.id;
}

const Agent& World::agent(AgentId id) const {
    auto it = agents_.find(id);
    if (it == agents_.end()) throw Error(ErrorCode::NotFound, "unknown agent " + std::to_string(id));
    return it->second;
}

Agent& World::agent_mut(AgentId id) { return const_cast<Agent&>(std::as_const(*this).agent(id)); }

bool World::agent_alive(AgentId id) const {
    auto it = agents_.find(id);
    return it != agents_.end() && it->second.alive;
}

const Agent& World::live_agent(AgentId id) const {
    auto it = agents_.find(id);
    if (it == agents_.end()) throw Error(ErrorCode::DeadAgent, "unknown agent " + std::to_string(id));
    if (!it->second.alive) throw Error(ErrorCode::DeadAgent, "agent " + std::to_string(id) + " is dead");
    return it->second;
}

std::vector<AgentId> World::chain_to(AgentId id) const {
    std::vector<AgentId> chain;
    for (AgentId cur = id; cur != kNoAgent; cur = agent(cur).parent) {
        if (chain.size() > agents_.size()) throw Error(ErrorCode::Channel, "agent parent links form a cycle");
        chain.push_back(cur);
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
}

void World::set_privilege(AgentId id, Privilege privilege) {
    auto& a = agent_mut(id);
    live_agent(id);
    if (a.privilege == privilege) return;
    const auto& m = machine(a.machine);
    a.privilege = privilege;
    assert_asset(presence(m, id, privilege, 1.0));
    assert_asset(presence(m, id, privilege == Privilege::Root ? Privilege::User : Privilege::Root, 0.0));
    emit(EventCategory::Agent, {{"agent", id},
                                {"host", m.primary().to_string()},
                                {"parent", a.parent},
                                {"privilege", to_string(privilege)},
                                {"channel", to_string(a.channel.kind)},
                                {"alive", true}});
}

void World::kill_agent_subtree(AgentId id) {
    auto it = agents_.find(id);
    if (it == agents_.end() || !it->second.alive) return;
    // children first so events read leaf to root
    for (auto& [child, a] : agents_)
        if (a.parent == id && a.alive) kill_agent_subtree(child);
    auto& a = it->second;
    a.alive = false;
    auto& m = machine(a.machine);
    assert_asset(presence(m, id, a.privilege, 0.0));
    emit(EventCategory::Agent, {{"agent", id},
                                {"host", m.primary().to_string()},
                                {"parent", a.parent},
                                {"privilege", to_string(a.privilege)},
                                {"channel", to_string(a.channel.kind)},
                                {"alive", false}});
    auto p = m.processes.find(a.process);
    if (p != m.processes.end()) {
        p->second.agent = kNoAgent;
        if (!p->second.app) kill_process(m.id, a.process);
    }
}

void World::kill_agents_on(MachineId id, std::optional<ProcessId> process) {
    std::vector<AgentId> victims;
    for (const auto& [aid, a] : agents_)
        if (a.alive && a.machine == id && (!process || a.process == *process)) victims.push_back(aid);
    for (auto aid : victims) kill_agent_subtree(aid);
}

SyscallResponse World::proxy_syscall(const std::vector<AgentId>& chain, const SyscallRequest& request) {
    if (chain.empty()) throw Error(ErrorCode::Parameter, "empty agent chain");
    for (std::size_t i = 0; i < chain.size(); ++i) {
        auto it = agents_.find(chain[i]);
        if (it == agents_.end()) throw Error(ErrorCode::Parameter, "unknown agent " + std::to_string(chain[i]));
        if (i == 0 && it->second.parent != kNoAgent)
            throw Error(ErrorCode::Channel, "chain must start at the local agent");
        if (i > 0 && it->second.parent != chain[i - 1])
            throw Error(ErrorCode::Channel, "agent " + std::to_string(chain[i]) + " is not a child of " +
                                                std::to_string(chain[i - 1]));
    }
    for (auto id : chain)
        if (!agents_.at(id).alive)
            throw ChainBrokenError(id, "agent " + std::to_string(id) + " in the chain is dead");

    // each hop relays the encoded message verbatim
    std::string wire = encode(request);
    for (std::size_t i = 1; i < chain.size(); ++i) wire = encode(decode_request(wire));
    const auto& last = agents_.at(chain.back());
    auto response = syscall_now(last.machine, last.process, decode_request(wire));
    std::string back = encode(response);
    for (std::size_t i = 1; i < chain.size(); ++i) back = encode(decode_response(back));
    return decode_response(back);
}

std::string World::agent_shell(AgentId id, const std::string& command_line) {
    live_agent(id);
    auto r = proxy_syscall(chain_to(id), sys::exec_builtin(command_line));
    if (r.status == SysStatus::UnknownCommand) throw Error(ErrorCode::Command, "unknown command: " + command_line);
    if (!r.ok()) throw Error(ErrorCode::Command, std::string(to_string(r.status)) + ": " + command_line);
    return r.bytes_result(0);
}

} // namespace attacksim
