#pragma once

// The simulated world: machines, segments, routing, the descriptor table and
// kernel, agents, the attacker's environment knowledge, noise and events,
// plus the engine loop that drives the scheduler on a simulated clock.

#include "attacksim/exploitdb.hpp"
#include "attacksim/host.hpp"
#include "attacksim/ipv4.hpp"
#include "attacksim/model.hpp"
#include "attacksim/rng.hpp"
#include "attacksim/sched.hpp"
#include "attacksim/signatures.hpp"
#include "attacksim/syscall.hpp"
#include "attacksim/types.hpp"
#include "attacksim/vfs.hpp"

#include "json.hpp"

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace attacksim {

/// In-band strings: an exploit sent to an application, and the greeting an
/// installed agent writes back on the reused connection.
inline constexpr std::string_view kExploitMagic = "\x7f" "EXPLOIT ";
inline constexpr std::string_view kAgentGreeting = "\x7f" "AGENT ";

class ActionLibrary;
struct ActionInstance;
class BridgeSink;

enum class SegmentKind { Hub, Switch, Vlan, Dialup };
std::string_view to_string(SegmentKind kind);
std::optional<SegmentKind> segment_kind_from_string(std::string_view name);

struct Segment {
    SegmentId id = 0;
    std::string name;
    SegmentKind kind = SegmentKind::Switch;
    Cidr prefix;
    std::vector<MachineId> attached;
};

struct Interface {
    Ipv4 address;
    SegmentId segment = 0;
};

enum class Proto { Tcp, Udp, Icmp };
std::string_view to_string(Proto proto);

enum class FilterDirection { In, Out, Forward, Any };
enum class Verdict { Allow, Deny };

struct FilterRule {
    FilterDirection direction = FilterDirection::Any;
    Cidr source = Cidr::any();
    Cidr destination = Cidr::any();
    std::uint16_t port_lo = 0;
    std::uint16_t port_hi = 65535;
    std::optional<Proto> proto;
    Verdict verdict = Verdict::Deny;

    /// Port windows narrower than the full range never match ICMP.
    bool matches(FilterDirection dir, Ipv4 src, Ipv4 dst, Proto p, std::uint16_t port) const;
};

struct RoleFlags {
    bool router = false;
    bool firewall = false;
    bool ids = false;
    bool proxy = false;
    bool workstation = false;
    bool server = false;
};

enum class MachineState { Up, Crashed, Rebooting };
std::string_view to_string(MachineState state);

enum class DescriptorKind { SocketDirect, SocketReal, File };
enum class SocketState { Closed, Bound, Listening, Connected };

struct Pcb {
    Ipv4 local;
    std::uint16_t local_port = 0;
    Ipv4 remote;
    std::uint16_t remote_port = 0;
    Proto proto = Proto::Tcp;
    ProcessId owner = 0;
};

class Descriptor {
public:
    virtual ~Descriptor() = default;
    virtual DescriptorKind kind() const = 0;

    int fd = -1;
    MachineId machine = 0;
    ProcessId owner = 0;
    std::set<ThreadId> waiters;
};

struct Datagram {
    std::string data;
    Ipv4 from;
    std::uint16_t from_port = 0;
};

class Socket : public Descriptor {
public:
    Proto proto = Proto::Tcp;
    SocketState state = SocketState::Closed;
    std::optional<Pcb> pcb;
    std::string rx;
    std::deque<Datagram> datagrams;
    bool peer_closed = false;
    bool reset = false;
    /// Kept open as an agent channel even when its owner closes it.
    bool pinned = false;
    std::deque<std::shared_ptr<Socket>> backlog;
    /// Index of the application owning this socket, if any.
    std::optional<std::size_t> app;
    /// Set on the sending side when an exploit string reached an application.
    std::optional<Resolution> exploit_report;
};

/// Simulated socket whose peer is another simulated socket. Data is appended
/// straight into the peer's buffer; routing was settled at connect time.
class SocketDirect final : public Socket {
public:
    DescriptorKind kind() const override { return DescriptorKind::SocketDirect; }
    std::weak_ptr<SocketDirect> peer;
};

/// Simulated endpoint of a connection bridged to a real host socket.
class SocketReal final : public Socket {
public:
    DescriptorKind kind() const override { return DescriptorKind::SocketReal; }
    std::uint64_t connection = 0;
    BridgeSink* sink = nullptr;
};

class FileDescriptor final : public Descriptor {
public:
    DescriptorKind kind() const override { return DescriptorKind::File; }
    std::string path;
    std::size_t offset = 0;
    bool writable = false;
};

struct Process {
    ProcessId id = 0;
    std::string name;
    std::optional<std::size_t> app;
    AgentId agent = kNoAgent;
};

struct AppRuntime {
    bool crashed = false;
    ProcessId process = 0;  // 0 until a connection materializes the service
};

struct Machine {
    MachineId id = 0;
    std::string name;
    HostProfile profile;
    std::vector<Interface> interfaces;
    RoleFlags roles;
    std::vector<FilterRule> filters;
    std::vector<std::string> users;
    std::string template_id;
    MachineFS fs;
    MachineState state = MachineState::Up;

    std::map<int, std::shared_ptr<Descriptor>> fds;
    std::map<std::pair<Proto, std::uint16_t>, std::shared_ptr<Socket>> bindings;
    std::map<ProcessId, Process> processes;
    std::vector<AppRuntime> apps;
    std::uint16_t next_ephemeral = 49152;
    /// Inbound probes and connections; stays 0 for machines never examined.
    std::uint64_t touches = 0;

    Ipv4 primary() const { return interfaces.empty() ? Ipv4() : interfaces.front().address; }
    bool has_address(Ipv4 address) const;
    int lowest_free_fd() const;
};

struct MachineSpec {
    std::string name;
    HostProfile profile;
    std::vector<std::pair<Ipv4, SegmentId>> interfaces;
    RoleFlags roles;
    std::vector<FilterRule> filters;
    std::vector<std::string> users;
    std::string template_id;
};

struct RouteResult {
    enum class Status { Path, Unreachable, NoHost, Filtered } status = Status::Unreachable;
    /// Segments traversed in order; routers[i] joins segments[i] and segments[i+1].
    std::vector<SegmentId> segments;
    std::vector<MachineId> routers;
    MachineId destination = 0;
    /// Source interface address the traffic leaves from.
    Ipv4 egress;
    /// Machine whose rule denied the traffic.
    MachineId filtered_by = 0;

    bool ok() const { return status == Status::Path; }
};

enum class Privilege { User, Root };
std::string_view to_string(Privilege p);

enum class ChannelKind { ConnectToTarget, ConnectFromTarget, ReuseConnection, HttpTunnel, Local };
std::string_view to_string(ChannelKind kind);
std::optional<ChannelKind> channel_kind_from_string(std::string_view name);

struct ConnectionMethod {
    ChannelKind kind = ChannelKind::ConnectToTarget;
    std::uint16_t port = 4444;
    /// Connected socket on the target machine, for ReuseConnection.
    int reuse_fd = -1;
};

struct Agent {
    AgentId id = kNoAgent;
    MachineId machine = 0;
    Privilege privilege = Privilege::User;
    AgentId parent = kNoAgent;
    ConnectionMethod channel;
    bool alive = true;
    ProcessId process = 0;
};

enum class EventCategory { Asset, Noise, Agent, MachineState, ActionResult };
std::string_view to_string(EventCategory category);

struct EventRecord {
    std::uint64_t seq = 0;
    SimTime time = 0;
    EventCategory category = EventCategory::Asset;
    nlohmann::json payload;
};

nlohmann::json to_json(const EventRecord& record);

struct WorldOptions {
    SchedulerConfig scheduler;
    SimTime filtered_timeout_ms = 3000;
    SimTime reboot_ms = 5000;
    double fingerprint_accuracy = 0.9;
    std::size_t cache_capacity = 1024;
};

/// Timers that outlive a single thread. Only reboot completion for now.
struct Timer {
    SimTime at = 0;
    std::uint64_t seq = 0;
    MachineId machine = 0;

    friend auto operator<=>(const Timer&, const Timer&) = default;
};

/// Thread-safe inbox drained by the engine at round boundaries.
class CommandQueue {
public:
    using Command = std::function<void()>;

    void push(Command c);
    std::vector<Command> drain();
    bool empty() const;
    /// Counts pushes while `sleeping` is set; reset by take_lost().
    void set_sleeping(bool sleeping);
    std::uint64_t take_lost();

private:
    mutable std::mutex mu_;
    std::deque<Command> commands_;
    bool sleeping_ = false;
    std::uint64_t lost_ = 0;
};

class World {
public:
    explicit World(std::uint64_t seed = 0, WorldOptions options = {});
    ~World();
    World(const World&) = delete;
    World& operator=(const World&) = delete;

    // ---- construction -------------------------------------------------
    SegmentId add_segment(std::string name, SegmentKind kind, Cidr prefix);
    MachineId add_machine(MachineSpec spec);
    void add_template(std::shared_ptr<const TemplateFS> fs);
    std::shared_ptr<const TemplateFS> find_template(const std::string& id) const;
    VulnDb& vulndb() { return vulndb_; }
    const VulnDb& vulndb() const { return vulndb_; }
    SignatureDb& signatures() { return signatures_; }
    const SignatureDb& signatures() const { return signatures_; }
    void set_action_library(std::shared_ptr<const ActionLibrary> library);
    const ActionLibrary& actions() const;

    /// Creates the root agent on the attacker host and seeds the
    /// environment with its AgentPresence asset.
    AgentId create_local_agent(MachineId machine);

    // ---- lookup -------------------------------------------------------
    Machine& machine(MachineId id);
    const Machine& machine(MachineId id) const;
    Machine* machine_at(Ipv4 address);
    const Machine* machine_at(Ipv4 address) const;
    Machine* machine_named(const std::string& name);
    const std::map<MachineId, Machine>& machines() const { return machines_; }
    const Segment& segment(SegmentId id) const;
    const std::map<SegmentId, Segment>& segments() const { return segments_; }
    std::optional<SegmentId> segment_named(const std::string& name) const;

    const WorldOptions& options() const { return options_; }
    WorldOptions& options() { return options_; }
    std::uint64_t seed() const { return seed_; }
    SimTime now() const { return now_; }
    SeededRng& rng() { return rng_; }
    Scheduler& scheduler() { return scheduler_; }
    FileCache& file_cache() { return *cache_; }

    // ---- netsim -------------------------------------------------------
    /// Counted: every call increments route_calls().
    RouteResult route(Ipv4 source, Ipv4 destination, Proto proto = Proto::Tcp, std::uint16_t port = 0);
    std::uint64_t route_calls() const { return route_calls_; }
    std::uint64_t connections_established() const { return connections_; }

    void crash_machine(MachineId id);
    void reset_machine(MachineId id);
    void crash_application(MachineId id, const std::string& app);
    void reset_application(MachineId id, const std::string& app);

    /// Mutates filter rules in place; existing connections are unaffected.
    void set_filters(MachineId id, std::vector<FilterRule> rules);

    /// Machine OS as revealed to a fingerprinting probe; touches the target.
    std::optional<OSDescriptor> fingerprint_response(Ipv4 address);

    /// IDS sensor ids watching the segments between two addresses. Does not
    /// count as a route call.
    std::vector<std::string> ids_sensors_between(Ipv4 source, Ipv4 destination);

    // ---- kernel -------------------------------------------------------
    ExecResult execute(const ThreadInfo& thread, const SyscallRequest& request);
    /// Runs a syscall outside any simulated thread; calls that would block
    /// return WouldBlock and sleeps complete immediately.
    SyscallResponse syscall_now(MachineId machine, ProcessId process, const SyscallRequest& request);

    ProcessId create_process(MachineId machine, std::string name, std::optional<std::size_t> app = std::nullopt);
    ThreadId spawn(MachineId machine, ProcessId process, SimTask task);
    void kill_process(MachineId machine, ProcessId process, bool reset_peers = true);

    /// Exploit resolution recorded on a client socket, consumed once.
    std::optional<Resolution> take_exploit_report(MachineId machine, int fd);

    /// Socket bridged from a real connection; delivered to the simulated
    /// listener on (address, port). Returns the descriptor or nullptr when
    /// nothing listens there.

    std::shared_ptr<SocketReal> accept_real(Ipv4 address, std::uint16_t port, std::uint64_t connection, BridgeSink* sink);
    void real_data(const std::shared_ptr<SocketReal>& socket, std::string data);
    void real_closed(const std::shared_ptr<SocketReal>& socket);

    // ---- agents -------------------------------------------------------
    AgentId install_agent(MachineId machine, const ConnectionMethod& method, AgentId parent,
                          Privilege privilege = Privilege::User, ProcessId in_process = 0);
    const Agent& agent(AgentId id) const;
    Agent& agent_mut(AgentId id);
    const std::map<AgentId, Agent>& agents() const { return agents_; }
    AgentId local_agent() const { return local_agent_; }
    bool agent_alive(AgentId id) const;
    /// Throws DeadAgent when missing or dead.
    const Agent& live_agent(AgentId id) const;
    /// Path of agents from the local agent down to `id`.
    std::vector<AgentId> chain_to(AgentId id) const;
    void set_privilege(AgentId id, Privilege privilege);

    /// Forwards an encoded request hop by hop and executes it on the last
    /// agent's machine. Throws ChainBrokenError at the first dead hop.
    SyscallResponse proxy_syscall(const std::vector<AgentId>& chain, const SyscallRequest& request);
    std::string agent_shell(AgentId agent, const std::string& command_line);

    // ---- attacker knowledge ---------------------------------------------
    const EnvironmentKnowledge& env() const { return env_; }
    void assert_asset(const Asset& asset);
    NoiseLog& noise() { return noise_; }
    const NoiseLog& noise() const { return noise_; }
    const NoiseEvent& record_noise(NoiseEvent event);
    std::vector<NoiseEvent> cleanup(AgentId agent);

    const std::vector<EventRecord>& events() const { return events_; }
    std::vector<EventRecord> events_since(std::uint64_t seq) const;
    void emit(EventCategory category, nlohmann::json payload);

    // ---- actions ------------------------------------------------------
    /// Validates and starts an action. Satisfied goals complete at once
    /// with zero cost; otherwise a simulated thread runs on the agent's
    /// machine and the outcome arrives as an action-result event.
    ActionInstanceId start_action(AgentId agent, const std::string& name, const Params& params, RequestId request = 0);
    Cost estimate(AgentId agent, const std::string& name, const Params& params) const;
    const ActionOutcome* action_outcome(ActionInstanceId id) const;
    bool action_done(ActionInstanceId id) const;
    bool action_known(ActionInstanceId id) const { return actions_.count(id) != 0; }
    std::size_t actions_in_flight() const;

    /// Runs the engine until the action completes (or nothing can progress).
    ActionOutcome run_action(AgentId agent, const std::string& name, const Params& params);

    // ---- engine -------------------------------------------------------
    CommandQueue& inbox() { return inbox_; }
    /// Injectable wall-clock sleeper (default sleeps the calling thread).
    void set_sleeper(std::function<void(double ms)> sleeper) { sleeper_ = std::move(sleeper); }
    /// One engine step: drain commands, then run a round or jump the clock
    /// to the next timer. Returns false when nothing can progress.
    bool step();
    void run_until(const std::function<bool()>& done, std::uint64_t max_steps = UINT64_MAX);
    void run_until_idle(std::uint64_t max_steps = UINT64_MAX);
    void advance_to(SimTime t);

    const RunStats& totals() const { return totals_; }
    std::uint64_t runs_to_sleep() const { return options_.scheduler.runs_to_sleep; }
    /// runs_to_sleep after each idle sleep, for adaptation traces.
    const std::vector<std::uint64_t>& sleep_trace() const { return sleep_trace_; }
    std::uint64_t sleeps() const { return sleep_trace_.size(); }

    // ---- persistence --------------------------------------------------
    /// Dynamic state on top of the scenario document: clock, generator,
    /// id counters, knowledge, agents, machine states, filesystems, noise,
    /// events and timers. Open sockets and threads are not saved. Throws
    /// Busy while actions are in flight.
    nlohmann::json save_state() const;
    void load_state(const nlohmann::json& state);

    /// Scenario document this world was loaded from, kept for snapshots.
    nlohmann::json& scenario_doc() { return scenario_doc_; }
    const nlohmann::json& scenario_doc() const { return scenario_doc_; }

private:
    friend struct Kernel;
    friend struct ActionRunner;

    RouteResult route_impl(Ipv4 source, Ipv4 destination, Proto proto, std::uint16_t port) const;
    /// Listening socket on (machine, port), starting the owning service on demand.
    std::shared_ptr<Socket> find_listener(Machine& target, std::uint16_t port);
    void materialize(Machine& target, std::size_t app);
    void fire_timers();
    void wake_all(Descriptor& d);
    void close_descriptor(Machine& m, int fd, bool reset_peer);
    void kill_agents_on(MachineId machine, std::optional<ProcessId> process = std::nullopt);
    void kill_agent_subtree(AgentId id);
    void machine_event(const Machine& m, const char* what);
    bool attacker_knows(const Machine& m) const;
    void do_idle_sleep();
    void finish_action(ActionInstanceId id);
    void reap_actions();
    void on_fault(const ThreadInfo& thread, std::exception_ptr error);

    std::uint64_t seed_;
    WorldOptions options_;
    SeededRng rng_;
    SimTime now_ = 0;
    Scheduler scheduler_;
    std::unique_ptr<FileCache> cache_;

    std::map<SegmentId, Segment> segments_;
    std::map<MachineId, Machine> machines_;
    std::map<std::uint32_t, MachineId> address_index_;
    std::map<std::string, std::shared_ptr<const TemplateFS>> templates_;
    VulnDb vulndb_;
    SignatureDb signatures_;
    std::shared_ptr<const ActionLibrary> library_;

    std::map<AgentId, Agent> agents_;
    AgentId local_agent_ = kNoAgent;
    AgentId next_agent_ = 1;
    ProcessId next_process_ = 1;

    EnvironmentKnowledge env_;
    NoiseLog noise_;
    std::vector<EventRecord> events_;
    std::uint64_t next_seq_ = 1;

    std::map<ActionInstanceId, std::unique_ptr<ActionInstance>> actions_;
    ActionInstanceId next_action_ = 1;

    std::set<Timer> timers_;
    std::uint64_t next_timer_ = 1;

    CommandQueue inbox_;
    std::function<void(double)> sleeper_;
    RunStats totals_;
    RunStats interval_;
    std::uint64_t runs_since_sleep_ = 0;
    std::vector<std::uint64_t> sleep_trace_;

    std::uint64_t route_calls_ = 0;
    std::uint64_t connections_ = 0;
    nlohmann::json scenario_doc_;
};

} // namespace attacksim
