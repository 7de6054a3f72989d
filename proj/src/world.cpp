#include "attacksim/world.hpp"

#include "attacksim/actions.hpp"
#include "attacksim/error.hpp"

#include <algorithm>
#include <chrono>
#include <queue>
#include <thread>

namespace attacksim {

std::string_view to_string(SegmentKind kind) {
    switch (kind) {
    case SegmentKind::Hub: return "hub";
    case SegmentKind::Switch: return "switch";
    case SegmentKind::Vlan: return "vlan";
    case SegmentKind::Dialup: return "dialup";
    }
    return "?";
}

std::optional<SegmentKind> segment_kind_from_string(std::string_view name) {
    for (auto k : {SegmentKind::Hub, SegmentKind::Switch, SegmentKind::Vlan, SegmentKind::Dialup})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

std::string_view to_string(Proto proto) {
    switch (proto) {
    case Proto::Tcp: return "tcp";
    case Proto::Udp: return "udp";
    case Proto::Icmp: return "icmp";
    }
    return "?";
}

std::string_view to_string(MachineState state) {
    switch (state) {
    case MachineState::Up: return "up";
    case MachineState::Crashed: return "crashed";
    case MachineState::Rebooting: return "rebooting";
    }
    return "?";
}

std::string_view to_string(Privilege p) { return p == Privilege::Root ? "root" : "user"; }

std::string_view to_string(ChannelKind kind) {
    switch (kind) {
    case ChannelKind::ConnectToTarget: return "connect-to-target";
    case ChannelKind::ConnectFromTarget: return "connect-from-target";
    case ChannelKind::ReuseConnection: return "reuse-connection";
    case ChannelKind::HttpTunnel: return "http-tunnel";
    case ChannelKind::Local: return "local";
    }
    return "?";
}

std::optional<ChannelKind> channel_kind_from_string(std::string_view name) {
    for (auto k : {ChannelKind::ConnectToTarget, ChannelKind::ConnectFromTarget, ChannelKind::ReuseConnection,
                   ChannelKind::HttpTunnel, ChannelKind::Local})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

std::string_view to_string(EventCategory category) {
    switch (category) {
    case EventCategory::Asset: return "asset";
    case EventCategory::Noise: return "noise";
    case EventCategory::Agent: return "agent";
    case EventCategory::MachineState: return "machine-state";
    case EventCategory::ActionResult: return "action-result";
    }
    return "?";
}

nlohmann::json to_json(const EventRecord& record) {
    return {{"seq", record.seq}, {"time", record.time}, {"category", to_string(record.category)}, {"payload", record.payload}};
}

bool FilterRule::matches(FilterDirection dir, Ipv4 src, Ipv4 dst, Proto p, std::uint16_t port) const {
    if (direction != FilterDirection::Any && direction != dir) return false;
    if (!source.contains(src) || !destination.contains(dst)) return false;
    if (proto && *proto != p) return false;
    bool full_range = port_lo == 0 && port_hi == 65535;
    if (p == Proto::Icmp) return full_range;
    return port >= port_lo && port <= port_hi;
}

bool Machine::has_address(Ipv4 address) const {
    for (const auto& i : interfaces)
        if (i.address == address) return true;
    return false;
}

int Machine::lowest_free_fd() const {
    int fd = 3;
    for (const auto& [used, d] : fds) {
        if (used > fd) break;
        if (used == fd) ++fd;
    }
    return fd;
}

void CommandQueue::push(Command c) {
    std::lock_guard lock(mu_);
    commands_.push_back(std::move(c));
    if (sleeping_) ++lost_;
}

std::vector<CommandQueue::Command> CommandQueue::drain() {
    std::lock_guard lock(mu_);
    std::vector<Command> out(std::make_move_iterator(commands_.begin()), std::make_move_iterator(commands_.end()));
    commands_.clear();
    return out;
}

bool CommandQueue::empty() const {
    std::lock_guard lock(mu_);
    return commands_.empty();
}

void CommandQueue::set_sleeping(bool sleeping) {
    std::lock_guard lock(mu_);
    sleeping_ = sleeping;
}

std::uint64_t CommandQueue::take_lost() {
    std::lock_guard lock(mu_);
    return std::exchange(lost_, 0);
}

World::World(std::uint64_t seed, WorldOptions options)
    : seed_(seed),
      options_(std::move(options)),
      rng_(seed),
      cache_(std::make_unique<FileCache>(options_.cache_capacity)),
      sleeper_([](double ms) { std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms)); }) {
    options_.scheduler.validate();
    library_ = std::make_shared<ActionLibrary>(ActionLibrary::builtin());
}

World::~World() {
    // coroutine frames reference the world; destroy them before the rest
    scheduler_ = Scheduler();
    actions_.clear();
}

SegmentId World::add_segment(std::string name, SegmentKind kind, Cidr prefix) {
    if (segment_named(name)) throw Error(ErrorCode::Validation, "duplicate segment '" + name + "'");
    SegmentId id = static_cast<SegmentId>(segments_.size() + 1);
    segments_[id] = Segment{id, std::move(name), kind, prefix, {}};
    return id;
}

MachineId World::add_machine(MachineSpec spec) {
    MachineId id = static_cast<MachineId>(machines_.size() + 1);
    Machine m;
    m.id = id;
    m.name = std::move(spec.name);
    m.profile = std::move(spec.profile);
    m.roles = spec.roles;
    m.filters = std::move(spec.filters);
    m.users = std::move(spec.users);
    m.template_id = std::move(spec.template_id);
    for (const auto& [address, segment] : spec.interfaces) {
        auto s = segments_.find(segment);
        if (s == segments_.end()) throw Error(ErrorCode::Validation, m.name + ": unknown segment");
        if (address_index_.count(address.value()))
            throw Error(ErrorCode::Validation, m.name + ": duplicate address " + address.to_string());
        if (!s->second.prefix.contains(address))
            throw Error(ErrorCode::Validation,
                        m.name + ": address " + address.to_string() + " outside segment " + s->second.name);
        if (s->second.kind == SegmentKind::Dialup && s->second.attached.size() >= 2)
            throw Error(ErrorCode::Validation, "dialup segment " + s->second.name + " joins at most two machines");
        m.interfaces.push_back({address, segment});
    }
    std::set<std::uint16_t> ports;
    for (const auto& app : m.profile.applications)
        for (auto port : app.ports)
            if (!ports.insert(port).second)
                throw Error(ErrorCode::Validation, m.name + ": port " + std::to_string(port) + " used twice");
    std::shared_ptr<const TemplateFS> base;
    if (!m.template_id.empty()) {
        base = find_template(m.template_id);
        if (!base) throw Error(ErrorCode::Validation, m.name + ": unknown template '" + m.template_id + "'");
    }
    m.fs = MachineFS(base, cache_.get());
    m.apps.resize(m.profile.applications.size());
    for (const auto& i : m.interfaces) {
        address_index_[i.address.value()] = id;
        segments_[i.segment].attached.push_back(id);
    }
    machines_.emplace(id, std::move(m));
    return id;
}

void World::add_template(std::shared_ptr<const TemplateFS> fs) {
    if (templates_.count(fs->id())) throw Error(ErrorCode::Validation, "duplicate template '" + fs->id() + "'");
    templates_[fs->id()] = std::move(fs);
}

std::shared_ptr<const TemplateFS> World::find_template(const std::string& id) const {
    auto it = templates_.find(id);
    return it == templates_.end() ? nullptr : it->second;
}

void World::set_action_library(std::shared_ptr<const ActionLibrary> library) { library_ = std::move(library); }
const ActionLibrary& World::actions() const { return *library_; }

AgentId World::create_local_agent(MachineId id) {
    auto& m = machine(id);
    if (local_agent_ != kNoAgent) throw Error(ErrorCode::Validation, "local agent already exists");
    Agent a;
    a.id = next_agent_++;
    a.machine = id;
    a.privilege = Privilege::Root;
    a.channel.kind = ChannelKind::Local;
    a.process = create_process(id, "agent");
    m.processes[a.process].agent = a.id;
    local_agent_ = a.id;
    env_.set_owner(a.id);
    agents_[a.id] = a;
    assert_asset(Asset{AssetKind::AgentPresence,
                       {{"host", m.primary().to_string()}, {"agent", std::to_string(a.id)}, {"privilege", "root"}},
                       1.0});
    return a.id;
}

Machine& World::machine(MachineId id) {
    auto it = machines_.find(id);
    if (it == machines_.end()) throw Error(ErrorCode::Lookup, "unknown machine " + std::to_string(id));
    return it->second;
}

const Machine& World::machine(MachineId id) const { return const_cast<World*>(this)->machine(id); }

Machine* World::machine_at(Ipv4 address) {
    auto it = address_index_.find(address.value());
    return it == address_index_.end() ? nullptr : &machines_.at(it->second);
}

const Machine* World::machine_at(Ipv4 address) const { return const_cast<World*>(this)->machine_at(address); }

Machine* World::machine_named(const std::string& name) {
    for (auto& [id, m] : machines_)
        if (m.name == name) return &m;
    return nullptr;
}

const Segment& World::segment(SegmentId id) const {
    auto it = segments_.find(id);
    if (it == segments_.end()) throw Error(ErrorCode::Lookup, "unknown segment " + std::to_string(id));
    return it->second;
}

std::optional<SegmentId> World::segment_named(const std::string& name) const {
    for (const auto& [id, s] : segments_)
        if (s.name == name) return id;
    return std::nullopt;
}

// ---- routing -----------------------------------------------------------

namespace {

std::optional<Verdict> first_match(const Machine& m, FilterDirection dir, Ipv4 src, Ipv4 dst, Proto proto,
                                   std::uint16_t port) {
    for (const auto& rule : m.filters)
        if (rule.matches(dir, src, dst, proto, port)) return rule.verdict;
    return std::nullopt;
}

bool denies(const Machine& m, FilterDirection dir, Ipv4 src, Ipv4 dst, Proto proto, std::uint16_t port) {
    return first_match(m, dir, src, dst, proto, port) == Verdict::Deny;
}

} // namespace

RouteResult World::route(Ipv4 source, Ipv4 destination, Proto proto, std::uint16_t port) {
    ++route_calls_;
    return route_impl(source, destination, proto, port);
}

RouteResult World::route_impl(Ipv4 source, Ipv4 destination, Proto proto, std::uint16_t port) const {
    const Machine* src = machine_at(source);
    if (!src) throw Error(ErrorCode::Addressing, "unknown source address " + source.to_string());
    RouteResult result;
    const Machine* dst = machine_at(destination);
    if (dst == src) {
        result.status = RouteResult::Status::Path;
        result.destination = src->id;
        result.egress = destination;
        return result;
    }

    // segment holding the destination
    std::optional<SegmentId> goal;
    if (dst) {
        for (const auto& i : dst->interfaces)
            if (i.address == destination) goal = i.segment;
    } else {
        for (const auto& [id, s] : segments_)
            if (s.prefix.contains(destination) && s.prefix.prefix_len() > 0) {
                goal = id;
                break;
            }
    }
    if (!goal) return result;

    // breadth-first search over segments, crossing up routers
    std::map<SegmentId, std::pair<SegmentId, MachineId>> parent;
    std::queue<SegmentId> frontier;
    std::vector<SegmentId> starts;
    for (const auto& i : src->interfaces)
        if (i.address == source) starts.push_back(i.segment);
    for (const auto& i : src->interfaces)
        if (std::find(starts.begin(), starts.end(), i.segment) == starts.end()) starts.push_back(i.segment);
    for (auto s : starts) {
        parent.emplace(s, std::make_pair(s, MachineId{0}));
        frontier.push(s);
    }
    bool found = false;
    while (!frontier.empty() && !found) {
        auto seg = frontier.front();
        frontier.pop();
        if (seg == *goal) {
            found = true;
            break;
        }
        for (auto mid : segments_.at(seg).attached) {
            const auto& router = machines_.at(mid);
            if (router.state != MachineState::Up || router.id == src->id) continue;
            bool forwards = router.roles.router || (router.roles.proxy && proto == Proto::Tcp);
            if (!forwards) continue;
            for (const auto& i : router.interfaces) {
                if (parent.count(i.segment)) continue;
                parent.emplace(i.segment, std::make_pair(seg, router.id));
                frontier.push(i.segment);
            }
        }
    }
    if (!found && !parent.count(*goal)) return result;

    for (SegmentId s = *goal;;) {
        result.segments.push_back(s);
        auto [prev, router] = parent.at(s);
        if (router == 0) break;
        result.routers.push_back(router);
        s = prev;
    }
    std::reverse(result.segments.begin(), result.segments.end());
    std::reverse(result.routers.begin(), result.routers.end());

    if (!dst) {
        result.status = RouteResult::Status::NoHost;
        return result;
    }
    result.destination = dst->id;
    result.egress = source;
    for (const auto& i : src->interfaces)
        if (i.segment == result.segments.front()) {
            result.egress = i.address;
            break;
        }
    source = result.egress;
    if (denies(*src, FilterDirection::Out, source, destination, proto, port)) {
        result.status = RouteResult::Status::Filtered;
        result.filtered_by = src->id;
        return result;
    }
    for (auto r : result.routers) {
        if (denies(machines_.at(r), FilterDirection::Forward, source, destination, proto, port)) {
            result.status = RouteResult::Status::Filtered;
            result.filtered_by = r;
            return result;
        }
    }
    if (denies(*dst, FilterDirection::In, source, destination, proto, port)) {
        result.status = RouteResult::Status::Filtered;
        result.filtered_by = dst->id;
        return result;
    }
    result.status = RouteResult::Status::Path;
    return result;
}

std::vector<std::string> World::ids_sensors_between(Ipv4 source, Ipv4 destination) {
    std::vector<std::string> sensors;
    if (!machine_at(source)) return sensors;
    auto r = route_impl(source, destination, Proto::Tcp, 0);
    std::size_t visible = r.segments.size();
    if (r.status == RouteResult::Status::Filtered) {
        if (r.filtered_by == machine_at(source)->id) {
            visible = 0;
        } else {
            auto it = std::find(r.routers.begin(), r.routers.end(), r.filtered_by);
            if (it != r.routers.end()) visible = static_cast<std::size_t>(it - r.routers.begin()) + 1;
        }
    }
    for (std::size_t i = 0; i < visible; ++i) {
        const auto& seg = segments_.at(r.segments[i]);
        for (auto mid : seg.attached) {
            const auto& m = machines_.at(mid);
            if (m.roles.ids && m.state == MachineState::Up) {
                sensors.push_back("ids@" + seg.name);
                break;
            }
        }
    }
    return sensors;
}

std::optional<OSDescriptor> World::fingerprint_response(Ipv4 address) {
    auto* m = machine_at(address);
    if (!m || m->state != MachineState::Up) return std::nullopt;
    ++m->touches;
    return m->profile.os;
}

void World::set_filters(MachineId id, std::vector<FilterRule> rules) { machine(id).filters = std::move(rules); }

// ---- machine state ---------------------------------------------------------

bool World::attacker_knows(const Machine& m) const {
    for (const auto& a : env_.all()) {
        if (a.probability <= 0) continue;
        for (const char* key : {"host", "target"}) {
            auto addr = Ipv4::parse(a.attr(key));
            if (addr && m.has_address(*addr)) return true;
        }
    }
    return false;
}

void World::machine_event(const Machine& m, const char* what) {
    if (!attacker_knows(m)) return;
    emit(EventCategory::MachineState, {{"host", m.primary().to_string()}, {"state", what}});
}

void World::crash_machine(MachineId id) {
    auto& m = machine(id);
    if (m.state == MachineState::Crashed) return;
    std::vector<ProcessId> processes;
    for (const auto& [pid, p] : m.processes) processes.push_back(pid);
    kill_agents_on(id);
    for (auto pid : processes) kill_process(id, pid);
    std::vector<int> fds;
    for (const auto& [fd, d] : m.fds) fds.push_back(fd);
    for (auto fd : fds) close_descriptor(m, fd, true);
    m.bindings.clear();
    for (auto& app : m.apps) app.process = 0;
    m.state = MachineState::Crashed;
    machine_event(m, "crashed");
}

void World::reset_machine(MachineId id) {
    crash_machine(id);
    auto& m = machine(id);
    m.state = MachineState::Rebooting;
    timers_.insert(Timer{now_ + options_.reboot_ms, next_timer_++, id});
    machine_event(m, "rebooting");
}

namespace {

std::size_t app_index(const Machine& m, const std::string& app) {
    for (std::size_t i = 0; i < m.profile.applications.size(); ++i)
        if (m.profile.applications[i].name == app) return i;
    throw Error(ErrorCode::Lookup, m.name + " has no application '" + app + "'");
}

} // namespace

void World::crash_application(MachineId id, const std::string& app) {
    auto& m = machine(id);
    auto index = app_index(m, app);
    auto& rt = m.apps[index];
    if (rt.process) {
        kill_agents_on(id, rt.process);
        kill_process(id, rt.process);
    }
    rt.process = 0;
    rt.crashed = true;
}

void World::reset_application(MachineId id, const std::string& app) {
    auto& m = machine(id);
    auto index = app_index(m, app);
    crash_application(id, app);
    // restarted lazily on the next connection
    m.apps[index].crashed = false;
}

void World::fire_timers() {
    while (!timers_.empty() && timers_.begin()->at <= now_) {
        auto t = *timers_.begin();
        timers_.erase(timers_.begin());
        auto& m = machine(t.machine);
        if (m.state != MachineState::Rebooting) continue;
        m.state = MachineState::Up;
        for (auto& app : m.apps) app = AppRuntime{};
        machine_event(m, "up");
    }
}

// ---- knowledge and events ----------------------------------------------

void World::assert_asset(const Asset& asset) {
    env_.assert_asset(asset);
    emit(EventCategory::Asset, to_json(asset));
}

const NoiseEvent& World::record_noise(NoiseEvent event) {
    event.timestamp = now_;
    const auto& stored = noise_.record(std::move(event));
    emit(EventCategory::Noise, to_json(stored));
    return stored;
}

std::vector<NoiseEvent> World::cleanup(AgentId agent) {
    live_agent(agent);
    return noise_.cleanup(agent);
}

void World::emit(EventCategory category, nlohmann::json payload) {
    events_.push_back(EventRecord{next_seq_++, now_, category, std::move(payload)});
}

std::vector<EventRecord> World::events_since(std::uint64_t seq) const {
    auto it = std::lower_bound(events_.begin(), events_.end(), seq,
                               [](const EventRecord& r, std::uint64_t s) { return r.seq < s; });
    return {it, events_.end()};
}

// ---- engine ------------------------------------------------------------

void World::on_fault(const ThreadInfo& thread, std::exception_ptr error) {
    for (auto& [id, inst] : actions_) {
        if (inst->done || inst->thread != thread.id) continue;
        try {
            std::rethrow_exception(error);
        } catch (const std::exception& e) {
            inst->outcome.detail["error"] = e.what();
        }
        inst->outcome.status = ActionStatus::Failure;
        finish_action(id);
        return;
    }
}

void World::reap_actions() {
    for (auto& [id, inst] : actions_) {
        if (inst->done || scheduler_.alive(inst->thread)) continue;
        inst->outcome.status = ActionStatus::Failure;
        inst->outcome.detail["error"] = "action thread terminated";
        finish_action(id);
    }
}

void World::do_idle_sleep() {
    inbox_.set_sleeping(true);
    sleeper_(options_.scheduler.sleep_ms);
    inbox_.set_sleeping(false);
    interval_.syscalls_lost_per_sleep = inbox_.take_lost();
    options_.scheduler.runs_to_sleep = adjust_runs_to_sleep(options_.scheduler, interval_);
    sleep_trace_.push_back(options_.scheduler.runs_to_sleep);
    interval_ = RunStats{};
    runs_since_sleep_ = 0;
}

bool World::step() {
    bool progressed = false;
    for (auto& command : inbox_.drain()) {
        command();
        progressed = true;
    }
    scheduler_.wake_sleepers(now_);
    fire_timers();
    if (scheduler_.has_ready()) {
        auto stats = scheduler_.run_round([this](const ThreadInfo& t, const SyscallRequest& r) { return execute(t, r); },
                                          [this](const ThreadInfo& t, std::exception_ptr e) { on_fault(t, e); });
        totals_ += stats;
        interval_ += stats;
        runs_since_sleep_ += stats.machine_runs;
        reap_actions();
        if (idle_sleep_due(options_.scheduler, runs_since_sleep_)) do_idle_sleep();
        return true;
    }
    reap_actions();
    std::optional<SimTime> next = scheduler_.next_wake();
    if (!timers_.empty() && (!next || timers_.begin()->at < *next)) next = timers_.begin()->at;
    if (!next) return progressed;
    advance_to(*next);
    return true;
}

void World::advance_to(SimTime t) {
    now_ = std::max(now_, t);
    scheduler_.wake_sleepers(now_);
    fire_timers();
}

void World::run_until(const std::function<bool()>& done, std::uint64_t max_steps) {
    for (std::uint64_t i = 0; i < max_steps && !done(); ++i)
        if (!step()) break;
}

void World::run_until_idle(std::uint64_t max_steps) {
    for (std::uint64_t i = 0; i < max_steps; ++i)
        if (!step()) break;
}

// ---- persistence ---------------------------------------------------------

nlohmann::json World::save_state() const {
    if (actions_in_flight() > 0) throw Error(ErrorCode::Busy, "cannot snapshot while actions are in flight");
    nlohmann::json machines = nlohmann::json::object();
    for (const auto& [id, m] : machines_) {
        nlohmann::json crashed = nlohmann::json::array();
        for (std::size_t i = 0; i < m.apps.size(); ++i)
            if (m.apps[i].crashed) crashed.push_back(m.profile.applications[i].name);
        machines[m.name] = {{"state", to_string(m.state)}, {"fs", m.fs.to_json()}, {"crashed_apps", crashed},
                            {"touches", m.touches}};
    }
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& [id, a] : agents_) {
        agents.push_back({{"id", a.id},
                          {"machine", machines_.at(a.machine).name},
                          {"privilege", to_string(a.privilege)},
                          {"parent", a.parent},
                          {"channel", to_string(a.channel.kind)},
                          {"port", a.channel.port},
                          {"alive", a.alive}});
    }
    nlohmann::json assets = nlohmann::json::array();
    for (const auto& a : env_.all()) assets.push_back(to_json(a));
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : events_) events.push_back(to_json(e));
    nlohmann::json timers = nlohmann::json::array();
    for (const auto& t : timers_) timers.push_back({{"at", t.at}, {"seq", t.seq}, {"machine", machines_.at(t.machine).name}});
    return {{"now", now_},
            {"rng", rng_.state()},
            {"next_agent", next_agent_},
            {"next_action", next_action_},
            {"next_seq", next_seq_},
            {"next_timer", next_timer_},
            {"local_agent", local_agent_},
            {"runs_to_sleep", options_.scheduler.runs_to_sleep},
            {"machines", machines},
            {"agents", agents},
            {"env", assets},
            {"noise", noise_.to_json()},
            {"events", events},
            {"timers", timers}};
}

void World::load_state(const nlohmann::json& state) {
    if (state.is_null() || state.empty()) return;
    now_ = state.at("now").get<SimTime>();
    rng_.restore(state.at("rng").get<std::string>());
    next_agent_ = state.at("next_agent").get<AgentId>();
    next_action_ = state.at("next_action").get<ActionInstanceId>();
    next_seq_ = state.at("next_seq").get<std::uint64_t>();
    next_timer_ = state.at("next_timer").get<std::uint64_t>();
    options_.scheduler.runs_to_sleep = state.at("runs_to_sleep").get<std::uint64_t>();

    for (auto& [id, m] : machines_) {
        const auto& s = state.at("machines").at(m.name);
        auto st = s.at("state").get<std::string>();
        m.state = st == "crashed" ? MachineState::Crashed : st == "rebooting" ? MachineState::Rebooting : MachineState::Up;
        m.fs.restore(s.at("fs"));
        m.touches = s.at("touches").get<std::uint64_t>();
        for (const auto& name : s.at("crashed_apps")) m.apps[app_index(m, name.get<std::string>())].crashed = true;
    }

    agents_.clear();
    for (auto& [id, m] : machines_) m.processes.clear();
    for (const auto& j : state.at("agents")) {
        Agent a;
        a.id = j.at("id").get<AgentId>();
        auto* m = machine_named(j.at("machine").get<std::string>());
        if (!m) throw Error(ErrorCode::Validation, "snapshot names an unknown machine");
        a.machine = m->id;
        a.privilege = j.at("privilege").get<std::string>() == "root" ? Privilege::Root : Privilege::User;
        a.parent = j.at("parent").get<AgentId>();
        a.channel.kind = channel_kind_from_string(j.at("channel").get<std::string>()).value_or(ChannelKind::ConnectToTarget);
        a.channel.port = j.at("port").get<std::uint16_t>();
        a.alive = j.at("alive").get<bool>();
        if (a.alive) {
            a.process = create_process(a.machine, "agent");
            m->processes[a.process].agent = a.id;
        }
        agents_[a.id] = a;
    }
    local_agent_ = state.at("local_agent").get<AgentId>();

    env_.clear();
    env_.set_owner(local_agent_);
    for (const auto& j : state.at("env")) env_.assert_asset(asset_from_json(j));
    noise_.restore(state.at("noise"));
    events_.clear();
    for (const auto& j : state.at("events")) {
        EventRecord r;
        r.seq = j.at("seq").get<std::uint64_t>();
        r.time = j.at("time").get<SimTime>();
        auto c = j.at("category").get<std::string>();
        for (auto k : {EventCategory::Asset, EventCategory::Noise, EventCategory::Agent, EventCategory::MachineState,
                       EventCategory::ActionResult})
            if (to_string(k) == c) r.category = k;
        r.payload = j.at("payload");
        events_.push_back(std::move(r));
    }
    timers_.clear();
    for (const auto& j : state.at("timers")) {
        auto* m = machine_named(j.at("machine").get<std::string>());
        if (!m) throw Error(ErrorCode::Validation, "snapshot timer names an unknown machine");
        timers_.insert(Timer{j.at("at").get<SimTime>(), j.at("seq").get<std::uint64_t>(), m->id});
    }
}

} // namespace attacksim
