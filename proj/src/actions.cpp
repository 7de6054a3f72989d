#include "attacksim/actions.hpp"

#include "attacksim/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace attacksim {

// ---- parameters --------------------------------------------------------

namespace {

constexpr std::uint64_t kMaxRange = 65536;
constexpr int kPollTries = 10;
constexpr std::int64_t kPollMs = 100;

std::optional<long> parse_long(std::string_view text) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

Ipv4 host_param(const Params& p, const std::string& name = "host") {
    auto it = p.find(name);
    auto addr = it == p.end() ? std::nullopt : Ipv4::parse(it->second);
    if (!addr) throw Error(ErrorCode::Parameter, name + " must be an IPv4 address");
    return *addr;
}

std::uint16_t port_param(const Params& p) {
    auto it = p.find("port");
    auto v = it == p.end() ? std::nullopt : parse_long(it->second);
    if (!v || *v < 1 || *v > 65535) throw Error(ErrorCode::Parameter, "port must lie in 1-65535");
    return static_cast<std::uint16_t>(*v);
}

const VulnerabilityEntry& vuln_param(const World& w, const Params& p, bool local) {
    auto it = p.find("vuln");
    const auto* entry = it == p.end() ? nullptr : w.vulndb().find(it->second);
    if (!entry) throw Error(ErrorCode::NotFound, "unknown vulnerability '" + (it == p.end() ? "" : it->second) + "'");
    if (entry->local != local)
        throw Error(ErrorCode::Parameter, entry->id + (local ? " is not a local exploit" : " is a local exploit"));
    return *entry;
}

bool has_asset(const EnvironmentKnowledge& env, AssetKind kind, Attributes identity) {
    return env.find(AssetKey{kind, std::move(identity)}) != nullptr;
}

} // namespace

std::vector<Ipv4> expand_range(const std::string& range) {
    std::uint32_t lo = 0, hi = 0;
    if (auto dash = range.find('-'); dash != std::string::npos) {
        auto a = Ipv4::parse(range.substr(0, dash));
        auto b = Ipv4::parse(range.substr(dash + 1));
        if (!a || !b) throw Error(ErrorCode::Parameter, "bad address range '" + range + "'");
        lo = a->value();
        hi = b->value();
        if (lo > hi) throw Error(ErrorCode::Parameter, "empty address range '" + range + "'");
    } else if (range.find('/') != std::string::npos) {
        auto c = Cidr::parse(range);
        if (!c) throw Error(ErrorCode::Parameter, "bad address block '" + range + "'");
        if (c->host_count() == 0) throw Error(ErrorCode::Parameter, "empty address block '" + range + "'");
        if (c->host_count() > kMaxRange) throw Error(ErrorCode::Parameter, "range above 65536 addresses");
        std::vector<Ipv4> out;
        for (std::uint64_t i = 0; i < c->host_count(); ++i) out.push_back(c->host(i));
        return out;
    } else {
        auto a = Ipv4::parse(range);
        if (!a) throw Error(ErrorCode::Parameter, "bad address '" + range + "'");
        lo = hi = a->value();
    }
    if (std::uint64_t{hi} - lo + 1 > kMaxRange) throw Error(ErrorCode::Parameter, "range above 65536 addresses");
    std::vector<Ipv4> out;
    for (std::uint64_t v = lo; v <= hi; ++v) out.emplace_back(static_cast<std::uint32_t>(v));
    return out;
}

std::vector<std::uint16_t> expand_ports(const std::string& ports) {
    std::vector<std::uint16_t> out;
    std::set<std::uint16_t> seen;
    std::stringstream in(ports);
    for (std::string item; std::getline(in, item, ',');) {
        auto dash = item.find('-');
        auto lo = parse_long(item.substr(0, dash));
        auto hi = dash == std::string::npos ? lo : parse_long(item.substr(dash + 1));
        if (!lo || !hi || *lo < 1 || *hi > 65535 || *lo > *hi)
            throw Error(ErrorCode::Parameter, "bad port list '" + ports + "'");
        for (long p = *lo; p <= *hi; ++p)
            if (seen.insert(static_cast<std::uint16_t>(p)).second) out.push_back(static_cast<std::uint16_t>(p));
    }
    if (out.empty()) throw Error(ErrorCode::Parameter, "empty port list");
    return out;
}

double agent_chance(const VulnerabilityEntry& entry) {
    for (const auto& result : entry.results) {
        double reach = 1.0;
        for (const auto& d : result.draws) {
            if (d.chance <= 0) continue;
            if (d.kind == DrawKind::Agent) return reach * d.chance;
            if (d.kind == DrawKind::Crash || d.kind == DrawKind::Reset) reach *= 1.0 - d.chance;
        }
    }
    return 0.0;
}

// ---- context -------------------------------------------------------------

const std::string& ActionContext::param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw Error(ErrorCode::Parameter, "missing parameter '" + name + "'");
    return it->second;
}

void ActionContext::produce(Asset asset) {
    world.assert_asset(asset);
    outcome.produced_assets.push_back(std::move(asset));
}

void ActionContext::make_noise(SensorScope scope, NoiseCategory category, double magnitude, Ipv4 target) {
    std::vector<std::string> sensors;
    switch (scope) {
    case SensorScope::PathIds: sensors = world.ids_sensors_between(source, target); break;
    case SensorScope::PathFirewall: {
        auto r = world.route(source, target);
        for (auto router : r.routers)
            if (world.machine(router).roles.firewall) sensors.push_back("fw@" + world.machine(router).name);
        break;
    }
    case SensorScope::TargetLog: sensors.push_back("log@" + target.to_string()); break;
    case SensorScope::LocalLog: sensors.push_back("log@" + source.to_string()); break;
    }
    for (auto& sensor : sensors) {
        NoiseEvent e;
        e.sensor = std::move(sensor);
        e.category = category;
        e.magnitude = magnitude;
        e.action = id;
        e.agent = agent;
        outcome.noise_events.push_back(world.record_noise(std::move(e)));
    }
}

// ---- bodies --------------------------------------------------------------

namespace {

Asset ip_asset(const std::string& source, const std::string& target, double p) {
    return Asset{AssetKind::IPConnectivity, {{"source", source}, {"target", target}}, p};
}

Asset tcp_asset(const std::string& source, const std::string& target, std::uint16_t port, double p) {
    return Asset{AssetKind::TCPConnectivity, {{"source", source}, {"target", target}, {"port", std::to_string(port)}}, p};
}

Task<SysStatus> probe_tcp(Ipv4 target, std::uint16_t port) {
    auto s = co_await syscall(sys::socket(sys::kTcp));
    if (!s.ok()) co_return s.status;
    auto fd = s.int_result(0);
    auto r = co_await syscall(sys::connect(fd, target.to_string(), port));
    co_await syscall(sys::close(fd));
    co_return r.status;
}

double mechanism_factor(const std::string& mechanism) {
    if (mechanism == "icmp") return 1.0;
    if (mechanism == "arp") return 0.5;
    if (mechanism == "syn") return 1.5;
    throw Error(ErrorCode::Parameter, "mechanism must be icmp, arp or syn");
}

Task<void> network_discovery(ActionContext& ctx) {
    auto addresses = expand_range(ctx.param("range"));
    double factor = mechanism_factor(ctx.param("mechanism"));
    auto source = ctx.source.to_string();
    auto s = co_await syscall(sys::socket(sys::kIcmp));
    if (!s.ok()) throw Error(ErrorCode::Channel, "probe socket: " + std::string(to_string(s.status)));
    auto fd = s.int_result(0);
    nlohmann::json responding = nlohmann::json::array();
    std::size_t filtered = 0;
    for (auto address : addresses) {
        auto r = co_await syscall(sys::connect(fd, address.to_string(), 0));
        ctx.make_noise(SensorScope::PathIds, NoiseCategory::Irremovable, factor, address);
        switch (r.status) {
        case SysStatus::Ok:
            ctx.produce(ip_asset(source, address.to_string(), 1.0));
            responding.push_back(address.to_string());
            break;
        case SysStatus::NotFound:
        case SysStatus::Unreachable: ctx.produce(ip_asset(source, address.to_string(), 0.0)); break;
        default: ++filtered; break;
        }
    }
    co_await syscall(sys::close(fd));
    ctx.outcome.detail["responding"] = responding;
    ctx.outcome.detail["filtered"] = filtered;
    ctx.outcome.status = ActionStatus::Success;
}

Task<void> tcp_connect(ActionContext& ctx) {
    auto host = host_param(ctx.params);
    auto port = port_param(ctx.params);
    auto status = co_await probe_tcp(host, port);
    ctx.make_noise(SensorScope::PathIds, NoiseCategory::Irremovable, 1.0, host);
    ctx.outcome.detail["result"] = std::string(to_string(status));
    if (status == SysStatus::Ok) {
        ctx.produce(tcp_asset(ctx.source.to_string(), host.to_string(), port, 1.0));
        ctx.outcome.status = ActionStatus::Success;
    } else if (status == SysStatus::Refused) {
        ctx.produce(tcp_asset(ctx.source.to_string(), host.to_string(), port, 0.0));
    }
}

Task<void> port_scan(ActionContext& ctx) {
    auto host = host_param(ctx.params);
    auto ports = expand_ports(ctx.param("ports"));
    auto source = ctx.source.to_string();
    nlohmann::json states = nlohmann::json::array();
    nlohmann::json open = nlohmann::json::array();
    for (auto port : ports) {
        auto status = co_await probe_tcp(host, port);
        ctx.make_noise(SensorScope::PathIds, NoiseCategory::Irremovable, 1.0, host);
        const char* state = "filtered";
        if (status == SysStatus::Ok) {
            state = "open";
            open.push_back(port);
            ctx.produce(tcp_asset(source, host.to_string(), port, 1.0));
        } else if (status == SysStatus::Refused) {
            state = "closed";
            ctx.produce(tcp_asset(source, host.to_string(), port, 0.0));
        }
        states.push_back({{"port", port}, {"state", state}});
    }
    ctx.outcome.detail["open"] = open;
    ctx.outcome.detail["ports"] = states;
    ctx.outcome.status = ActionStatus::Success;
}

/// Collects whatever the peer sends within the polling window.
Task<std::string> read_some(std::int64_t fd, bool until_newline) {
    std::string data;
    for (int i = 0; i < kPollTries; ++i) {
        auto r = co_await syscall(sys::recv(fd, 4096, true));
        if (r.ok()) {
            if (r.bytes_result(0).empty()) break;  // EOF
            data += r.bytes_result(0);
            if (!until_newline || data.find('\n') != std::string::npos) break;
            continue;
        }
        if (r.status != SysStatus::WouldBlock) break;
        co_await syscall(sys::sleep(kPollMs));
    }
    co_return data;
}

Task<void> banner_grab(ActionContext& ctx) {
    auto host = host_param(ctx.params);
    auto port = port_param(ctx.params);
    auto s = co_await syscall(sys::socket(sys::kTcp));
    auto fd = s.int_result(0);
    auto c = co_await syscall(sys::connect(fd, host.to_string(), port));
    ctx.make_noise(SensorScope::PathIds, NoiseCategory::Irremovable, 1.0, host);
    if (!c.ok()) {
        co_await syscall(sys::close(fd));
        ctx.outcome.detail["result"] = std::string(to_string(c.status));
        co_return;
    }
    ctx.make_noise(SensorScope::TargetLog, NoiseCategory::CleanableOnSuccess, 1.0, host);
    auto banner = co_await read_some(fd, true);
    co_await syscall(sys::close(fd));
    while (!banner.empty() && (banner.back() == '\n' || banner.back() == '\r')) banner.pop_back();
    if (banner.empty()) {
        ctx.outcome.detail["result"] = "no banner";
        co_return;
    }
    ctx.produce(Asset{AssetKind::Banner, {{"host", host.to_string()}, {"port", std::to_string(port)}, {"banner", banner}}, 1.0});
    ctx.outcome.detail["banner"] = banner;
    ctx.outcome.status = ActionStatus::Success;
}

Task<void> os_detect_by_banner(ActionContext& ctx) {
    auto host = host_param(ctx.params).to_string();
    std::vector<std::string> banners;
    ctx.world.env().for_each(AssetKind::Banner, [&](const Asset& a) {
        if (a.attr("host") == host && a.probability > 0) banners.push_back(a.attr("banner"));
    });
    for (const auto& banner : banners) {
        const auto* rule = ctx.world.signatures().match(banner);
        if (!rule) continue;
        for (const auto& h : rule->hypotheses) {
            Attributes attrs{{"host", host}, {"os", h.os}};
            if (!h.version.empty()) attrs["version"] = h.version;
            ctx.produce(Asset{AssetKind::OperatingSystem, std::move(attrs), h.probability});
        }
        ctx.outcome.detail["matched"] = rule->pattern;
        ctx.outcome.status = ActionStatus::Success;
        co_return;
    }
    ctx.outcome.detail["result"] = banners.empty() ? "no banner known" : "no signature matched";
}

Task<void> os_fingerprint(ActionContext& ctx) {
    static const std::vector<std::string> decoys{"linux", "windows", "openbsd", "freebsd", "solaris"};
    auto host = host_param(ctx.params);
    auto s = co_await syscall(sys::socket(sys::kIcmp));
    auto fd = s.int_result(0);
    auto r = co_await syscall(sys::connect(fd, host.to_string(), 0));
    co_await syscall(sys::close(fd));
    ctx.make_noise(SensorScope::PathIds, NoiseCategory::Irremovable, 1.0, host);
    if (!r.ok()) {
        ctx.outcome.detail["result"] = std::string(to_string(r.status));
        co_return;
    }
    auto truth = ctx.world.fingerprint_response(host);
    if (!truth) {
        ctx.outcome.detail["result"] = "no response";
        co_return;
    }
    double a = ctx.world.options().fingerprint_accuracy;
    auto& rng = ctx.world.rng();
    Attributes attrs{{"host", host.to_string()}};
    if (rng.next01() < a) {
        attrs["os"] = truth->name;
        if (!truth->version.empty()) attrs["version"] = truth->version;
        if (!truth->arch.empty()) attrs["arch"] = truth->arch;
        if (truth->name == "windows") {
            if (!truth->edition.empty()) attrs["edition"] = truth->edition;
            if (!truth->servicepack.empty()) attrs["servicepack"] = truth->servicepack;
        }
    } else {
        std::vector<std::string> pool;
        for (const auto& d : decoys)
            if (d != truth->name) pool.push_back(d);
        attrs["os"] = pool[rng.uniform_int(0, pool.size() - 1)];
    }
    ctx.outcome.detail["os"] = attrs["os"];
    ctx.produce(Asset{AssetKind::OperatingSystem, std::move(attrs), a});
    ctx.outcome.status = ActionStatus::Success;
}

void exploit_noise(ActionContext& ctx, const VulnerabilityEntry& entry, const Resolution& res, Ipv4 target,
                   bool local) {
    ctx.make_noise(local ? SensorScope::LocalLog : SensorScope::PathIds, NoiseCategory::Irremovable, entry.noise_level,
                   target);
    for (const auto& n : res.noise) {
        if (n.kind == DrawKind::Alarm)
            ctx.make_noise(local ? SensorScope::LocalLog : SensorScope::PathIds, NoiseCategory::Irremovable,
                           n.magnitude, target);
        else
            ctx.make_noise(local ? SensorScope::LocalLog : SensorScope::TargetLog, NoiseCategory::CleanableOnSuccess,
                           n.magnitude, target);
    }
}

Task<void> run_exploit(ActionContext& ctx) {
    const auto& entry = vuln_param(ctx.world, ctx.params, false);
    auto host = host_param(ctx.params);
    auto port = port_param(ctx.params);
    auto s = co_await syscall(sys::socket(sys::kTcp));
    auto fd = s.int_result(0);
    auto c = co_await syscall(sys::connect(fd, host.to_string(), port));
    if (!c.ok()) {
        co_await syscall(sys::close(fd));
        ctx.outcome.detail["result"] = std::string(to_string(c.status));
        co_return;
    }
    auto sent = co_await syscall(sys::send(fd, std::string(kExploitMagic) + entry.id + "\n"));
    auto report = sent.ok() ? ctx.world.take_exploit_report(ctx.machine, static_cast<int>(fd)) : std::nullopt;
    if (!report) {
        co_await syscall(sys::close(fd));
        ctx.outcome.detail["result"] = "exploit not delivered to an application";
        co_return;
    }
    exploit_noise(ctx, entry, *report, host, false);
    ctx.outcome.detail["outcome"] = std::string(to_string(report->kind));
    if (report->matched_requirement) ctx.outcome.detail["requirement"] = *report->matched_requirement;
    if (report->kind != OutcomeKind::AgentInstalled) {
        co_await syscall(sys::close(fd));
        co_return;
    }
    auto data = co_await read_some(fd, true);
    auto at = data.find(kAgentGreeting);
    auto end = at == std::string::npos ? at : data.find('\n', at);
    if (end == std::string::npos) {
        ctx.outcome.detail["result"] = "agent greeting missing";
        co_return;
    }
    auto id = std::stoull(data.substr(at + kAgentGreeting.size(), end - at - kAgentGreeting.size()));
    const auto& agent = ctx.world.agent(id);
    const auto& m = ctx.world.machine(agent.machine);
    ctx.outcome.produced_assets.push_back(Asset{AssetKind::AgentPresence,
                                                {{"host", m.primary().to_string()},
                                                 {"agent", std::to_string(id)},
                                                 {"privilege", std::string(to_string(agent.privilege))}},
                                                1.0});
    ctx.outcome.detail["agent"] = id;
    ctx.outcome.status = ActionStatus::Success;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, sep);) out.push_back(item);
    return out;
}

Task<void> local_info_gathering(ActionContext& ctx) {
    auto host = ctx.source.to_string();
    auto os = co_await syscall(sys::get_info("os"));
    auto apps = co_await syscall(sys::get_info("apps"));
    auto ifaces = co_await syscall(sys::get_info("ifaces"));
    auto users = co_await syscall(sys::get_info("users"));
    if (!os.ok() || !apps.ok() || !ifaces.ok() || !users.ok()) {
        ctx.outcome.detail["result"] = "getinfo failed";
        co_return;
    }
    ctx.make_noise(SensorScope::LocalLog, NoiseCategory::CleanableAlways, 1.0, ctx.source);

    Attributes os_attrs{{"host", host}, {"os", os.bytes_result(0)}};
    const char* keys[] = {"os", "arch", "version", "edition", "servicepack"};
    for (std::size_t i = 1; i < 5; ++i)
        if (!os.bytes_result(i).empty()) os_attrs[keys[i]] = os.bytes_result(i);
    // exact knowledge retires every other hypothesis for this host
    std::vector<Asset> stale;
    ctx.world.env().for_each(AssetKind::OperatingSystem, [&](const Asset& a) {
        if (a.attr("host") == host && a.attr("os") != os.bytes_result(0) && a.probability > 0) stale.push_back(a);
    });
    for (auto& a : stale) {
        a.probability = 0;
        ctx.produce(std::move(a));
    }
    ctx.produce(Asset{AssetKind::OperatingSystem, std::move(os_attrs), 1.0});

    for (const auto& line : apps.results) {
        auto f = split(std::get<std::string>(line), '\t');
        f.resize(5);
        auto version = f[2].empty() ? f[1] : f[1] + "." + f[2];
        ctx.produce(Asset{AssetKind::Application,
                          {{"host", host}, {"application", f[0]}, {"version", version}, {"state", f[3]}, {"ports", f[4]}},
                          1.0});
    }
    for (const auto& line : ifaces.results) {
        const auto& text = std::get<std::string>(line);
        auto slash = text.find('/');
        auto addr = text.substr(0, slash);
        auto network = Cidr::from_string(text).to_string();
        ctx.produce(Asset{AssetKind::IPConnectivity, {{"source", host}, {"target", addr}, {"network", network}}, 1.0});
    }
    std::string list;
    for (const auto& u : users.results) list += (list.empty() ? "" : ",") + std::get<std::string>(u);
    ctx.produce(Asset{AssetKind::UserList, {{"host", host}, {"users", list}}, 1.0});
    ctx.outcome.status = ActionStatus::Success;
}

Task<void> privilege_escalation(ActionContext& ctx) {
    const auto& entry = vuln_param(ctx.world, ctx.params, true);
    auto who = co_await syscall(sys::get_info("privilege"));
    if (!who.ok()) co_return;
    if (who.bytes_result(0) == "root") {
        ctx.outcome.status = ActionStatus::Success;
        co_return;
    }
    auto profile = ctx.world.machine(ctx.machine).profile;
    auto res = resolve_exploit(entry, profile, nullptr, ctx.world.rng());
    exploit_noise(ctx, entry, res, ctx.source, true);
    ctx.outcome.detail["outcome"] = std::string(to_string(res.kind));
    switch (res.kind) {
    case OutcomeKind::AgentInstalled:
        ctx.world.set_privilege(ctx.agent, Privilege::Root);
        ctx.outcome.produced_assets.push_back(Asset{
            AssetKind::AgentPresence,
            {{"host", ctx.source.to_string()}, {"agent", std::to_string(ctx.agent)}, {"privilege", "root"}},
            1.0});
        ctx.outcome.status = ActionStatus::Success;
        break;
    case OutcomeKind::CrashOs: ctx.world.crash_machine(ctx.machine); break;
    case OutcomeKind::ResetOs: ctx.world.reset_machine(ctx.machine); break;
    default: break;
    }
}

// ---- definitions ---------------------------------------------------------

AssetTemplate tmpl(AssetKind kind, Attributes bound) { return AssetTemplate{kind, std::move(bound)}; }

ActionDef make(std::string name, RunTime rt, std::vector<std::string> parameters, AssetTemplate goal, ActionBody body,
               bool info) {
    ActionDef d;
    d.spec.name = std::move(name);
    d.spec.run_time = rt;
    d.spec.parameters = std::move(parameters);
    d.spec.goal = std::move(goal);
    d.body = std::move(body);
    d.info_gathering = info;
    return d;
}

/// OS conditions implied by the system requirements under `id`.
void os_conditions(const VulnerabilityEntry& entry, const std::string& id, std::vector<EnvCondition>& out, int depth = 0) {
    auto it = entry.requirements.find(id);
    if (it == entry.requirements.end() || depth > 32) return;
    const auto& r = it->second;
    if (r.type == RequirementType::Compose && r.op == LogicOp::And) {
        for (const auto& o : r.operands) os_conditions(entry, o, out, depth + 1);
    } else if (r.type == RequirementType::System && r.os_name.size() == 1) {
        EnvCondition c;
        c.name = "os " + *r.os_name.begin();
        c.subject = tmpl(AssetKind::OperatingSystem, {{"host", "$host"}});
        c.expect = {{"os", *r.os_name.begin()}};
        out.push_back(std::move(c));
    }
}

ActionSpec exploit_spec(const ActionSpec& base, const VulnerabilityEntry& entry) {
    ActionSpec spec = base;
    spec.base_success_probability = agent_chance(entry);
    spec.noise_profile = {NoiseTemplate{SensorScope::PathIds, NoiseCategory::Irremovable, entry.noise_level}};
    for (const auto& result : entry.results) {
        bool agent = std::any_of(result.draws.begin(), result.draws.end(),
                                 [](const Draw& d) { return d.kind == DrawKind::Agent && d.chance > 0; });
        if (!agent) continue;
        os_conditions(entry, result.for_requirement, spec.environment_conditions);
        break;
    }
    return spec;
}

} // namespace

void ActionLibrary::add(ActionDef def) {
    def.spec.validate();
    auto name = def.spec.name;
    defs_[name] = std::move(def);
}

const ActionDef* ActionLibrary::find(const std::string& name) const {
    auto it = defs_.find(name);
    return it == defs_.end() ? nullptr : &it->second;
}

std::vector<std::string> ActionLibrary::names() const {
    std::vector<std::string> out;
    for (const auto& [name, def] : defs_) out.push_back(name);
    return out;
}

ActionLibrary ActionLibrary::builtin() {
    ActionLibrary lib;
    auto host_check = [](const World&, const Params& p) { host_param(p); };
    auto host_port_check = [](const World&, const Params& p) {
        host_param(p);
        port_param(p);
    };

    {
        auto d = make("network_discovery", {1000, 5000, 30000}, {"range"},
                      tmpl(AssetKind::IPConnectivity, {{"source", "$source"}}), network_discovery, true);
        d.defaults = {{"mechanism", "icmp"}};
        d.spec.noise_profile = {NoiseTemplate{SensorScope::PathIds, NoiseCategory::Irremovable, 1.0}};
        d.validate = [](const World&, const Params& p) {
            expand_range(p.at("range"));
            mechanism_factor(p.at("mechanism"));
        };
        d.spec.goal_check = [](const EnvironmentKnowledge& env, const Params& p) {
            for (auto a : expand_range(p.at("range")))
                if (!has_asset(env, AssetKind::IPConnectivity, {{"source", p.at("source")}, {"target", a.to_string()}}))
                    return false;
            return true;
        };
        lib.add(std::move(d));
    }
    {
        auto d = make("tcp_connect", {10, 100, 3000}, {"host", "port"},
                      tmpl(AssetKind::TCPConnectivity, {{"source", "$source"}, {"target", "$host"}, {"port", "$port"}}),
                      tcp_connect, true);
        d.spec.noise_profile = {NoiseTemplate{SensorScope::PathIds, NoiseCategory::Irremovable, 1.0}};
        d.spec.requirements = {tmpl(AssetKind::IPConnectivity, {{"source", "$source"}, {"target", "$host"}})};
        d.validate = host_port_check;
        d.spec.goal_check = [](const EnvironmentKnowledge& env, const Params& p) {
            return has_asset(env, AssetKind::TCPConnectivity,
                             {{"source", p.at("source")}, {"target", p.at("host")}, {"port", p.at("port")}});
        };
        lib.add(std::move(d));
    }
    {
        auto d = make("port_scan", {2000, 10000, 60000}, {"host", "ports"},
                      tmpl(AssetKind::TCPConnectivity, {{"source", "$source"}, {"target", "$host"}}), port_scan, true);
        d.defaults = {{"ports", "1-1024"}};
        d.spec.noise_profile = {NoiseTemplate{SensorScope::PathIds, NoiseCategory::Irremovable, 1.0}};
        d.spec.requirements = {tmpl(AssetKind::IPConnectivity, {{"source", "$source"}, {"target", "$host"}})};
        d.validate = [](const World&, const Params& p) {
            host_param(p);
            expand_ports(p.at("ports"));
        };
        d.spec.goal_check = [](const EnvironmentKnowledge& env, const Params& p) {
            auto host = Ipv4::from_string(p.at("host")).to_string();
            for (auto port : expand_ports(p.at("ports")))
                if (!has_asset(env, AssetKind::TCPConnectivity,
                               {{"source", p.at("source")}, {"target", host}, {"port", std::to_string(port)}}))
                    return false;
            return true;
        };
        lib.add(std::move(d));
    }
    {
        auto d = make("banner_grab", {200, 1000, 5000}, {"host", "port"},
                      tmpl(AssetKind::Banner, {{"host", "$host"}, {"port", "$port"}}), banner_grab, true);
        d.spec.noise_profile = {NoiseTemplate{SensorScope::PathIds, NoiseCategory::Irremovable, 1.0},
                                NoiseTemplate{SensorScope::TargetLog, NoiseCategory::CleanableOnSuccess, 1.0}};
        d.spec.requirements = {
            tmpl(AssetKind::TCPConnectivity, {{"source", "$source"}, {"target", "$host"}, {"port", "$port"}})};
        EnvCondition open;
        open.name = "port open";
        open.subject = d.spec.requirements.front();
        d.spec.environment_conditions = {open};
        d.validate = host_port_check;
        lib.add(std::move(d));
    }
    {
        auto d = make("os_detect_by_banner", {10, 50, 100}, {"host"},
                      tmpl(AssetKind::OperatingSystem, {{"host", "$host"}}), os_detect_by_banner, true);
        d.spec.requirements = {tmpl(AssetKind::Banner, {{"host", "$host"}})};
        d.validate = host_check;
        lib.add(std::move(d));
    }
    {
        auto d = make("os_fingerprint", {1000, 3000, 10000}, {"host"},
                      tmpl(AssetKind::OperatingSystem, {{"host", "$host"}}), os_fingerprint, true);
        d.spec.noise_profile = {NoiseTemplate{SensorScope::PathIds, NoiseCategory::Irremovable, 1.0}};
        d.spec.requirements = {tmpl(AssetKind::IPConnectivity, {{"source", "$source"}, {"target", "$host"}})};
        d.validate = host_check;
        // a probe reports at the configured accuracy, never above it
        d.refine = [](const World& w, const Params& p) {
            auto spec = w.actions().find("os_fingerprint")->spec;
            double a = w.options().fingerprint_accuracy;
            spec.goal_check = [a](const EnvironmentKnowledge& env, const Params& q) {
                return env.goal_mass(AssetTemplate{AssetKind::OperatingSystem, {{"host", q.at("host")}}}) >= a - 1e-9;
            };
            (void)p;
            return spec;
        };
        lib.add(std::move(d));
    }
    {
        auto d = make("run_exploit", {1000, 5000, 20000}, {"vuln", "host", "port"},
                      tmpl(AssetKind::AgentPresence, {{"host", "$host"}}), run_exploit, false);
        d.spec.requirements = {
            tmpl(AssetKind::TCPConnectivity, {{"source", "$source"}, {"target", "$host"}, {"port", "$port"}})};
        d.validate = [](const World& w, const Params& p) {
            vuln_param(w, p, false);
            host_param(p);
            port_param(p);
        };
        d.refine = [](const World& w, const Params& p) {
            auto spec = exploit_spec(w.actions().find("run_exploit")->spec, vuln_param(w, p, false));
            EnvCondition open;
            open.name = "port open";
            open.subject = spec.requirements.front();
            spec.environment_conditions.push_back(open);
            return spec;
        };
        lib.add(std::move(d));
    }
    {
        auto d = make("local_info_gathering", {100, 500, 2000}, {},
                      tmpl(AssetKind::UserList, {{"host", "$source"}}), local_info_gathering, true);
        d.spec.noise_profile = {NoiseTemplate{SensorScope::LocalLog, NoiseCategory::CleanableAlways, 1.0}};
        d.spec.goal_check = [](const EnvironmentKnowledge& env, const Params& p) {
            bool exact = false;
            env.for_each(AssetKind::OperatingSystem, [&](const Asset& a) {
                if (a.attr("host") == p.at("source") && a.probability >= 1.0 - 1e-9) exact = true;
            });
            bool users = false;
            env.for_each(AssetKind::UserList, [&](const Asset& a) {
                if (a.attr("host") == p.at("source") && a.probability > 0) users = true;
            });
            return exact && users;
        };
        lib.add(std::move(d));
    }
    {
        auto d = make("privilege_escalation", {1000, 3000, 10000}, {"vuln"},
                      tmpl(AssetKind::AgentPresence, {{"agent", "$agent"}, {"privilege", "root"}}),
                      privilege_escalation, false);
        d.validate = [](const World& w, const Params& p) { vuln_param(w, p, true); };
        d.refine = [](const World& w, const Params& p) {
            auto spec = w.actions().find("privilege_escalation")->spec;
            const auto& entry = vuln_param(w, p, true);
            spec.base_success_probability = agent_chance(entry);
            spec.noise_profile = {NoiseTemplate{SensorScope::LocalLog, NoiseCategory::Irremovable, entry.noise_level}};
            return spec;
        };
        lib.add(std::move(d));
    }
    return lib;
}

// ---- world integration -----------------------------------------------------

struct ActionRunner {
    static SimTask thread(World& w, ActionInstance& inst) {
        co_await inst.action->body(*inst.ctx);
        SimTime until = inst.started + inst.drawn_elapsed;
        if (w.now() < until) co_await syscall(sys::sleep(until - w.now()));
        if (!w.agent_alive(inst.agent)) {
            inst.outcome.status = ActionStatus::Failure;
            inst.outcome.detail["error"] = "agent lost";
        }
        w.finish_action(inst.id);
    }

    static Params bind(const World& w, const ActionDef& def, const Agent& agent, const Params& params) {
        Params p = def.defaults;
        for (const auto& [k, v] : params) p[k] = v;
        p["source"] = w.machine(agent.machine).primary().to_string();
        p["agent"] = std::to_string(agent.id);
        for (const auto& name : def.spec.parameters)
            if (!p.count(name)) throw Error(ErrorCode::Parameter, def.spec.name + ": missing parameter '" + name + "'");
        if (def.validate) def.validate(w, p);
        if (auto h = p.find("host"); h != p.end()) h->second = Ipv4::from_string(h->second).to_string();
        return p;
    }

    static const ActionDef& lookup(const World& w, const std::string& name) {
        const auto* def = w.actions().find(name);
        if (!def) throw Error(ErrorCode::NotFound, "unknown action '" + name + "'");
        return *def;
    }
};

ActionInstanceId World::start_action(AgentId agent_id, const std::string& name, const Params& params, RequestId request) {
    const auto& agent = live_agent(agent_id);
    const auto& def = ActionRunner::lookup(*this, name);
    auto p = ActionRunner::bind(*this, def, agent, params);
    auto spec = def.spec_for(*this, p);

    auto inst = std::make_unique<ActionInstance>();
    inst->id = next_action_++;
    inst->action = &def;
    inst->agent = agent_id;
    inst->params = p;
    inst->request = request;
    inst->started = now_;
    inst->outcome.instance = inst->id;
    auto id = inst->id;
    auto& ref = *inst;
    actions_[id] = std::move(inst);

    if (spec.goal_satisfied(env_, p)) {
        ref.outcome.status = ActionStatus::Success;
        ref.outcome.cost_incurred = Cost::zero();
        ref.outcome.detail["shortcut"] = "goal already satisfied";
        finish_action(id);
        return id;
    }
    ref.drawn_elapsed = static_cast<SimTime>(std::llround(rng_.uniform(spec.run_time.min_ms, spec.run_time.max_ms)));
    ref.ctx.reset(new ActionContext{*this, id, agent_id, agent.machine, machine(agent.machine).primary(), p, ref.outcome});
    ref.thread = spawn(agent.machine, agent.process, ActionRunner::thread(*this, ref));
    return id;
}

void World::finish_action(ActionInstanceId id) {
    auto& inst = *actions_.at(id);
    if (inst.done) return;
    inst.done = true;
    auto& out = inst.outcome;
    out.elapsed_ms = static_cast<double>(now_ - inst.started);
    double noise = 0;
    for (const auto& n : out.noise_events) noise += n.magnitude;
    if (out.elapsed_ms > 0 || !out.noise_events.empty()) {
        out.cost_incurred.run_time = {out.elapsed_ms, out.elapsed_ms, out.elapsed_ms};
        out.cost_incurred.success_probability = out.succeeded() ? 1.0 : 0.0;
        out.cost_incurred.stealthiness = 1.0 / (1.0 + noise);
        out.cost_incurred.zero_dayness = inst.action->spec.zero_dayness;
    }
    noise_.mark_action(id, out.succeeded());

    nlohmann::json assets = nlohmann::json::array();
    for (const auto& a : out.produced_assets) assets.push_back(to_json(a));
    nlohmann::json noise_events = nlohmann::json::array();
    for (const auto& n : out.noise_events) noise_events.push_back(to_json(n));
    emit(EventCategory::ActionResult, {{"request_id", inst.request},
                                       {"instance", id},
                                       {"action", inst.action->spec.name},
                                       {"agent", inst.agent},
                                       {"status", out.succeeded() ? "success" : "failure"},
                                       {"elapsed_ms", out.elapsed_ms},
                                       {"assets", assets},
                                       {"noise", noise_events},
                                       {"detail", out.detail}});
}

Cost World::estimate(AgentId agent_id, const std::string& name, const Params& params) const {
    const auto& agent = live_agent(agent_id);
    const auto& def = ActionRunner::lookup(*this, name);
    auto p = ActionRunner::bind(*this, def, agent, params);
    return estimate_cost(def.spec_for(*this, p), env_, p);
}

const ActionOutcome* World::action_outcome(ActionInstanceId id) const {
    auto it = actions_.find(id);
    return it == actions_.end() || !it->second->done ? nullptr : &it->second->outcome;
}

bool World::action_done(ActionInstanceId id) const {
    auto it = actions_.find(id);
    return it != actions_.end() && it->second->done;
}

std::size_t World::actions_in_flight() const {
    std::size_t n = 0;
    for (const auto& [id, inst] : actions_)
        if (!inst->done) ++n;
    return n;
}

ActionOutcome World::run_action(AgentId agent, const std::string& name, const Params& params) {
    auto id = start_action(agent, name, params);
    run_until([&] { return action_done(id); });
    auto& inst = *actions_.at(id);
    if (!inst.done) {
        scheduler_.kill_thread(inst.thread);
        inst.outcome.status = ActionStatus::Failure;
        inst.outcome.detail["error"] = "action did not complete";
        finish_action(id);
    }
    return inst.outcome;
}

} // namespace attacksim
