#include "attacksim/scenario.hpp"

#include "attacksim/error.hpp"

#include <fstream>
#include <sstream>

namespace attacksim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& message) {
    throw Error(ErrorCode::Validation, where + ": " + message);
}

std::string read_file(const fs::path& path, const std::string& where) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(where, "cannot read " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

const json& member(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) fail(where, std::string("missing '") + key + "'");
    return obj.at(key);
}

std::string str(const json& obj, const char* key, const std::string& where) {
    const auto& v = member(obj, key, where);
    if (!v.is_string()) fail(where + "/" + key, "expected a string");
    return v.get<std::string>();
}

std::string str_or(const json& obj, const char* key, std::string fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_string()) fail(where + "/" + key, "expected a string");
    return obj.at(key).get<std::string>();
}

template <typename T>
T number_or(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number()) fail(where + "/" + key, "expected a number");
    return obj.at(key).get<T>();
}

const json& array(const json& obj, const char* key, const std::string& where) {
    static const json empty = json::array();
    if (!obj.contains(key)) return empty;
    if (!obj.at(key).is_array()) fail(where + "/" + key, "expected an array");
    return obj.at(key);
}

std::string at(const std::string& base, const char* key, std::size_t i) { return base + "/" + key + "/" + std::to_string(i); }

/// A text source: a file path string or {"inline": text} / {"file": path}.
std::string text_source(const json& v, const fs::path& base, const std::string& where) {
    if (v.is_string()) return read_file(base / v.get<std::string>(), where);
    if (v.is_object() && v.contains("inline") && v.at("inline").is_string()) return v.at("inline").get<std::string>();
    if (v.is_object() && v.contains("file") && v.at("file").is_string())
        return read_file(base / v.at("file").get<std::string>(), where);
    fail(where, "expected a path, {\"file\": ...} or {\"inline\": ...}");
}

template <typename Fn>
auto located(const std::string& where, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ParseError& e) {
        throw ParseError(where + ": " + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Validation && std::string_view(e.what()).substr(0, 1) == "/") throw;
        throw Error(ErrorCode::Validation, where + ": " + e.what());
    }
}

FilterRule parse_filter(const json& j, const std::string& where) {
    FilterRule r;
    auto dir = str_or(j, "direction", "any", where);
    if (dir == "in") r.direction = FilterDirection::In;
    else if (dir == "out") r.direction = FilterDirection::Out;
    else if (dir == "forward") r.direction = FilterDirection::Forward;
    else if (dir == "any") r.direction = FilterDirection::Any;
    else fail(where + "/direction", "expected in, out, forward or any");
    auto cidr = [&](const char* key) {
        auto text = str_or(j, key, "0.0.0.0/0", where);
        if (text.find('/') == std::string::npos) text += "/32";
        auto c = Cidr::parse(text);
        if (!c) fail(where + "/" + key, "bad address block '" + text + "'");
        return *c;
    };
    r.source = cidr("source");
    r.destination = cidr("destination");
    if (j.contains("port")) {
        auto p = number_or<long>(j, "port", 0, where);
        if (p < 0 || p > 65535) fail(where + "/port", "port outside 0-65535");
        r.port_lo = r.port_hi = static_cast<std::uint16_t>(p);
    } else if (j.contains("ports")) {
        auto text = str(j, "ports", where);
        auto dash = text.find('-');
        try {
            long lo = std::stol(text.substr(0, dash));
            long hi = dash == std::string::npos ? lo : std::stol(text.substr(dash + 1));
            if (lo < 0 || hi > 65535 || lo > hi) throw std::out_of_range("ports");
            r.port_lo = static_cast<std::uint16_t>(lo);
            r.port_hi = static_cast<std::uint16_t>(hi);
        } catch (const std::exception&) {
            fail(where + "/ports", "expected 'lo-hi' within 0-65535");
        }
    }
    auto proto = str_or(j, "proto", "any", where);
    if (proto == "tcp") r.proto = Proto::Tcp;
    else if (proto == "udp") r.proto = Proto::Udp;
    else if (proto == "icmp") r.proto = Proto::Icmp;
    else if (proto != "any") fail(where + "/proto", "expected tcp, udp, icmp or any");
    auto verdict = str_or(j, "verdict", "deny", where);
    if (verdict == "allow") r.verdict = Verdict::Allow;
    else if (verdict == "deny") r.verdict = Verdict::Deny;
    else fail(where + "/verdict", "expected allow or deny");
    return r;
}

ApplicationInstance parse_app(const json& j, const std::string& where) {
    ApplicationInstance a;
    a.name = str(j, "name", where);
    if (j.contains("version")) {
        auto v = str(j, "version", where);
        auto dot = v.find('.');
        a.version_major = v.substr(0, dot);
        if (dot != std::string::npos) a.version_minor = v.substr(dot + 1);
    }
    a.version_major = str_or(j, "major", a.version_major, where);
    a.version_minor = str_or(j, "minor", a.version_minor, where);
    auto state = str_or(j, "state", "running", where);
    if (state == "running") a.state = AppState::Running;
    else if (state == "installed") a.state = AppState::Installed;
    else fail(where + "/state", "expected running or installed");
    const auto& ports = array(j, "ports", where);
    for (std::size_t i = 0; i < ports.size(); ++i) {
        if (!ports[i].is_number_integer() || ports[i].get<long>() < 1 || ports[i].get<long>() > 65535)
            fail(at(where, "ports", i), "port outside 1-65535");
        a.ports.push_back(ports[i].get<std::uint16_t>());
    }
    a.banner = str_or(j, "banner", "", where);
    a.privilege = str_or(j, "privilege", "user", where);
    if (a.privilege != "user" && a.privilege != "root") fail(where + "/privilege", "expected user or root");
    return a;
}

RoleFlags parse_roles(const json& j, const std::string& where) {
    RoleFlags r;
    const auto& roles = array(j, "roles", where);
    for (std::size_t i = 0; i < roles.size(); ++i) {
        auto name = roles[i].is_string() ? roles[i].get<std::string>() : "";
        if (name == "router") r.router = true;
        else if (name == "firewall") r.firewall = true;
        else if (name == "ids") r.ids = true;
        else if (name == "proxy") r.proxy = true;
        else if (name == "workstation") r.workstation = true;
        else if (name == "server") r.server = true;
        else if (name != "attacker") fail(at(where, "roles", i), "unknown role '" + name + "'");
    }
    return r;
}

WorldOptions parse_options(const json& doc) {
    WorldOptions o;
    if (doc.contains("settings")) {
        const auto& s = doc.at("settings");
        o.filtered_timeout_ms = number_or<SimTime>(s, "filtered_timeout_ms", o.filtered_timeout_ms, "/settings");
        o.reboot_ms = number_or<SimTime>(s, "reboot_ms", o.reboot_ms, "/settings");
        o.fingerprint_accuracy = number_or<double>(s, "fingerprint_accuracy", o.fingerprint_accuracy, "/settings");
        if (o.fingerprint_accuracy < 0 || o.fingerprint_accuracy > 1)
            fail("/settings/fingerprint_accuracy", "must lie in [0,1]");
        o.cache_capacity = number_or<std::size_t>(s, "cache_capacity", o.cache_capacity, "/settings");
    }
    if (doc.contains("scheduler")) {
        const auto& s = doc.at("scheduler");
        auto& c = o.scheduler;
        c.runs_to_sleep = number_or<std::uint64_t>(s, "runs_to_sleep", c.runs_to_sleep, "/scheduler");
        c.sleep_ms = number_or<double>(s, "sleep_ms", c.sleep_ms, "/scheduler");
        c.lost_threshold = number_or<std::uint64_t>(s, "lost_threshold", c.lost_threshold, "/scheduler");
        c.runs_to_sleep_min = number_or<std::uint64_t>(s, "runs_to_sleep_min", c.runs_to_sleep_min, "/scheduler");
        c.runs_to_sleep_max = number_or<std::uint64_t>(s, "runs_to_sleep_max", c.runs_to_sleep_max, "/scheduler");
        c.backoff_step = number_or<std::uint64_t>(s, "backoff_step", c.backoff_step, "/scheduler");
        located("/scheduler", [&] { c.validate(); });
    }
    return o;
}

/// Resolves file references into inline text or absolute paths.
json normalize(json doc, const LoadOptions& options) {
    const auto& base = options.base_dir;
    if (doc.contains("vulndb")) {
        json list = json::array();
        auto src = doc.at("vulndb").is_array() ? doc.at("vulndb") : json::array({doc.at("vulndb")});
        for (std::size_t i = 0; i < src.size(); ++i)
            list.push_back({{"inline", text_source(src[i], base, at("", "vulndb", i))}});
        doc["vulndb"] = list;
    }
    for (std::size_t i = 0; i < options.extra_vulndb.size(); ++i)
        doc["vulndb"].push_back({{"inline", read_file(options.extra_vulndb[i], "--vulndb")}});
    if (doc.contains("signatures")) doc["signatures"] = {{"inline", text_source(doc.at("signatures"), base, "/signatures")}};
    if (doc.contains("templates")) {
        auto& list = doc["templates"];
        if (!list.is_array()) fail("/templates", "expected an array");
        for (std::size_t i = 0; i < list.size(); ++i)
            if (list[i].contains("bundle")) list[i]["bundle"] = fs::absolute(base / str(list[i], "bundle", at("", "templates", i))).string();
    }
    for (const auto& t : options.extra_templates) doc["templates"].push_back({{"bundle", fs::absolute(t).string()}});
    if (options.seed) doc["seed"] = *options.seed;
    return doc;
}

} // namespace

std::unique_ptr<World> load_scenario(const json& input, const LoadOptions& options) {
    if (!input.is_object()) fail("", "scenario must be an object");
    if (number_or<int>(input, "schema_version", 0, "") != kScenarioSchema)
        fail("/schema_version", "expected " + std::to_string(kScenarioSchema));
    if (!options.seed && !input.contains("seed")) fail("/seed", "a seed is mandatory");
    json doc = normalize(input, options);
    if (!doc.at("seed").is_number_unsigned() && !doc.at("seed").is_number_integer()) fail("/seed", "expected an integer");

    auto world = std::make_unique<World>(doc.at("seed").get<std::uint64_t>(), parse_options(doc));

    const auto& templates = array(doc, "templates", "");
    for (std::size_t i = 0; i < templates.size(); ++i) {
        auto where = at("", "templates", i);
        located(where, [&] {
            const auto& t = templates[i];
            if (t.contains("bundle")) {
                world->add_template(TemplateFS::load_bundle(t.at("bundle").get<std::string>()));
            } else {
                std::map<std::string, std::string> files;
                for (const auto& [path, content] : member(t, "files", where).items()) files[path] = content.get<std::string>();
                world->add_template(TemplateFS::from_files(str(t, "id", where), files));
            }
        });
    }
    const auto& vulndb = array(doc, "vulndb", "");
    for (std::size_t i = 0; i < vulndb.size(); ++i)
        located(at("", "vulndb", i), [&] { world->vulndb().merge(parse_vulndb(vulndb[i].at("inline").get<std::string>())); });
    if (doc.contains("signatures"))
        located("/signatures", [&] { world->signatures() = SignatureDb::parse(doc.at("signatures").at("inline").get<std::string>()); });

    const auto& networks = array(doc, "networks", "");
    for (std::size_t i = 0; i < networks.size(); ++i) {
        auto where = at("", "networks", i);
        const auto& n = networks[i];
        auto kind_name = str_or(n, "kind", "switch", where);
        auto kind = segment_kind_from_string(kind_name);
        if (!kind) fail(where + "/kind", "unknown network kind '" + kind_name + "'");
        auto prefix = Cidr::parse(str(n, "prefix", where));
        if (!prefix) fail(where + "/prefix", "bad address block");
        located(where, [&] { world->add_segment(str(n, "id", where), *kind, *prefix); });
    }

    const auto& machines = array(doc, "machines", "");
    std::set<std::string> names;
    for (std::size_t i = 0; i < machines.size(); ++i) {
        auto where = at("", "machines", i);
        const auto& m = machines[i];
        MachineSpec spec;
        spec.name = str(m, "name", where);
        if (!names.insert(spec.name).second) fail(where + "/name", "duplicate machine name '" + spec.name + "'");
        const auto& os = member(m, "os", where);
        spec.profile.os.name = str(os, "name", where + "/os");
        spec.profile.os.arch = str_or(os, "arch", "", where + "/os");
        spec.profile.os.version = str_or(os, "version", "", where + "/os");
        spec.profile.os.edition = str_or(os, "edition", "", where + "/os");
        spec.profile.os.servicepack = str_or(os, "servicepack", "", where + "/os");
        const auto& ifaces = array(m, "interfaces", where);
        if (ifaces.empty()) fail(where + "/interfaces", "a machine needs at least one interface");
        for (std::size_t k = 0; k < ifaces.size(); ++k) {
            auto iw = at(where, "interfaces", k);
            auto net = str(ifaces[k], "network", iw);
            auto seg = world->segment_named(net);
            if (!seg) fail(iw + "/network", "unknown network '" + net + "'");
            auto addr = Ipv4::parse(str(ifaces[k], "address", iw));
            if (!addr) fail(iw + "/address", "bad address");
            const auto& segment = world->segment(*seg);
            if (!segment.prefix.contains(*addr))
                fail(iw + "/address", addr->to_string() + " outside " + segment.prefix.to_string());
            if (world->machine_at(*addr)) fail(iw + "/address", "duplicate address " + addr->to_string());
            for (const auto& [a, s] : spec.interfaces)
                if (a == *addr) fail(iw + "/address", "duplicate address " + addr->to_string());
            spec.interfaces.emplace_back(*addr, *seg);
        }
        const auto& apps = array(m, "applications", where);
        std::set<std::uint16_t> ports;
        for (std::size_t k = 0; k < apps.size(); ++k) {
            auto app = parse_app(apps[k], at(where, "applications", k));
            for (auto p : app.ports)
                if (!ports.insert(p).second)
                    fail(at(where, "applications", k) + "/ports", "port " + std::to_string(p) + " already used on this machine");
            spec.profile.applications.push_back(std::move(app));
        }
        if (m.contains("hidden")) {
            if (!m.at("hidden").is_object()) fail(where + "/hidden", "expected an object");
            for (const auto& [k, v] : m.at("hidden").items()) spec.profile.hidden[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        spec.roles = parse_roles(m, where);
        const auto& filters = array(m, "filters", where);
        for (std::size_t k = 0; k < filters.size(); ++k) spec.filters.push_back(parse_filter(filters[k], at(where, "filters", k)));
        for (const auto& u : array(m, "users", where)) spec.users.push_back(u.get<std::string>());
        spec.template_id = str_or(m, "template", "", where);
        if (!spec.template_id.empty() && !world->find_template(spec.template_id))
            fail(where + "/template", "unknown template '" + spec.template_id + "'");
        located(where, [&] { world->add_machine(std::move(spec)); });
    }

    if (doc.contains("attacker")) {
        auto name = str(doc, "attacker", "");
        auto* m = world->machine_named(name);
        if (!m) fail("/attacker", "unknown machine '" + name + "'");
        world->create_local_agent(m->id);
    } else if (!machines.empty()) {
        fail("/attacker", "missing attacker machine");
    }
    world->scenario_doc() = std::move(doc);
    return world;
}

std::unique_ptr<World> load_scenario_file(const fs::path& file, LoadOptions options) {
    auto text = read_file(file, file.string());
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    if (options.base_dir == ".") options.base_dir = file.parent_path().empty() ? fs::path(".") : file.parent_path();
    return load_scenario(doc, options);
}

json snapshot(const World& world) {
    return {{"schema_version", kScenarioSchema}, {"scenario", world.scenario_doc()}, {"state", world.save_state()}};
}

std::unique_ptr<World> restore(const json& snap) {
    if (snap.is_null() || snap.empty() || !snap.contains("scenario") || snap.at("scenario").is_null())
        return std::make_unique<World>();
    auto world = load_scenario(snap.at("scenario"));
    world->load_state(snap.at("state"));
    return world;
}

json describe(const World& world) {
    json segments = json::array();
    for (const auto& [id, s] : world.segments())
        segments.push_back({{"name", s.name}, {"kind", to_string(s.kind)}, {"prefix", s.prefix.to_string()}});
    json machines = json::array();
    for (const auto& [id, m] : world.machines()) {
        json ifaces = json::array();
        for (const auto& i : m.interfaces) ifaces.push_back({i.address.to_string(), world.segment(i.segment).name});
        json apps = json::array();
        for (const auto& a : m.profile.applications) {
            apps.push_back({{"name", a.name}, {"version", a.version()}, {"ports", a.ports}, {"banner", a.banner},
                            {"running", a.running()}, {"privilege", a.privilege}});
        }
        const auto& os = m.profile.os;
        json filters = json::array();
        for (const auto& f : m.filters)
            filters.push_back({static_cast<int>(f.direction), f.source.to_string(), f.destination.to_string(), f.port_lo,
                               f.port_hi, f.proto ? static_cast<int>(*f.proto) : -1, static_cast<int>(f.verdict)});
        machines.push_back({{"name", m.name},
                            {"os", {os.name, os.arch, os.version, os.edition, os.servicepack}},
                            {"interfaces", ifaces},
                            {"applications", apps},
                            {"hidden", m.profile.hidden},
                            {"roles", {m.roles.router, m.roles.firewall, m.roles.ids, m.roles.proxy, m.roles.workstation, m.roles.server}},
                            {"filters", filters},
                            {"users", m.users},
                            {"template", m.template_id}});
    }
    json templates = json::array();
    for (const auto& [id, m] : world.machines())
        if (auto t = world.find_template(m.template_id)) templates.push_back({t->id(), t->tree_hash()});
    return {{"seed", world.seed()},
            {"segments", segments},
            {"machines", machines},
            {"templates", templates},
            {"vulndb", serialize(world.vulndb())},
            {"signatures", world.signatures().to_text()},
            {"state", world.save_state()}};
}

std::uint64_t world_hash(const World& world) {
    auto text = describe(world).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string_view sample_vulndb() {
    return R"(<vulndb>
<vulnerability id="iis-idq" name="IIS indexing service overflow" kind="remote exploit" noise="2">
  <requirements>
    <requirement type="system" id="req0">
      <os arch="i386" name="windows" />
      <win>nt4</win>
      <edition>server enterprise_server</edition>
      <servicepack>6 6a</servicepack>
    </requirement>
    <requirement type="application" id="req1">
      <status>target</status>
      <name>Internet Information Services</name>
      <version major="4 5" />
    </requirement>
    <requirement type="compose" id="req2">
      <operator>logic_and</operator>
      <operands>req0 req1</operands>
    </requirement>
  </requirements>
  <results>
    <result for="req2">
      <crash chance="0.00" what="os" />
      <reset chance="0.00" what="os" />
      <crash chance="0.10" what="application" />
      <reset chance="0.00" what="application" />
      <agent chance="0.75" />
    </result>
  </results>
</vulnerability>
<vulnerability id="sshd-chan" name="OpenSSH channel overflow" kind="remote exploit" noise="1">
  <requirement type="system" id="linux"><os name="linux" /></requirement>
  <requirement type="application" id="sshd">
    <status>target</status>
    <name>sshd</name>
    <version major="3 4" />
  </requirement>
  <requirement type="compose" id="both">
    <operator>logic_and</operator>
    <operands>linux sshd</operands>
  </requirement>
  <result for="both">
    <alarm chance="0.5" magnitude="1" />
    <crash chance="0.05" what="application" />
    <agent chance="0.9" />
  </result>
</vulnerability>
<vulnerability id="linux-ptrace" name="ptrace race" kind="local exploit" noise="1">
  <requirement type="system" id="linux"><os name="linux" /></requirement>
  <result for="linux">
    <log chance="1.0" />
    <agent chance="0.6" />
  </result>
</vulnerability>
</vulndb>
)";
}

std::string_view sample_signatures() {
    return R"(# banner substring => os[/version]:probability, ...
Apache => linux:0.8, openbsd:0.2
OpenSSH => linux:0.6, openbsd:0.3, freebsd:0.1
Microsoft-IIS => windows:1.0
ProFTPD => linux:0.9, freebsd:0.1
Sendmail => linux:0.5, solaris:0.5
)";
}

json generate_scenario(const GeneratorOptions& o) {
    if (o.networks == 0 || o.networks > 250 * 250) fail("/generator", "networks must lie in 1-62500");
    if (o.machines_per_network == 0 || o.machines_per_network > 250) fail("/generator", "machines per network must lie in 1-250");
    SeededRng rng(o.seed);
    struct Os {
        const char* name;
        const char* arch;
        const char* version;
        const char* edition;
        const char* sp;
    };
    static const Os oses[] = {{"linux", "i386", "2.6", "", ""},
                              {"openbsd", "i386", "3.9", "", ""},
                              {"windows", "i386", "nt4", "server", "6"},
                              {"windows", "i386", "2000", "server", "4"},
                              {"freebsd", "i386", "6.0", "", ""}};
    struct App {
        const char* name;
        const char* version;
        int port;
        const char* banner;
        bool unix_only;
    };
    static const App apps[] = {{"sshd", "4.3", 22, "SSH-2.0-OpenSSH_4.3", true},
                               {"httpd", "2.0", 80, "Apache/2.0.55 (Unix)", true},
                               {"ftpd", "1.3", 21, "220 ProFTPD 1.3.0 Server", true},
                               {"sendmail", "8.13", 25, "220 mail ESMTP Sendmail 8.13.6", true},
                               {"Internet Information Services", "5.0", 80, "Microsoft-IIS/5.0", false},
                               {"smb", "1.0", 445, "", false}};

    json networks = json::array({{{"id", "core"}, {"kind", "switch"}, {"prefix", "10.0.0.0/16"}}});
    json machines = json::array();
    for (std::size_t n = 0; n < o.networks; ++n) {
        auto net = "net" + std::to_string(n);
        auto prefix = "10." + std::to_string(1 + n / 250) + "." + std::to_string(n % 250) + ".";
        networks.push_back({{"id", net}, {"kind", "switch"}, {"prefix", prefix + "0/24"}});
        for (std::size_t k = 0; k < o.machines_per_network; ++k) {
            json m;
            m["name"] = net + "-m" + std::to_string(k);
            m["template"] = "base";
            m["users"] = {"root", "admin"};
            json ifaces = json::array({{{"network", net}, {"address", prefix + std::to_string(k + 1)}}});
            json roles = json::array();
            if (k == 0) {
                auto core = "10.0." + std::to_string(n / 250) + "." + std::to_string(n % 250 + 1);
                ifaces.push_back({{"network", "core"}, {"address", core}});
                roles.push_back("router");
                if (o.ids && n % 10 == 0) roles.push_back("ids");
                m["os"] = {{"name", "openbsd"}, {"arch", "i386"}, {"version", "3.9"}};
                m["applications"] = json::array();
            } else {
                const auto& os = oses[rng.uniform_int(0, 4)];
                m["os"] = {{"name", os.name}, {"arch", os.arch}, {"version", os.version}};
                if (*os.edition) m["os"]["edition"] = os.edition;
                if (*os.sp) m["os"]["servicepack"] = os.sp;
                bool windows = std::string(os.name) == "windows";
                json list = json::array();
                std::set<int> used;
                auto count = rng.uniform_int(1, 3);
                for (std::uint64_t a = 0; a < count; ++a) {
                    const auto& app = apps[rng.uniform_int(0, 5)];
                    if (app.unix_only == windows || used.count(app.port)) continue;
                    used.insert(app.port);
                    list.push_back({{"name", app.name}, {"version", app.version}, {"ports", {app.port}}, {"banner", app.banner}});
                }
                m["applications"] = list;
                roles.push_back(k == 1 && n == 0 ? "workstation" : "server");
            }
            m["interfaces"] = ifaces;
            m["roles"] = roles;
            machines.push_back(std::move(m));
        }
    }
    auto attacker = o.machines_per_network > 1 ? std::string("net0-m1") : std::string("net0-m0");
    json templates = json::array({{{"id", "base"},
                                   {"files",
                                    {{"/etc/passwd", "root:x:0:0:root:/root:/bin/sh\nadmin:x:1000:1000::/home/admin:/bin/sh\n"},
                                     {"/etc/hostname", "host\n"},
                                     {"/etc/motd", "authorized use only\n"},
                                     {"/var/log/messages", ""}}}}});
    return {{"schema_version", kScenarioSchema},
            {"seed", o.seed},
            {"attacker", attacker},
            {"templates", templates},
            {"vulndb", json::array({{{"inline", std::string(sample_vulndb())}}})},
            {"signatures", {{"inline", std::string(sample_signatures())}}},
            {"networks", networks},
            {"machines", machines}};
}

} // namespace attacksim
