// Acceptance runner: one PASS/FAIL line per primary criterion, exit status
// nonzero when any fails.

#include "attacksim/actions.hpp"
#include "attacksim/error.hpp"
#include "attacksim/exploitdb.hpp"
#include "attacksim/scenario.hpp"
#include "attacksim/task.hpp"
#include "attacksim/vfs.hpp"
#include "attacksim/world.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace attacksim;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    if (!pass) ++failures;
}

void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
        auto [pass, detail] = body();
        report(name, pass, detail);
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

std::unique_ptr<World> lab(std::uint64_t seed = 1) {
    LoadOptions o;
    o.seed = seed;
    return load_scenario_file(std::filesystem::path(ATTACKSIM_TEST_DATA) / "lab.json", o);
}

HostProfile nt4_iis() {
    HostProfile h;
    h.os = {"windows", "i386", "nt4", "server", "6"};
    ApplicationInstance iis;
    iis.name = "Internet Information Services";
    iis.version_major = "5";
    iis.version_minor = "0";
    iis.ports = {80};
    h.applications.push_back(iis);
    ApplicationInstance smb;
    smb.name = "smb";
    smb.version_major = "1";
    smb.ports = {445};
    h.applications.push_back(smb);
    return h;
}

std::pair<bool, std::string> exploit_statistics() {
    auto db = parse_vulndb(sample_vulndb());
    const auto& entry = *db.find("iis-idq");
    auto host = nt4_iis();
    // Analytic frequencies from the result block: draws in order, the first
    // hit ends resolution.
    double p_crash = 0.10, p_agent = (1 - 0.10) * 0.75, p_none = 1 - p_crash - p_agent;
    const int trials = 100000;
    SeededRng rng(20060401);
    int crash = 0, agent = 0, none = 0, other = 0;
    auto t0 = Clock::now();
    for (int i = 0; i < trials; ++i) {
        switch (resolve_exploit(entry, host, &host.applications[0], rng).kind) {
        case OutcomeKind::CrashApp: ++crash; break;
        case OutcomeKind::AgentInstalled: ++agent; break;
        case OutcomeKind::None: ++none; break;
        default: ++other;
        }
    }
    double secs = seconds_since(t0);
    double fc = double(crash) / trials, fa = double(agent) / trials, fn = double(none) / trials;
    bool pass = std::fabs(fc - p_crash) <= 0.01 && std::fabs(fa - p_agent) <= 0.01 && std::fabs(fn - p_none) <= 0.01 &&
                other == 0 && secs < 10;
    return {pass, fmt("crash-app=%.4f (0.100) agent=%.4f (0.675) none=%.4f (0.225) other=%d in %.2fs", fc, fa, fn,
                      other, secs)};
}

std::pair<bool, std::string> requirement_matching() {
    auto db = parse_vulndb(sample_vulndb());
    const auto& e = *db.find("iis-idq");
    struct Row {
        const char* perturbed;
        bool req0, req1, req2;
    };
    const Row table[] = {
        {"none", true, true, true},
        {"os name", false, true, false},
        {"arch", false, true, false},
        {"windows version", false, true, false},
        {"edition", false, true, false},
        {"service pack", false, true, false},
        {"application name", true, false, false},
        {"application major", true, false, false},
        {"not the target", true, false, false},
    };
    int mismatches = 0;
    std::string first;
    for (const auto& row : table) {
        auto h = nt4_iis();
        const ApplicationInstance* target = &h.applications[0];
        std::string p = row.perturbed;
        if (p == "os name") h.os.name = "linux";
        if (p == "arch") h.os.arch = "sparc";
        if (p == "windows version") h.os.version = "2000";
        if (p == "edition") h.os.edition = "workstation";
        if (p == "service pack") h.os.servicepack = "5";
        if (p == "application name") h.applications[0].name = "Apache";
        if (p == "application major") h.applications[0].version_major = "6";
        if (p == "not the target") target = &h.applications[1];
        bool ok = eval_requirement(e, "req0", h, target) == row.req0 &&
                  eval_requirement(e, "req1", h, target) == row.req1 &&
                  eval_requirement(e, "req2", h, target) == row.req2;
        if (!ok && mismatches++ == 0) first = p;
    }
    return {mismatches == 0, mismatches == 0 ? "9 rows (base + 8 perturbations) match"
                                             : fmt("%d rows differ, first '%s'", mismatches, first.c_str())};
}

std::size_t peak_rss_kb() {
    std::ifstream in("/proc/self/status");
    for (std::string line; std::getline(in, line);)
        if (line.rfind("VmHWM:", 0) == 0) return std::stoul(line.substr(6));
    return 0;
}

std::pair<bool, std::string> benchmark() {
    GeneratorOptions g;
    g.networks = 100;
    g.machines_per_network = 10;
    g.seed = 7;
    auto t_load = Clock::now();
    auto w = load_scenario(generate_scenario(g));
    double load_s = seconds_since(t_load);
    auto agent = w->local_agent();

    auto start_syscalls = w->totals().syscalls_executed;
    auto t0 = Clock::now();
    std::size_t open_ports = 0, banners = 0;
    for (int k = 1; k <= 10; ++k) {
        auto host = "10.1.0." + std::to_string(k);
        auto scan = w->run_action(agent, "port_scan", {{"host", host}, {"ports", "1-1024"}});
        if (!scan.succeeded()) continue;
        for (const auto& port : scan.detail.at("open")) {
            ++open_ports;
            auto p = std::to_string(port.get<int>());
            if (w->run_action(agent, "banner_grab", {{"host", host}, {"port", p}}).succeeded()) ++banners;
        }
    }
    double wall = seconds_since(t0);
    auto syscalls = w->totals().syscalls_executed - start_syscalls;
    double rate = double(syscalls) / wall;
    double rss_mb = double(peak_rss_kb()) / 1024.0;
    bool pass = rate >= 700 && wall <= 120 && rss_mb < 2048 && open_ports > 0 && banners > 0;
    return {pass, fmt("1000 machines loaded in %.2fs; 10 hosts x 1024 ports: %zu open, %zu banners; %llu syscalls in "
                      "%.2fs = %.0f syscalls/s (>= 700), wall <= 120s, peak RSS %.0f MB (< 2048)",
                      load_s, open_ports, banners, static_cast<unsigned long long>(syscalls), wall, rate, rss_mb)};
}

std::pair<bool, std::string> copy_on_write() {
    auto t = TemplateFS::from_files("base", {{"/etc/passwd", "root:x:0:0\n"}, {"/var/log/messages", ""}});
    auto before = t->tree_hash();
    FileCache cache;
    std::vector<MachineFS> machines(1000, MachineFS(t, &cache));
    for (int i = 0; i < 10; ++i) machines[static_cast<std::size_t>(i) * 100 + 3].write("/var/log/messages", "x\n");
    std::size_t copies = 0;
    for (const auto& m : machines) copies += m.private_copies();

    auto t2 = TemplateFS::from_files("base", {{"/etc/passwd", "root:x:0:0\n"}});
    FileCache cache2;
    std::vector<MachineFS> readers(1000, MachineFS(t2, &cache2));
    bool contents = true;
    for (auto& m : readers) contents = contents && m.read("/etc/passwd") == "root:x:0:0\n";
    auto reads = t2->store().reads();
    bool pass = copies == 10 && t->tree_hash() == before && reads == 1 && contents;
    return {pass, fmt("%zu private copies (10), template hash %s, %llu backing-store reads for 1000 reads (1)", copies,
                      t->tree_hash() == before ? "unchanged" : "CHANGED", static_cast<unsigned long long>(reads))};
}

std::string attack_transcript() {
    auto w = lab(1);
    auto a = w->local_agent();
    w->run_action(a, "network_discovery", {{"range", "192.168.1.0/27"}});
    w->run_action(a, "port_scan", {{"host", "192.168.1.20"}, {"ports", "21,22,25,80,443"}});
    w->run_action(a, "banner_grab", {{"host", "192.168.1.20"}, {"port", "80"}});
    w->run_action(a, "os_detect_by_banner", {{"host", "192.168.1.20"}});
    auto x = w->run_action(a, "run_exploit", {{"vuln", "iis-idq"}, {"host", "192.168.1.20"}, {"port", "80"}});
    if (x.succeeded()) {
        auto pivot = x.detail.at("agent").get<AgentId>();
        w->run_action(pivot, "network_discovery", {{"range", "10.10.0.0/29"}});
        w->run_action(pivot, "port_scan", {{"host", "10.10.0.5"}, {"ports", "22,80"}});
    }
    std::string out;
    for (const auto& e : w->events()) out += to_json(e).dump() + "\n";
    return out;
}

std::pair<bool, std::string> determinism() {
    auto a = attack_transcript(), b = attack_transcript(), c = attack_transcript();
    bool pivoted = a.find("10.10.0.5") != std::string::npos;
    bool pass = a == b && b == c && pivoted;
    return {pass, fmt("3 transcripts of %zu bytes %s; pivot scan %s", a.size(), (a == b && b == c) ? "identical" : "DIFFER",
                      pivoted ? "reached the internal network" : "MISSING")};
}

struct Pair {
    World w{5};
    MachineId alice = 0, bob = 0;
    ProcessId pa = 0, pb = 0;

    Pair() {
        auto a = w.add_segment("a", SegmentKind::Switch, Cidr::from_string("10.0.1.0/24"));
        auto b = w.add_segment("b", SegmentKind::Switch, Cidr::from_string("10.0.2.0/24"));
        MachineSpec r;
        r.name = "router";
        r.roles.router = true;
        r.interfaces = {{Ipv4::from_string("10.0.1.1"), a}, {Ipv4::from_string("10.0.2.1"), b}};
        w.add_machine(r);
        MachineSpec x;
        x.name = "alice";
        x.interfaces = {{Ipv4::from_string("10.0.1.10"), a}};
        alice = w.add_machine(x);
        MachineSpec y;
        y.name = "bob";
        y.interfaces = {{Ipv4::from_string("10.0.2.20"), b}};
        bob = w.add_machine(y);
        pa = w.create_process(alice, "client");
        pb = w.create_process(bob, "server");
    }

    SyscallResponse on_a(const SyscallRequest& r) { return w.syscall_now(alice, pa, r); }
    SyscallResponse on_b(const SyscallRequest& r) { return w.syscall_now(bob, pb, r); }

    std::pair<std::int64_t, std::int64_t> connect(std::int64_t port) {
        auto l = on_b(sys::socket(sys::kTcp)).int_result(0);
        on_b(sys::bind(l, "0.0.0.0", port));
        on_b(sys::listen(l, 8));
        auto c = on_a(sys::socket(sys::kTcp)).int_result(0);
        if (!on_a(sys::connect(c, "10.0.2.20", port)).ok()) throw std::runtime_error("connect failed");
        auto s = on_b(sys::accept(l, true));
        if (!s.ok()) throw std::runtime_error("accept failed");
        on_b(sys::close(l));
        return {c, s.int_result(0)};
    }
};

std::pair<bool, std::string> socketdirect() {
    Pair p;
    auto [c, s] = p.connect(9000);
    auto before = p.w.route_calls();
    int bad = 0;
    for (int i = 0; i < 10000; ++i) {
        auto msg = "m" + std::to_string(i);
        p.on_a(sys::send(c, msg));
        if (p.on_b(sys::recv(s, 64, true)).bytes_result(0) != msg) ++bad;
    }
    auto route_delta = p.w.route_calls() - before;

    SeededRng rng(99);
    int stream_failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto [sc, ss] = p.connect(20000 + trial);
        std::string sent, received;
        auto chunks = rng.uniform_int(1, 12);
        for (std::uint64_t i = 0; i < chunks; ++i) {
            std::string piece(rng.uniform_int(0, 60), '\0');
            for (auto& ch : piece) ch = static_cast<char>(rng.uniform_int(0, 255));
            sent += piece;
            p.on_a(sys::send(sc, piece));
            if (rng.uniform_int(0, 1)) {
                auto r = p.on_b(sys::recv(ss, static_cast<std::int64_t>(rng.uniform_int(1, 40)), true));
                if (r.ok()) received += r.bytes_result(0);
            }
        }
        p.on_a(sys::close(sc));
        for (;;) {
            auto r = p.on_b(sys::recv(ss, static_cast<std::int64_t>(rng.uniform_int(1, 40)), true));
            if (!r.ok() || r.bytes_result(0).empty()) break;
            received += r.bytes_result(0);
        }
        if (received != sent) ++stream_failures;
        p.on_b(sys::close(ss));
    }
    bool pass = route_delta == 0 && bad == 0 && stream_failures == 0;
    return {pass, fmt("route calls +%llu over 10^4 transfers (%d corrupted); %d of 1000 segmentation cases differ",
                      static_cast<unsigned long long>(route_delta), bad, stream_failures)};
}

std::vector<SyscallRequest> chain_corpus() {
    std::vector<SyscallRequest> v;
    for (const char* what : {"os", "users", "apps", "ifaces", "hostname", "privilege", "nothing"})
        v.push_back(sys::get_info(what));
    for (const char* cmd : {"whoami", "ifconfig", "ps", "ls /etc", "cat /etc/passwd", "hostname", "reboot"})
        v.push_back(sys::exec_builtin(cmd));
    for (const char* dir : {"/", "/etc", "/tmp", "/absent"}) v.push_back(sys::list_dir(dir));
    v.push_back(sys::open("/etc/passwd", sys::kOpenRead));
    v.push_back(sys::read(3, 5));
    v.push_back(sys::read(3, 4096));
    v.push_back(sys::close(3));
    v.push_back(sys::close(3));
    v.push_back(sys::open("/tmp/x", sys::kOpenWrite));
    v.push_back(sys::write(3, std::string("a\0b\xfe", 4)));
    v.push_back(sys::close(3));
    v.push_back(sys::open("/tmp/x", sys::kOpenAppend));
    v.push_back(sys::write(3, "tail"));
    v.push_back(sys::close(3));
    v.push_back(sys::open("/tmp/x", sys::kOpenRead));
    v.push_back(sys::read(3, 64));
    v.push_back(sys::close(3));
    v.push_back(sys::open("/no/such", sys::kOpenRead));
    v.push_back(sys::socket(sys::kTcp));
    v.push_back(sys::connect(3, "10.10.0.1", 80));
    v.push_back(sys::recv(3, 64, true));
    v.push_back(sys::send(3, "HEAD / HTTP/1.0\r\n\r\n"));
    v.push_back(sys::close(3));
    v.push_back(sys::socket(sys::kTcp));
    v.push_back(sys::connect(3, "10.10.0.1", 82));
    v.push_back(sys::close(3));
    v.push_back(sys::socket(sys::kTcp));
    v.push_back(sys::bind(3, "0.0.0.0", 4000));
    v.push_back(sys::listen(3, 2));
    v.push_back(sys::accept(3, true));
    v.push_back(sys::socket(sys::kUdp));
    v.push_back(sys::send_to(4, "hi", "10.10.0.1", 53));
    v.push_back(sys::recv(4, 8, true));
    v.push_back(sys::socket(sys::kIcmp));
    v.push_back(sys::connect(5, "10.10.0.1", 0));
    return v;
}

struct ChainWorld {
    std::unique_ptr<World> w = lab(1);
    AgentId leaf = kNoAgent;

    ChainWorld() {
        auto mid = w->install_agent(w->machine_named("web")->id, {ChannelKind::ConnectToTarget, 4444, -1},
                                    w->local_agent());
        leaf = w->install_agent(w->machine_named("db")->id, {ChannelKind::ConnectToTarget, 4444, -1}, mid);
    }
};

std::pair<bool, std::string> chain_transparency() {
    auto corpus = chain_corpus();
    ChainWorld direct, proxied;
    auto chain = proxied.w->chain_to(proxied.leaf);
    const auto& leaf = direct.w->agent(direct.leaf);
    int mismatches = 0;
    for (const auto& req : corpus) {
        auto expected = direct.w->syscall_now(leaf.machine, leaf.process, req);
        auto got = proxied.w->proxy_syscall(chain, req);
        if (encode(got) != encode(expected)) ++mismatches;
        direct.w->run_until_idle(50);
        proxied.w->run_until_idle(50);
    }
    bool pass = corpus.size() == 50 && chain.size() == 3 && mismatches == 0;
    return {pass, fmt("%zu vectors through a %zu-agent chain, %d mismatches", corpus.size(), chain.size(), mismatches)};
}

std::pair<bool, std::string> zero_cost() {
    struct Case {
        const char* action;
        Params params;
        std::vector<std::pair<const char*, Params>> before;
    };
    const std::vector<Case> cases = {
        {"network_discovery", {{"range", "192.168.1.16/28"}}, {}},
        {"tcp_connect", {{"host", "192.168.1.20"}, {"port", "80"}}, {}},
        {"port_scan", {{"host", "192.168.1.20"}, {"ports", "21,25,80"}}, {}},
        {"banner_grab", {{"host", "192.168.1.30"}, {"port", "25"}}, {}},
        {"os_detect_by_banner", {{"host", "192.168.1.30"}}, {{"banner_grab", {{"host", "192.168.1.30"}, {"port", "25"}}}}},
        {"os_fingerprint", {{"host", "192.168.1.30"}}, {}},
        {"local_info_gathering", {}, {}},
    };
    auto lib = ActionLibrary::builtin();
    std::size_t library_info = 0;
    for (const auto& name : lib.names())
        if (lib.find(name)->info_gathering) ++library_info;
    std::string failed;
    for (const auto& c : cases) {
        auto w = lab(1);
        auto agent = w->local_agent();
        for (const auto& [name, params] : c.before) w->run_action(agent, name, params);
        auto first = w->run_action(agent, c.action, c.params);
        auto second = w->run_action(agent, c.action, c.params);
        if (!first.succeeded() || !second.succeeded() || second.elapsed_ms != 0 || !second.noise_events.empty())
            failed += std::string(failed.empty() ? "" : ",") + c.action;
    }
    bool pass = failed.empty() && library_info == cases.size();
    return {pass, fmt("%zu of %zu information-gathering actions cost nothing on repeat%s", cases.size(), library_info,
                      failed.empty() ? "" : (" except " + failed).c_str())};
}

SimTask spin() {
    for (;;) co_await syscall(sys::get_info("os"));
}

ExecResult complete_all(const ThreadInfo&, const SyscallRequest&) { return ExecResult::completed({}); }

std::pair<bool, std::string> scheduler() {
    Scheduler s;
    SeededRng rng(3);
    for (MachineId m = 1; m <= 20; ++m) {
        auto n = rng.uniform_int(1, 4);
        for (std::uint64_t i = 0; i < n; ++i) s.spawn(m, 1 + i % 2, spin());
    }
    for (int r = 0; r < 100; ++r) s.run_round(complete_all);
    int unfair = 0;
    for (MachineId m = 1; m <= 20; ++m)
        if (s.runs_of(m) != 100) ++unfair;

    World w(1);
    auto seg = w.add_segment("lan", SegmentKind::Switch, Cidr::from_string("10.0.0.0/24"));
    for (int i = 0; i < 10; ++i) {
        MachineSpec spec;
        spec.name = "m" + std::to_string(i);
        spec.interfaces = {{Ipv4::from_string("10.0.0." + std::to_string(i + 1)), seg}};
        auto m = w.add_machine(spec);
        w.spawn(m, w.create_process(m, "spin"), spin());
    }
    int bursts = 3;
    w.set_sleeper([&](double) {
        if (bursts-- > 0)
            for (int i = 0; i < 20; ++i) w.inbox().push([] {});
    });
    w.run_until([&] { return w.sleeps() >= 68; });
    // Expected trace: 512 doubles per burst, then walks back by 64 to the floor.
    std::vector<std::uint64_t> expected = {1024, 2048, 4096};
    while (expected.back() > 64) expected.push_back(expected.back() - 64);
    while (expected.size() < 68) expected.push_back(64);
    bool trace_ok = std::vector<std::uint64_t>(w.sleep_trace().begin(), w.sleep_trace().begin() + 68) == expected;
    return {unfair == 0 && trace_ok, fmt("%d of 20 machines off 100 runs; adaptation trace %s", unfair,
                                         trace_ok ? "1024,2048,4096 then -64 steps to 64" : "MISMATCH")};
}

} // namespace

int main() {
    criterion("exploit resolution statistics", exploit_statistics);
    criterion("requirement matching", requirement_matching);
    criterion("benchmark at 1000 machines", benchmark);
    criterion("copy-on-write frugality", copy_on_write);
    criterion("determinism", determinism);
    criterion("socketdirect invariant", socketdirect);
    criterion("chain transparency", chain_transparency);
    criterion("zero-cost rule", zero_cost);
    criterion("scheduler fairness and adaptation", scheduler);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
