#include "attacksim/bridge.hpp"
#include "attacksim/console.hpp"
#include "attacksim/control.hpp"
#include "attacksim/error.hpp"
#include "attacksim/task.hpp"

#include "doctest.h"
#include "httplib.h"
#include "support.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

using namespace attacksim;
using nlohmann::json;

namespace {

json lab_request() { return {{"path", testing::data_path("lab.json").string()}}; }

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string run_script(const std::string& script) {
    Controller c;
    c.load_scenario(lab_request());
    std::ostringstream out;
    Console console(c, out);
    std::istringstream in(script);
    console.run(in, true);
    return out.str();
}

int connect_loopback(std::uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    return fd;
}

void pump_until(World& w, const std::function<bool()>& done) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
    while (!done() && std::chrono::steady_clock::now() < deadline)
        if (!w.step()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
}

SimTask collector(std::uint16_t port, std::string& out, bool& closed) {
    auto l = (co_await syscall(sys::socket(sys::kTcp))).int_result(0);
    co_await syscall(sys::bind(l, "0.0.0.0", port));
    co_await syscall(sys::listen(l, 4));
    auto c = (co_await syscall(sys::accept(l))).int_result(0);
    co_await syscall(sys::send(c, "ready\n"));
    for (;;) {
        auto r = co_await syscall(sys::recv(c, 7));
        if (!r.ok() || r.bytes_result(0).empty()) break;
        out += r.bytes_result(0);
    }
    closed = true;
}

} // namespace

TEST_SUITE("control") {

TEST_CASE("fresh world exposes only the local agent") {
    Controller c;
    c.load_scenario(lab_request());
    auto env = c.query_env();
    REQUIRE(env.size() == 1);
    CHECK(env[0]["kind"] == "AgentPresence");
    CHECK(c.list_agents().size() == 1);
}

TEST_CASE("execute_action returns at once and completion arrives as one event") {
    Controller c;
    c.load_scenario(lab_request());
    auto before = c.events_since(0).size();
    auto r = c.execute_action({{"agent", 1}, {"action", "port_scan"},
                               {"params", {{"host", "192.168.1.20"}, {"ports", "80,81"}}}, {"request_id", 77}});
    CHECK(r["request_id"] == 77);
    CHECK(c.action_status(r["instance"].get<ActionInstanceId>())["status"] == "running");
    auto out = c.wait(r["instance"].get<ActionInstanceId>());
    CHECK(out.succeeded());
    int results = 0;
    for (const auto& e : c.events_since(before)) {
        if (e.category != EventCategory::ActionResult) continue;
        ++results;
        CHECK(e.payload["request_id"] == 77);
        CHECK(e.payload["status"] == "success");
    }
    CHECK(results == 1);
    auto all = c.events_since(0);
    CHECK(c.events_since(3).size() == all.size() - 2);
}

TEST_CASE("errors map onto transport statuses") {
    Controller c;
    c.load_scenario(lab_request());
    auto status_of = [&](const json& req) {
        try {
            c.execute_action(req);
        } catch (const Error& e) {
            return http_status(e);
        }
        return 200;
    };
    CHECK(status_of({{"agent", 42}, {"action", "port_scan"}, {"params", {{"host", "192.168.1.20"}}}}) == 404);
    CHECK(status_of({{"agent", 1}, {"action", "teleport"}}) == 404);
    CHECK(status_of({{"agent", 1}, {"action", "port_scan"}, {"params", {{"host", "x"}}}}) == 400);
    CHECK(status_of({{"agent", 1}, {"action", "port_scan"}, {"params", "oops"}}) == 400);
    CHECK(status_of({{"action", "port_scan"}}) == 400);
}

TEST_CASE("responses never reveal undiscovered machines") {
    Controller c;
    c.load_scenario(lab_request());
    auto leaks = [&](const json& j) {
        auto s = j.dump();
        return s.find("10.10.0.5") != std::string::npos || s.find("\"db\"") != std::string::npos;
    };
    CHECK_FALSE(leaks(c.query_env()));
    CHECK_FALSE(leaks(c.list_agents()));
    CHECK_FALSE(leaks(c.status()));
    json events = json::array();
    for (const auto& e : c.events_since(0)) events.push_back(to_json(e));
    CHECK_FALSE(leaks(events));
    auto id = c.execute_action({{"agent", 1}, {"action", "network_discovery"}, {"params", {{"range", "10.10.0.0/29"}}}});
    c.wait(id["instance"].get<ActionInstanceId>());
    auto env = c.query_env().dump();
    CHECK(env.find("\"target\":\"10.10.0.5\"") != std::string::npos);
    CHECK(env.find("\"db\"") == std::string::npos);
}

TEST_CASE("HTTP endpoints serve the API and the event stream") {
    Controller c;
    ControlServer server(c);
    server.start("127.0.0.1", 0);
    httplib::Client http("127.0.0.1", server.port());

    auto loaded = http.Post("/api/load_scenario", lab_request().dump(), "application/json");
    REQUIRE(loaded);
    CHECK(loaded->status == 200);
    auto env = http.Get("/api/env");
    REQUIRE(env);
    CHECK(json::parse(env->body).size() == 1);

    c.start_engine();
    auto started = http.Post("/api/actions",
                             json{{"agent", 1}, {"action", "tcp_connect"}, {"params", {{"host", "192.168.1.20"}, {"port", 80}}}}
                                 .dump(),
                             "application/json");
    REQUIRE(started);
    CHECK(started->status == 202);
    auto instance = json::parse(started->body)["instance"].get<std::uint64_t>();
    json status;
    for (int i = 0; i < 5000; ++i) {
        auto r = http.Get("/api/actions/" + std::to_string(instance));
        REQUIRE(r);
        status = json::parse(r->body);
        if (status["status"] != "running") break;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    CHECK(status["status"] == "success");
    c.stop_engine();

    auto events = http.Get("/api/events?from=0");
    REQUIRE(events);
    std::istringstream lines(events->body);
    std::size_t n = 0;
    std::uint64_t last = 0;
    for (std::string line; std::getline(lines, line); ++n) {
        auto seq = json::parse(line)["seq"].get<std::uint64_t>();
        CHECK(seq > last);
        last = seq;
    }
    CHECK(n == c.events_since(0).size());

    auto missing = http.Get("/api/actions/999");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body)["error"] == "not-found");
    auto bad = http.Post("/api/actions", "{not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    auto unknown = http.Post("/api/actions", json{{"agent", 9}, {"action", "port_scan"}}.dump(), "application/json");
    REQUIRE(unknown);
    CHECK(unknown->status == 404);

    auto snap = http.Get("/api/snapshot");
    REQUIRE(snap);
    auto restored = http.Post("/api/restore", snap->body, "application/json");
    REQUIRE(restored);
    CHECK(restored->status == 200);
    server.stop();
}

TEST_CASE("console env on a fresh world prints one line") {
    auto out = run_script("env\n");
    CHECK(out == "> env\nAgentPresence agent=1 host=192.168.1.10 privilege=root p=1\n");
}

TEST_CASE("console reports unknown commands and bad exploits without changing state") {
    Controller c;
    c.load_scenario(lab_request());
    std::ostringstream out;
    Console console(c, out);
    auto hash = c.locked([&] { return world_hash(c.world()); });
    CHECK(console.execute("exploit bogus 192.168.1.20 80"));
    CHECK(out.str().rfind("error: not-found", 0) == 0);
    CHECK(console.execute("frobnicate"));
    CHECK(out.str().find("unknown command 'frobnicate'") != std::string::npos);
    CHECK(console.execute("scan"));
    CHECK(out.str().find("usage: scan") != std::string::npos);
    CHECK(c.locked([&] { return world_hash(c.world()); }) == hash);
    CHECK_FALSE(console.execute("quit"));
}

TEST_CASE("the scripted attack reproduces the golden transcript") {
    auto script = read_text(testing::data_path("attack.cmds"));
    auto golden = read_text(testing::data_path("attack.golden"));
    CHECK(run_script(script) == golden);
}

TEST_CASE("bytes from a real client reach the simulated listener unchanged") {
    auto w = testing::lab();
    auto mail = w->machine_named("mail")->id;
    std::string received;
    bool closed = false;
    w->spawn(mail, w->create_process(mail, "collector"), collector(7000, received, closed));
    w->run_until_idle(20);
    PortBridge bridge(*w, Ipv4::from_string("192.168.1.30"), 7000);
    bridge.start();
    int fd = connect_loopback(bridge.port());
    std::string payload;
    for (int i = 0; i < 200; ++i) payload += "line " + std::to_string(i) + "\n";
    REQUIRE(::write(fd, payload.data(), payload.size()) == static_cast<ssize_t>(payload.size()));
    pump_until(*w, [&] { return received.size() >= payload.size(); });
    char buf[16] = {};
    auto n = ::read(fd, buf, 6);
    CHECK(std::string(buf, n > 0 ? static_cast<std::size_t>(n) : 0) == "ready\n");
    ::close(fd);
    pump_until(*w, [&] { return closed; });
    CHECK(received == payload);
    CHECK(closed);
    bridge.stop();
}

TEST_CASE("framed syscalls from a real client are proxied to the agent") {
    auto w = testing::lab();
    SyscallBridge bridge(*w, w->local_agent());
    bridge.start();
    int fd = connect_loopback(bridge.port());
    auto req = frame(encode(sys::get_info("hostname")));
    REQUIRE(::write(fd, req.data(), req.size()) == static_cast<ssize_t>(req.size()));
    std::string buffer;
    std::optional<std::string> reply;
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
    while (!reply && std::chrono::steady_clock::now() < deadline) {
        w->step();
        char chunk[256];
        timeval tv{0, 1000};
        setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        auto n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n > 0) buffer.append(chunk, static_cast<std::size_t>(n));
        reply = take_frame(buffer);
    }
    REQUIRE(reply);
    auto response = decode_response(*reply);
    const auto& a = w->agent(w->local_agent());
    CHECK(response == w->syscall_now(a.machine, a.process, sys::get_info("hostname")));
    ::close(fd);
    bridge.stop();
}

}
