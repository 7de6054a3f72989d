#include "attacksim/actions.hpp"
#include "attacksim/error.hpp"
#include "attacksim/scenario.hpp"

#include "doctest.h"
#include "support.hpp"

using namespace attacksim;

namespace {

struct Step {
    std::string action;
    Params params;
};

/// Parameters for each information-gathering action in the lab, with any
/// prerequisite actions that must run first.
std::map<std::string, std::pair<std::vector<Step>, Params>> info_cases() {
    return {
        {"network_discovery", {{}, {{"range", "192.168.1.16/28"}}}},
        {"tcp_connect", {{}, {{"host", "192.168.1.20"}, {"port", "80"}}}},
        {"port_scan", {{}, {{"host", "192.168.1.20"}, {"ports", "21,25,80"}}}},
        {"banner_grab", {{}, {{"host", "192.168.1.20"}, {"port", "80"}}}},
        {"os_detect_by_banner",
         {{{"banner_grab", {{"host", "192.168.1.30"}, {"port", "25"}}}}, {{"host", "192.168.1.30"}}}},
        {"os_fingerprint", {{}, {{"host", "192.168.1.30"}}}},
        {"local_info_gathering", {{}, {}}},
    };
}

std::size_t action_results(const World& w) {
    std::size_t n = 0;
    for (const auto& e : w.events())
        if (e.category == EventCategory::ActionResult) ++n;
    return n;
}

} // namespace

TEST_SUITE("actions") {

TEST_CASE("every information-gathering action is covered") {
    auto lib = ActionLibrary::builtin();
    auto cases = info_cases();
    for (const auto& name : lib.names())
        if (lib.find(name)->info_gathering) CHECK_MESSAGE(cases.count(name), name);
}

TEST_CASE("second invocation with a satisfied goal costs nothing") {
    for (const auto& [name, c] : info_cases()) {
        CAPTURE(name);
        auto w = testing::lab();
        auto agent = w->local_agent();
        for (const auto& pre : c.first) REQUIRE(w->run_action(agent, pre.action, pre.params).succeeded());
        auto first = w->run_action(agent, name, c.second);
        REQUIRE(first.succeeded());
        CHECK(first.elapsed_ms > 0);
        auto now = w->now();
        auto second = w->run_action(agent, name, c.second);
        CHECK(second.succeeded());
        CHECK(second.elapsed_ms == 0);
        CHECK(second.noise_events.empty());
        CHECK(second.produced_assets.empty());
        CHECK(w->now() == now);
    }
}

TEST_CASE("elapsed time stays within the declared run-time bounds") {
    auto w = testing::lab(3);
    auto agent = w->local_agent();
    const auto& spec = w->actions().find("tcp_connect")->spec;
    for (int port : {21, 22, 25, 80, 443, 8080}) {
        auto out = w->run_action(agent, "tcp_connect", {{"host", "192.168.1.30"}, {"port", std::to_string(port)}});
        CHECK(out.elapsed_ms >= spec.run_time.min_ms);
        CHECK(out.elapsed_ms <= spec.run_time.max_ms + 3000);
    }
}

TEST_CASE("port scan classifies open, closed and filtered ports") {
    auto w = testing::lab();
    auto agent = w->local_agent();
    auto out = w->run_action(agent, "port_scan", {{"host", "192.168.1.30"}, {"ports", "24-26"}});
    REQUIRE(out.succeeded());
    CHECK(out.detail["open"] == nlohmann::json::array({25}));
    std::map<std::string, double> p;
    for (const auto& a : out.produced_assets) p[a.attr("port")] = a.probability;
    CHECK(p == std::map<std::string, double>{{"24", 0.0}, {"25", 1.0}, {"26", 0.0}});
}

TEST_CASE("banner-based detection asserts every hypothesis of the signature") {
    auto w = testing::lab();
    auto agent = w->local_agent();
    REQUIRE(w->run_action(agent, "banner_grab", {{"host", "192.168.1.30"}, {"port", "25"}}).succeeded());
    auto out = w->run_action(agent, "os_detect_by_banner", {{"host", "192.168.1.30"}});
    REQUIRE(out.succeeded());
    std::map<std::string, double> p;
    for (const auto& a : out.produced_assets) p[a.attr("os")] = a.probability;
    CHECK(p == std::map<std::string, double>{{"linux", 0.5}, {"solaris", 0.5}});
}

TEST_CASE("exploit installs an agent that pivots into the internal network") {
    auto w = testing::lab(1);
    auto root = w->local_agent();
    auto out = w->run_action(root, "run_exploit", {{"vuln", "iis-idq"}, {"host", "192.168.1.20"}, {"port", "80"}});
    REQUIRE(out.succeeded());
    auto agent = out.detail["agent"].get<AgentId>();
    CHECK(w->agent(agent).parent == root);
    CHECK(w->agent(agent).channel.kind == ChannelKind::ReuseConnection);
    CHECK(w->run_action(root, "tcp_connect", {{"host", "10.10.0.5"}, {"port", "22"}}).detail["result"] == "unreachable");
    auto scan = w->run_action(agent, "port_scan", {{"host", "10.10.0.5"}, {"ports", "22"}});
    CHECK(scan.detail["open"] == nlohmann::json::array({22}));
}

TEST_CASE("exploit with an unknown vulnerability fails without touching state") {
    auto w = testing::lab();
    auto hash = world_hash(*w);
    auto events = w->events().size();
    CHECK_THROWS_AS(w->start_action(w->local_agent(), "run_exploit",
                                    {{"vuln", "no-such"}, {"host", "192.168.1.20"}, {"port", "80"}}),
                    Error);
    CHECK(world_hash(*w) == hash);
    CHECK(w->events().size() == events);
}

TEST_CASE("bad requests are rejected up front") {
    auto w = testing::lab();
    auto a = w->local_agent();
    CHECK_THROWS_AS(w->start_action(a, "teleport", {}), Error);
    CHECK_THROWS_AS(w->start_action(99, "port_scan", {{"host", "192.168.1.20"}}), Error);
    CHECK_THROWS_AS(w->start_action(a, "port_scan", {}), Error);
    CHECK_THROWS_AS(w->start_action(a, "port_scan", {{"host", "not-an-address"}}), Error);
    CHECK_THROWS_AS(w->start_action(a, "port_scan", {{"host", "192.168.1.20"}, {"ports", "0-99999"}}), Error);
    CHECK_THROWS_AS(w->start_action(a, "network_discovery", {{"range", "10.0.0.0/24"}, {"mechanism", "smoke"}}), Error);
}

TEST_CASE("each completion emits exactly one result event carrying its request id") {
    auto w = testing::lab();
    auto a = w->local_agent();
    auto i1 = w->start_action(a, "tcp_connect", {{"host", "192.168.1.20"}, {"port", "80"}}, 11);
    auto i2 = w->start_action(a, "tcp_connect", {{"host", "192.168.1.30"}, {"port", "25"}}, 12);
    w->run_until([&] { return w->action_done(i1) && w->action_done(i2); });
    std::vector<std::uint64_t> ids;
    for (const auto& e : w->events())
        if (e.category == EventCategory::ActionResult) ids.push_back(e.payload["request_id"].get<std::uint64_t>());
    std::sort(ids.begin(), ids.end());
    CHECK(ids == std::vector<std::uint64_t>{11, 12});
    CHECK(action_results(*w) == 2);
    for (std::size_t i = 1; i < w->events().size(); ++i) {
        CHECK(w->events()[i].seq > w->events()[i - 1].seq);
        CHECK(w->events()[i].time >= w->events()[i - 1].time);
    }
}

TEST_CASE("cleanup removes cleanable noise of successful actions only") {
    auto w = testing::lab();
    auto a = w->local_agent();
    auto out = w->run_action(a, "banner_grab", {{"host", "192.168.1.20"}, {"port", "80"}});
    REQUIRE(out.succeeded());
    REQUIRE(out.noise_events.size() == 1);
    CHECK(out.noise_events[0].category == NoiseCategory::CleanableOnSuccess);
    auto removed = w->cleanup(a);
    CHECK(removed.size() == 1);
    CHECK(w->noise().events().empty());
    CHECK(w->cleanup(a).empty());
}

TEST_CASE("estimates reflect environment conditions") {
    auto w = testing::lab();
    auto a = w->local_agent();
    Params p{{"vuln", "iis-idq"}, {"host", "192.168.1.20"}, {"port", "80"}};
    auto blind = w->estimate(a, "run_exploit", p);
    CHECK(blind.success_probability > 0);
    CHECK(blind.success_probability < 1);
    REQUIRE(w->run_action(a, "banner_grab", {{"host", "192.168.1.20"}, {"port", "80"}}).succeeded());
    REQUIRE(w->run_action(a, "os_detect_by_banner", {{"host", "192.168.1.20"}}).succeeded());
    auto informed = w->estimate(a, "run_exploit", p);
    CHECK(informed.success_probability >= blind.success_probability);
    CHECK(informed.run_time.avg_ms == 5000);
}

TEST_CASE("local privilege escalation raises the agent's privilege") {
    for (std::uint64_t seed = 1; seed < 40; ++seed) {
        auto w = testing::lab(seed);
        auto root = w->local_agent();
        auto web = w->run_action(root, "run_exploit", {{"vuln", "iis-idq"}, {"host", "192.168.1.20"}, {"port", "80"}});
        if (!web.succeeded()) continue;
        auto mid = web.detail["agent"].get<AgentId>();
        auto db = w->run_action(mid, "run_exploit", {{"vuln", "sshd-chan"}, {"host", "10.10.0.5"}, {"port", "22"}});
        if (!db.succeeded()) continue;
        auto leaf = db.detail["agent"].get<AgentId>();
        CHECK(w->chain_to(leaf).size() == 3);
        auto up = w->run_action(leaf, "privilege_escalation", {{"vuln", "linux-ptrace"}});
        if (!up.succeeded()) continue;
        CHECK(w->agent(leaf).privilege == Privilege::Root);
        CHECK(w->run_action(leaf, "privilege_escalation", {{"vuln", "linux-ptrace"}}).elapsed_ms == 0);
        return;
    }
    FAIL("no seed produced a full escalation chain");
}

TEST_CASE("range and port expressions expand") {
    CHECK(expand_ports("22,80-82") == std::vector<std::uint16_t>{22, 80, 81, 82});
    CHECK(expand_range("10.0.0.0/30").size() == 2);
    CHECK(expand_range("10.0.0.7").size() == 1);
    CHECK_THROWS_AS(expand_ports("9-1"), Error);
}

}
