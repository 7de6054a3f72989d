#include "attacksim/error.hpp"
#include "attacksim/world.hpp"

#include "doctest.h"
#include "support.hpp"

using namespace attacksim;

namespace {

struct Chain {
    std::unique_ptr<World> w = testing::lab();
    AgentId root, mid, leaf;
    MachineId web, db;

    Chain() {
        root = w->local_agent();
        web = w->machine_named("web")->id;
        db = w->machine_named("db")->id;
        mid = w->install_agent(web, {ChannelKind::ConnectToTarget, 4444, -1}, root);
        leaf = w->install_agent(db, {ChannelKind::ConnectToTarget, 4444, -1}, mid);
    }
};

/// Fixed corpus covering every opcode, error paths included.
std::vector<SyscallRequest> corpus() {
    std::vector<SyscallRequest> v = {
        sys::get_info("os"),
        sys::get_info("users"),
        sys::get_info("apps"),
        sys::get_info("ifaces"),
        sys::get_info("hostname"),
        sys::get_info("privilege"),
        sys::get_info("bogus"),
        sys::exec_builtin("whoami"),
        sys::exec_builtin("ifconfig"),
        sys::exec_builtin("ps"),
        sys::exec_builtin("ls /etc"),
        sys::exec_builtin("cat /etc/passwd"),
        sys::exec_builtin("hostname"),
        sys::exec_builtin("rm -rf /"),
        sys::list_dir("/"),
        sys::list_dir("/etc"),
        sys::list_dir("/missing"),
        sys::open("/etc/passwd", sys::kOpenRead),
        sys::read(3, 8),
        sys::read(3, 1000),
        sys::read(3, 10),
        sys::close(3),
        sys::read(3, 10),
        sys::open("/tmp/loot", sys::kOpenWrite),
        sys::write(3, std::string("\0binary\xff", 8)),
        sys::close(3),
        sys::open("/tmp/loot", sys::kOpenAppend),
        sys::write(3, "more"),
        sys::close(3),
        sys::open("/tmp/loot", sys::kOpenRead),
        sys::read(3, 100),
        sys::close(3),
        sys::open("/nope", sys::kOpenRead),
        sys::socket(sys::kTcp),
        sys::connect(3, "10.10.0.1", 80),
        sys::recv(3, 100, true),
        sys::send(3, "GET / HTTP/1.0\r\n\r\n"),
        sys::close(3),
        sys::socket(sys::kTcp),
        sys::connect(3, "10.10.0.1", 81),
        sys::close(3),
        sys::socket(sys::kTcp),
        sys::bind(3, "0.0.0.0", 31337),
        sys::listen(3, 4),
        sys::accept(3, true),
        sys::socket(sys::kUdp),
        sys::send_to(4, "ping", "10.10.0.1", 53),
        sys::recv(4, 10, true),
        sys::socket(sys::kIcmp),
        sys::connect(5, "10.10.0.1", 0),
    };
    return v;
}

} // namespace

TEST_SUITE("agents") {

TEST_CASE("chain runs from the local agent to the leaf") {
    Chain c;
    CHECK(c.w->chain_to(c.leaf) == std::vector<AgentId>{c.root, c.mid, c.leaf});
    CHECK(c.w->agent(c.leaf).machine == c.db);
}

TEST_CASE("proxying through three agents equals direct execution on the terminal machine") {
    auto vectors = corpus();
    REQUIRE(vectors.size() == 50);
    Chain direct, proxied;
    const auto& leaf = direct.w->agent(direct.leaf);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        CAPTURE(i);
        auto expected = direct.w->syscall_now(leaf.machine, leaf.process, vectors[i]);
        auto got = proxied.w->proxy_syscall(proxied.w->chain_to(proxied.leaf), vectors[i]);
        CHECK(encode(got) == encode(expected));
        direct.w->run_until_idle(50);
        proxied.w->run_until_idle(50);
    }
}

TEST_CASE("a dead hop breaks the chain with its id") {
    Chain c;
    c.w->crash_machine(c.web);
    CHECK_FALSE(c.w->agent_alive(c.mid));
    CHECK_FALSE(c.w->agent_alive(c.leaf));
    try {
        c.w->proxy_syscall({c.root, c.mid, c.leaf}, sys::get_info("os"));
        FAIL("expected a broken chain");
    } catch (const ChainBrokenError& e) {
        CHECK(e.dead_hop() == c.mid);
    }
}

TEST_CASE("chains must follow parent links") {
    Chain c;
    CHECK_THROWS_AS(c.w->proxy_syscall({c.root, c.leaf}, sys::get_info("os")), Error);
    CHECK_THROWS_AS(c.w->proxy_syscall({c.mid, c.leaf}, sys::get_info("os")), Error);
    CHECK_THROWS_AS(c.w->proxy_syscall({}, sys::get_info("os")), Error);
}

TEST_CASE("installation requires a live parent and a channel") {
    Chain c;
    auto mail = c.w->machine_named("mail")->id;
    CHECK_THROWS_AS(c.w->install_agent(mail, {ChannelKind::ConnectToTarget, 4444, -1}, 99), Error);
    CHECK_THROWS_AS(c.w->install_agent(c.db, {ChannelKind::ConnectToTarget, 4444, -1}, c.root), Error);
    CHECK_THROWS_AS(c.w->install_agent(mail, {ChannelKind::Local, 0, -1}, c.root), Error);
    c.w->crash_machine(mail);
    CHECK_THROWS_AS(c.w->install_agent(mail, {ChannelKind::ConnectToTarget, 4444, -1}, c.root), Error);
}

TEST_CASE("agent presence is reflected in environment knowledge") {
    Chain c;
    auto present = [&](AgentId id) {
        double p = -1;
        c.w->env().for_each(AssetKind::AgentPresence, [&](const Asset& a) {
            if (a.attr("agent") == std::to_string(id)) p = a.probability;
        });
        return p;
    };
    CHECK(present(c.leaf) == 1.0);
    c.w->set_privilege(c.leaf, Privilege::Root);
    CHECK(c.w->agent(c.leaf).privilege == Privilege::Root);
    c.w->crash_machine(c.db);
    CHECK(present(c.leaf) == 0.0);
    CHECK(c.w->agent_alive(c.mid));
}

TEST_CASE("shell commands run on the agent's machine") {
    Chain c;
    CHECK(c.w->agent_shell(c.leaf, "hostname").find("db") != std::string::npos);
    CHECK(c.w->agent_shell(c.mid, "hostname").find("web") != std::string::npos);
    CHECK_THROWS_AS(c.w->agent_shell(c.leaf, "format c:"), Error);
}

}
