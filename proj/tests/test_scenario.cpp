#include "attacksim/error.hpp"
#include "attacksim/scenario.hpp"

#include "doctest.h"
#include "support.hpp"

#include <fstream>

using namespace attacksim;
using nlohmann::json;

namespace {

json lab_doc() {
    std::ifstream in(testing::data_path("lab.json"));
    return json::parse(in);
}

std::string error_of(const json& doc) {
    LoadOptions o;
    o.base_dir = ATTACKSIM_TEST_DATA;
    try {
        load_scenario(doc, o);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

std::string dump_events(const World& w) {
    std::string out;
    for (const auto& e : w.events()) out += to_json(e).dump() + "\n";
    return out;
}

std::string scripted_attack(std::uint64_t seed) {
    auto w = testing::lab(seed);
    auto a = w->local_agent();
    w->run_action(a, "network_discovery", {{"range", "192.168.1.16/28"}});
    w->run_action(a, "port_scan", {{"host", "192.168.1.20"}, {"ports", "79-81"}});
    w->run_action(a, "banner_grab", {{"host", "192.168.1.20"}, {"port", "80"}});
    w->run_action(a, "os_detect_by_banner", {{"host", "192.168.1.20"}});
    auto x = w->run_action(a, "run_exploit", {{"vuln", "iis-idq"}, {"host", "192.168.1.20"}, {"port", "80"}});
    if (x.succeeded()) w->run_action(x.detail["agent"].get<AgentId>(), "port_scan", {{"host", "10.10.0.5"}, {"ports", "22"}});
    return dump_events(*w);
}

} // namespace

TEST_SUITE("scenario") {

TEST_CASE("the lab loads with its attacker agent") {
    auto w = testing::lab();
    CHECK(w->machines().size() == 4);
    CHECK(w->agents().size() == 1);
    CHECK(w->machine(w->agent(w->local_agent()).machine).name == "attacker");
    CHECK(w->env().size() == 1);
    CHECK(w->vulndb().find("iis-idq") != nullptr);
}

TEST_CASE("validation errors point at the offending value") {
    auto doc = lab_doc();
    auto with = [&](auto edit) {
        auto d = doc;
        edit(d);
        return error_of(d);
    };
    CHECK(with([](json& d) { d["schema_version"] = 2; }).rfind("/schema_version:", 0) == 0);
    CHECK(with([](json& d) { d.erase("seed"); }).rfind("/seed:", 0) == 0);
    CHECK(with([](json& d) { d["machines"][1]["interfaces"][0]["address"] = "192.168.1.10"; })
              .rfind("/machines/1/interfaces/0/address: duplicate address", 0) == 0);
    CHECK(with([](json& d) { d["machines"][2]["interfaces"][0]["address"] = "10.9.9.9"; })
              .rfind("/machines/2/interfaces/0/address:", 0) == 0);
    CHECK(with([](json& d) { d["machines"][3]["interfaces"][0]["network"] = "mars"; })
              .rfind("/machines/3/interfaces/0/network:", 0) == 0);
    CHECK(with([](json& d) { d["machines"][1]["applications"][0]["ports"] = {70000}; })
              .rfind("/machines/1/applications/0/ports/0:", 0) == 0);
    CHECK(with([](json& d) { d["machines"][0]["template"] = "nope"; }).rfind("/machines/0/template:", 0) == 0);
    CHECK(with([](json& d) { d["attacker"] = "ghost"; }).rfind("/attacker:", 0) == 0);
    CHECK(with([](json& d) { d["networks"][0]["prefix"] = "300.1.1.0/24"; }).rfind("/networks/0/prefix:", 0) == 0);
    CHECK(with([](json& d) { d["machines"][1]["name"] = "attacker"; }).rfind("/machines/1/name:", 0) == 0);
    CHECK_FALSE(with([](json& d) { d["vulndb"] = json::array({{{"inline", "<vulndb><oops"}}}); }).empty());
}

TEST_CASE("scripted attacks are byte-identical across runs") {
    auto first = scripted_attack(1);
    CHECK(first == scripted_attack(1));
    CHECK(first == scripted_attack(1));
    CHECK(first != scripted_attack(2));
}

TEST_CASE("snapshots restore an equivalent world that continues identically") {
    auto w = testing::lab(1);
    auto a = w->local_agent();
    w->run_action(a, "port_scan", {{"host", "192.168.1.20"}, {"ports", "80"}});
    auto x = w->run_action(a, "run_exploit", {{"vuln", "iis-idq"}, {"host", "192.168.1.20"}, {"port", "80"}});
    REQUIRE(x.succeeded());
    w->machine(w->machine_named("mail")->id).fs.write("/etc/motd", "pwned\n");
    auto snap = snapshot(*w);
    auto r = restore(json::parse(snap.dump()));
    CHECK(world_hash(*r) == world_hash(*w));
    CHECK(r->now() == w->now());
    CHECK(r->env().size() == w->env().size());
    CHECK(r->machine(r->machine_named("mail")->id).fs.read("/etc/motd") == "pwned\n");

    auto agent = x.detail["agent"].get<AgentId>();
    Params p{{"host", "10.10.0.5"}, {"ports", "20-25"}};
    auto o1 = w->run_action(agent, "port_scan", p);
    auto o2 = r->run_action(agent, "port_scan", p);
    CHECK(to_json(o1).dump() == to_json(o2).dump());
    CHECK(world_hash(*r) == world_hash(*w));
}

TEST_CASE("snapshots are refused while actions run") {
    auto w = testing::lab();
    w->start_action(w->local_agent(), "port_scan", {{"host", "192.168.1.20"}, {"ports", "80"}});
    CHECK_THROWS_AS(snapshot(*w), Error);
}

TEST_CASE("an empty snapshot restores an empty world") {
    auto w = restore(json::object());
    CHECK(w->machines().empty());
}

TEST_CASE("the generator produces the requested size deterministically") {
    GeneratorOptions o;
    o.networks = 12;
    o.machines_per_network = 5;
    auto doc = generate_scenario(o);
    CHECK(doc == generate_scenario(o));
    auto w = load_scenario(doc);
    CHECK(w->machines().size() == 60);
    CHECK(w->segments().size() == 13);
    auto attacker = w->machine(w->agent(w->local_agent()).machine).primary();
    auto far = w->machine_named("net11-m3")->primary();
    CHECK(w->route(attacker, far).ok());
    o.seed = 2;
    CHECK(doc != generate_scenario(o));
}

TEST_CASE("world hash tracks dynamic state") {
    auto w = testing::lab();
    auto h = world_hash(*w);
    CHECK(world_hash(*testing::lab()) == h);
    w->crash_machine(w->machine_named("mail")->id);
    CHECK(world_hash(*w) != h);
}

}
