#include "attacksim/error.hpp"
#include "attacksim/exploitdb.hpp"
#include "attacksim/scenario.hpp"

#include "doctest.h"
#include "support.hpp"

#include <cmath>

using namespace attacksim;

namespace {

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

const VulnerabilityEntry& iis_entry() {
    static const VulnDb db = parse_vulndb(sample_vulndb());
    return *db.find("iis-idq");
}

/// Closed-form probability of each terminal draw: chance times the
/// probability that every earlier positive chance missed.
std::vector<double> ordered_draw_oracle(const std::vector<Draw>& draws) {
    std::vector<double> p(draws.size(), 0.0);
    double reach = 1.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        p[i] = reach * draws[i].chance;
        bool terminal = draws[i].kind != DrawKind::Alarm && draws[i].kind != DrawKind::Log;
        if (terminal) reach *= 1 - draws[i].chance;
    }
    return p;
}

OutcomeKind outcome_of(const Draw& d) {
    switch (d.kind) {
    case DrawKind::Crash: return d.what == DrawTarget::Os ? OutcomeKind::CrashOs : OutcomeKind::CrashApp;
    case DrawKind::Reset: return d.what == DrawTarget::Os ? OutcomeKind::ResetOs : OutcomeKind::ResetApp;
    default: return OutcomeKind::AgentInstalled;
    }
}

} // namespace

TEST_SUITE("exploitdb") {

TEST_CASE("requirement truth table for the IIS entry") {
    const auto& e = iis_entry();
    struct Row {
        const char* perturbed;
        bool req0, req1, req2;
    };
    const Row table[] = {
        {"none", true, true, true},          {"os name", false, true, false},  {"arch", false, true, false},
        {"windows version", false, true, false}, {"edition", false, true, false}, {"service pack", false, true, false},
        {"application name", true, false, false}, {"application major", true, false, false},
        {"not the target", true, false, false},
    };
    for (const auto& row : table) {
        CAPTURE(row.perturbed);
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
        CHECK(eval_requirement(e, "req0", h, target) == row.req0);
        CHECK(eval_requirement(e, "req1", h, target) == row.req1);
        CHECK(eval_requirement(e, "req2", h, target) == row.req2);
    }
}

TEST_CASE("application status, hidden parameters and disjunction") {
    auto db = parse_vulndb(R"(<vulnerability id="v" kind="local exploit">
      <requirement type="application" id="run"><status>running</status><name>smb</name></requirement>
      <requirement type="application" id="inst"><status>installed</status><name>smb</name></requirement>
      <requirement type="application" id="off"><status>not-running</status><name>smb</name></requirement>
      <requirement type="hidden" id="cfg"><param name="patched">no</param></requirement>
      <requirement type="compose" id="either"><operator>logic_or</operator><operands>off cfg</operands></requirement>
      <result for="either"><agent chance="1" /></result>
    </vulnerability>)");
    const auto& e = *db.find("v");
    CHECK(e.local);
    auto h = nt4_iis();
    CHECK(eval_requirement(e, "run", h, nullptr));
    CHECK(eval_requirement(e, "inst", h, nullptr));
    CHECK_FALSE(eval_requirement(e, "off", h, nullptr));
    CHECK_FALSE(eval_requirement(e, "cfg", h, nullptr));
    CHECK_FALSE(eval_requirement(e, "either", h, nullptr));
    h.hidden["patched"] = "no";
    CHECK(eval_requirement(e, "either", h, nullptr));
    h.hidden["patched"] = "yes";
    h.applications[1].state = AppState::Installed;
    CHECK_FALSE(eval_requirement(e, "run", h, nullptr));
    CHECK(eval_requirement(e, "inst", h, nullptr));
    CHECK(eval_requirement(e, "off", h, nullptr));
    CHECK(eval_requirement(e, "either", h, nullptr));
}

TEST_CASE("draws are consumed in order and stop at the first terminal hit") {
    const auto& e = iis_entry();
    auto h = nt4_iis();
    {
        ScriptedRandom r({0.05});
        auto res = resolve_exploit(e, h, &h.applications[0], r);
        CHECK(res.kind == OutcomeKind::CrashApp);
        CHECK(r.consumed() == 1);
    }
    {
        ScriptedRandom r({0.5, 0.74});
        auto res = resolve_exploit(e, h, &h.applications[0], r);
        CHECK(res.kind == OutcomeKind::AgentInstalled);
        CHECK(res.matched_requirement == "req2");
    }
    {
        ScriptedRandom r({0.10, 0.75});
        CHECK(resolve_exploit(e, h, &h.applications[0], r).kind == OutcomeKind::None);
    }
    {
        ScriptedRandom r({});
        h.os.name = "linux";
        auto res = resolve_exploit(e, h, &h.applications[0], r);
        CHECK(res.kind == OutcomeKind::None);
        CHECK_FALSE(res.matched_requirement.has_value());
    }
}

TEST_CASE("alarm and log draws record noise without ending resolution") {
    auto db = parse_vulndb(sample_vulndb());
    const auto& e = *db.find("sshd-chan");
    HostProfile h;
    h.os.name = "linux";
    ApplicationInstance sshd;
    sshd.name = "sshd";
    sshd.version_major = "3";
    h.applications.push_back(sshd);
    ScriptedRandom r({0.1, 0.5, 0.2});
    auto res = resolve_exploit(e, h, &h.applications[0], r);
    CHECK(res.kind == OutcomeKind::AgentInstalled);
    REQUIRE(res.noise.size() == 1);
    CHECK(res.noise[0].kind == DrawKind::Alarm);
    CHECK(r.consumed() == 3);
}

TEST_CASE("Monte Carlo frequencies match the ordered-draw oracle on random entries") {
    testing::Gen g(21);
    HostProfile h = nt4_iis();
    for (int trial = 0; trial < 20; ++trial) {
        VulnerabilityEntry e;
        e.id = "r";
        Requirement any;
        any.id = "any";
        e.requirements["any"] = any;
        ResultEntry result;
        result.for_requirement = "any";
        auto n = g.between(1, 5);
        for (std::uint64_t i = 0; i < n; ++i) {
            Draw d;
            d.kind = static_cast<DrawKind>(g.between(0, 4));
            d.what = g.coin() ? DrawTarget::Os : DrawTarget::Application;
            d.chance = static_cast<double>(g.between(0, 100)) / 100.0;
            result.draws.push_back(d);
        }
        e.results.push_back(result);
        auto p = ordered_draw_oracle(result.draws);
        std::map<OutcomeKind, double> expected;
        double terminal = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (result.draws[i].kind == DrawKind::Alarm || result.draws[i].kind == DrawKind::Log) continue;
            expected[outcome_of(result.draws[i])] += p[i];
            terminal += p[i];
        }
        expected[OutcomeKind::None] += 1 - terminal;

        SeededRng rng(100 + trial);
        const int trials = 20000;
        std::map<OutcomeKind, int> counts;
        for (int t = 0; t < trials; ++t) ++counts[resolve_exploit(e, h, nullptr, rng).kind];
        for (const auto& [kind, prob] : expected) {
            CAPTURE(to_string(kind));
            double sd = std::sqrt(prob * (1 - prob) / trials);
            CHECK(std::abs(counts[kind] / double(trials) - prob) <= 5 * sd + 1e-12);
        }
    }
}

TEST_CASE("serialization round trips") {
    auto db = parse_vulndb(sample_vulndb());
    auto again = parse_vulndb(serialize(db));
    CHECK(serialize(again) == serialize(db));
    REQUIRE(again.size() == db.size());
    auto h = nt4_iis();
    for (const auto& e : db.entries()) {
        for (const auto& [id, r] : e.requirements)
            CHECK(eval_requirement(e, id, h, &h.applications[0]) ==
                  eval_requirement(*again.find(e.id), id, h, &h.applications[0]));
    }
}

TEST_CASE("malformed documents report a location") {
    auto located = [](const char* doc) {
        try {
            parse_vulndb(doc);
        } catch (const ParseError& e) {
            return e.line() > 0;
        }
        return false;
    };
    CHECK(located("<vulndb>\n<vulnerability id=\"x\">\n<requirement type=\"bogus\" id=\"a\"/>\n</vulnerability></vulndb>"));
    CHECK(located("<vulndb>\n<vulnerability id=\"x\">\n<result for=\"missing\"><agent chance=\"0.5\"/></result>\n"
                  "</vulnerability></vulndb>"));
    CHECK(located("<vulndb><vulnerability id=\"x\"><requirement type=\"system\" id=\"a\"/>\n"
                  "<result for=\"a\"><agent chance=\"1.5\"/></result></vulnerability></vulndb>"));
    CHECK(located("<vulndb><vulnerability id=\"x\">\n"
                  "<requirement type=\"compose\" id=\"a\"><operator>logic_and</operator><operands>b</operands></requirement>\n"
                  "<requirement type=\"compose\" id=\"b\"><operator>logic_and</operator><operands>a</operands></requirement>\n"
                  "<result for=\"a\"><agent chance=\"1\"/></result></vulnerability></vulndb>"));
    CHECK(located("<vulndb><vulnerability id=\"x\">\n<requirement"));
}

TEST_CASE("duplicate ids are rejected") {
    VulnDb db = parse_vulndb(sample_vulndb());
    CHECK_THROWS_AS(db.merge(parse_vulndb(sample_vulndb())), Error);
}

}
