#include "attacksim/console.hpp"

#include "attacksim/error.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace attacksim {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(w);
    return words;
}

std::string number(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

std::string rest_of(const std::string& line, std::size_t skip_words) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < skip_words; ++i) {
        pos = line.find_first_not_of(" \t", pos);
        if (pos == std::string::npos) return {};
        pos = line.find_first_of(" \t", pos);
        if (pos == std::string::npos) return {};
    }
    pos = line.find_first_not_of(" \t", pos);
    return pos == std::string::npos ? std::string() : line.substr(pos);
}

Params key_values(const std::vector<std::string>& words, std::size_t from) {
    Params p;
    for (std::size_t i = from; i < words.size(); ++i) {
        auto eq = words[i].find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error(ErrorCode::Parameter, "expected key=value, got '" + words[i] + "'");
        p[words[i].substr(0, eq)] = words[i].substr(eq + 1);
    }
    return p;
}

struct Usage : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void need(const std::vector<std::string>& words, std::size_t n, const char* form) {
    if (words.size() < n) throw Usage(std::string("usage: ") + form);
}

} // namespace

std::string format_asset(const json& asset) {
    std::string s = asset.at("kind").get<std::string>();
    for (const auto& [k, v] : asset.at("attributes").items()) s += " " + k + "=" + v.get<std::string>();
    s += " p=" + number(asset.at("probability").get<double>());
    return s;
}

Console::Console(Controller& controller, std::ostream& out) : controller_(controller), out_(out) {}

std::string Console::usage() {
    return "commands:\n"
           "  discover <range> [mechanism]       network_discovery (icmp|arp|syn)\n"
           "  connect <host> <port>              tcp_connect\n"
           "  scan <host> [ports]                port_scan, ports like 21,80,1000-1024\n"
           "  banner <host> <port>               banner_grab\n"
           "  osdetect <host>                    os_detect_by_banner\n"
           "  fingerprint <host>                 os_fingerprint\n"
           "  exploit <vuln> <host> <port>       run_exploit\n"
           "  localinfo                          local_info_gathering\n"
           "  privesc <vuln>                     privilege_escalation\n"
           "  run <action> [key=value ...]       any library action\n"
           "  estimate <action> [key=value ...]  cost estimate\n"
           "  shell <command line>               run a command through the source agent\n"
           "  pivot <agent>                      select the source agent\n"
           "  cleanup                            remove cleanable noise of the source agent\n"
           "  env | agents | library | status | events [from]\n"
           "  snapshot [file]                    print or save a snapshot\n"
           "  help | quit\n";
}

AgentId Console::current_source() {
    if (source_ == kNoAgent) source_ = controller_.locked([&] { return controller_.world().local_agent(); });
    return source_;
}

void Console::run_action(const std::string& action, const Params& params) {
    json request = {{"agent", current_source()}, {"action", action}, {"params", params}};
    auto started = controller_.execute_action(request);
    auto outcome = controller_.wait(started.at("instance").get<ActionInstanceId>());
    out_ << action << " #" << outcome.instance << " " << (outcome.succeeded() ? "success" : "failure")
         << " elapsed=" << number(outcome.elapsed_ms) << "ms noise=" << outcome.noise_events.size() << "\n";
    if (!outcome.detail.empty()) out_ << "  detail " << outcome.detail.dump() << "\n";
    for (const auto& a : outcome.produced_assets) out_ << "  + " << format_asset(to_json(a)) << "\n";
}

bool Console::execute(const std::string& line) {
    auto words = split(line);
    if (words.empty() || words[0][0] == '#') return true;
    const auto& cmd = words[0];
    try {
        if (cmd == "quit" || cmd == "exit") return false;
        if (cmd == "help") {
            out_ << usage();
        } else if (cmd == "discover") {
            need(words, 2, "discover <range> [mechanism]");
            Params p{{"range", words[1]}};
            if (words.size() > 2) p["mechanism"] = words[2];
            run_action("network_discovery", p);
        } else if (cmd == "connect") {
            need(words, 3, "connect <host> <port>");
            run_action("tcp_connect", {{"host", words[1]}, {"port", words[2]}});
        } else if (cmd == "scan") {
            need(words, 2, "scan <host> [ports]");
            Params p{{"host", words[1]}};
            if (words.size() > 2) p["ports"] = words[2];
            run_action("port_scan", p);
        } else if (cmd == "banner") {
            need(words, 3, "banner <host> <port>");
            run_action("banner_grab", {{"host", words[1]}, {"port", words[2]}});
        } else if (cmd == "osdetect") {
            need(words, 2, "osdetect <host>");
            run_action("os_detect_by_banner", {{"host", words[1]}});
        } else if (cmd == "fingerprint") {
            need(words, 2, "fingerprint <host>");
            run_action("os_fingerprint", {{"host", words[1]}});
        } else if (cmd == "exploit") {
            need(words, 4, "exploit <vuln> <host> <port>");
            run_action("run_exploit", {{"vuln", words[1]}, {"host", words[2]}, {"port", words[3]}});
        } else if (cmd == "localinfo") {
            run_action("local_info_gathering", {});
        } else if (cmd == "privesc") {
            need(words, 2, "privesc <vuln>");
            run_action("privilege_escalation", {{"vuln", words[1]}});
        } else if (cmd == "run") {
            need(words, 2, "run <action> [key=value ...]");
            run_action(words[1], key_values(words, 2));
        } else if (cmd == "estimate") {
            need(words, 2, "estimate <action> [key=value ...]");
            auto cost = controller_.estimate(
                {{"agent", current_source()}, {"action", words[1]}, {"params", key_values(words, 2)}});
            out_ << "estimate " << words[1] << " time=" << number(cost["run_time"]["avg"].get<double>())
                 << "ms p=" << number(cost["success_probability"].get<double>())
                 << " stealth=" << number(cost["stealthiness"].get<double>())
                 << " zero_day=" << number(cost["zero_dayness"].get<double>()) << "\n";
        } else if (cmd == "shell") {
            need(words, 2, "shell <command line>");
            auto r = controller_.shell({{"agent", current_source()}, {"command", rest_of(line, 1)}});
            out_ << r.at("output").get<std::string>();
            if (!r.at("output").get<std::string>().empty() && r.at("output").get<std::string>().back() != '\n')
                out_ << "\n";
        } else if (cmd == "pivot") {
            need(words, 2, "pivot <agent>");
            AgentId id = 0;
            try {
                id = std::stoull(words[1]);
            } catch (const std::exception&) {
                throw Error(ErrorCode::Parameter, "agent id expected");
            }
            controller_.locked([&] { return &controller_.world().live_agent(id); });
            source_ = id;
            out_ << "source agent " << id << "\n";
        } else if (cmd == "cleanup") {
            auto r = controller_.cleanup({{"agent", current_source()}});
            out_ << "cleanup removed " << r.at("removed").get<std::size_t>() << "\n";
        } else if (cmd == "env") {
            for (const auto& a : controller_.query_env()) out_ << format_asset(a) << "\n";
        } else if (cmd == "agents") {
            for (const auto& a : controller_.list_agents()) {
                out_ << "agent " << a.at("id").get<AgentId>() << " host=" << a.at("host").get<std::string>()
                     << " privilege=" << a.at("privilege").get<std::string>()
                     << " parent=" << a.at("parent").get<AgentId>() << " channel=" << a.at("channel").get<std::string>()
                     << (a.at("alive").get<bool>() ? "" : " dead")
                     << (a.at("id").get<AgentId>() == current_source() ? " *" : "") << "\n";
            }
        } else if (cmd == "library") {
            for (const auto& a : controller_.library()) {
                out_ << a.at("name").get<std::string>();
                for (const auto& p : a.at("parameters")) out_ << " " << p.get<std::string>();
                out_ << "\n";
            }
        } else if (cmd == "status") {
            out_ << controller_.status().dump() << "\n";
        } else if (cmd == "events") {
            std::uint64_t from = words.size() > 1 ? std::stoull(words[1]) : 0;
            for (const auto& e : controller_.events_since(from)) out_ << to_json(e).dump() << "\n";
        } else if (cmd == "snapshot") {
            auto snap = controller_.snapshot();
            if (words.size() > 1) {
                std::ofstream f(words[1]);
                if (!f) throw Error(ErrorCode::NotFound, "cannot write " + words[1]);
                f << snap.dump() << "\n";
                out_ << "snapshot written to " << words[1] << "\n";
            } else {
                out_ << snap.dump() << "\n";
            }
        } else {
            out_ << "unknown command '" << cmd << "'\n" << usage();
        }
    } catch (const Usage& u) {
        out_ << u.what() << "\n";
    } catch (const Error& e) {
        out_ << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    } catch (const std::exception& e) {
        out_ << "error: " << e.what() << "\n";
    }
    return true;
}

void Console::run(std::istream& in, bool echo) {
    for (std::string line; std::getline(in, line);) {
        auto words = split(line);
        if (words.empty() || words[0][0] == '#') continue;
        if (echo) out_ << "> " << line << "\n";
        if (!execute(line)) break;
        out_.flush();
    }
}

} // namespace attacksim
