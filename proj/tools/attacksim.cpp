// attacksim: load a scenario, then drive it from a console, a command file or
// the HTTP control service.

#include "attacksim/console.hpp"
#include "attacksim/control.hpp"
#include "attacksim/error.hpp"
#include "attacksim/scenario.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

using namespace attacksim;

namespace {

std::pair<std::string, int> host_port(const std::string& text) {
    auto colon = text.rfind(':');
    if (colon == std::string::npos) return {"127.0.0.1", std::stoi(text)};
    return {text.substr(0, colon), std::stoi(text.substr(colon + 1))};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attacker-centric network attack simulator"};
    std::string scenario, listen, script, generate, events_out;
    std::uint64_t seed = 0;
    std::vector<std::string> vulndb, templates;
    bool echo = false;
    app.add_option("--scenario", scenario, "Scenario JSON file")->check(CLI::ExistingFile);
    app.add_option("--generate", generate, "Generate an NxM benchmark topology instead, e.g. 100x10");
    auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
    app.add_option("--listen", listen, "Serve the control API on [host:]port");
    app.add_option("--script", script, "Command file to replay")->check(CLI::ExistingFile);
    app.add_option("--vulndb", vulndb, "Additional vulnerability database files")->check(CLI::ExistingFile);
    app.add_option("--templates", templates, "Additional template filesystem bundles")->check(CLI::ExistingDirectory);
    app.add_flag("--echo", echo, "Echo commands into the transcript");
    app.add_option("--events", events_out, "Write the event log as NDJSON on exit");
    CLI11_PARSE(app, argc, argv);

    LoadOptions options;
    if (*seed_opt) options.seed = seed;
    for (const auto& v : vulndb) options.extra_vulndb.emplace_back(v);
    for (const auto& t : templates) options.extra_templates.emplace_back(t);

    Controller controller(options);
    try {
        if (!scenario.empty()) {
            controller.load_scenario({{"path", scenario}});
        } else if (!generate.empty()) {
            auto x = generate.find('x');
            if (x == std::string::npos) throw Error(ErrorCode::Parameter, "--generate expects NxM");
            controller.load_scenario({{"generate",
                                       {{"networks", std::stoul(generate.substr(0, x))},
                                        {"machines", std::stoul(generate.substr(x + 1))},
                                        {"seed", *seed_opt ? seed : 1}}}});
        }
    } catch (const std::exception& e) {
        std::cerr << "load failed: " << e.what() << "\n";
        return 2;
    }

    if (!listen.empty()) {
        auto [host, port] = host_port(listen);
        controller.start_engine();
        ControlServer server(controller);
        std::cerr << "listening on " << host << ":" << port << "\n";
        server.listen(host, port);
        controller.stop_engine();
        return 0;
    }

    if (!controller.loaded()) {
        std::cerr << "no scenario: pass --scenario, --generate or --listen\n";
        return 2;
    }

    Console console(controller, std::cout);
    if (!script.empty()) {
        std::ifstream in(script);
        console.run(in, echo);
    } else {
        console.run(std::cin, echo);
    }

    if (!events_out.empty()) {
        std::ofstream out(events_out);
        for (const auto& e : controller.events_since(0)) out << to_json(e).dump() << "\n";
    }
    return 0;
}
