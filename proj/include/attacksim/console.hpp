#pragma once

// Line-oriented operator console over a Controller. Every command maps onto
// one Controller call; action commands block until the action completes so
// that scripted sessions produce a stable transcript.

#include "attacksim/control.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace attacksim {

class Console {
public:
    Console(Controller& controller, std::ostream& out);

    /// Runs one command line. Returns false on "quit".
    bool execute(const std::string& line);

    /// Reads commands until EOF or "quit". Blank lines and '#' comments are
    /// skipped; with `echo` each command is printed after a "> " prompt.
    void run(std::istream& in, bool echo);

    AgentId source() const { return source_; }

    static std::string usage();

private:
    void run_action(const std::string& action, const Params& params);
    AgentId current_source();

    Controller& controller_;
    std::ostream& out_;
    AgentId source_ = kNoAgent;
};

/// "kind attr=value ... p=0.8"
std::string format_asset(const nlohmann::json& asset);

} // namespace attacksim
