#pragma once

// Concrete attack actions. Each runs as a simulated thread on the machine of
// the agent that launched it, so routes and filters are seen from that
// vantage point.

#include "attacksim/task.hpp"
#include "attacksim/world.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace attacksim {

struct ActionDef;

struct ActionContext {
    World& world;
    ActionInstanceId id = 0;
    AgentId agent = kNoAgent;
    MachineId machine = 0;
    Ipv4 source;
    Params params;
    ActionOutcome& outcome;

    const std::string& param(const std::string& name) const;
    bool has(const std::string& name) const { return params.count(name) != 0; }

    /// Asserts into the environment and records it as produced.
    void produce(Asset asset);

    /// Records one noise unit set against the sensors of `scope`.
    void make_noise(SensorScope scope, NoiseCategory category, double magnitude, Ipv4 target);
};

using ActionBody = std::function<Task<void>(ActionContext&)>;

struct ActionDef {
    ActionSpec spec;
    /// Reconnaissance actions are the ones subject to the zero-cost check in
    /// the acceptance suite; every action honours the goal shortcut.
    bool info_gathering = false;
    /// Filled in for parameters the caller left out.
    Params defaults;
    /// Throws Error(Parameter) on malformed params. Runs before any shortcut.
    std::function<void(const World&, const Params&)> validate;
    /// Per-invocation description (run_exploit depends on the chosen entry).
    std::function<ActionSpec(const World&, const Params&)> refine;
    ActionBody body;

    ActionSpec spec_for(const World& world, const Params& params) const {
        return refine ? refine(world, params) : spec;
    }
};

class ActionLibrary {
public:
    static ActionLibrary builtin();

    void add(ActionDef def);
    const ActionDef* find(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, ActionDef> defs_;
};

struct ActionInstance {
    ActionInstanceId id = 0;
    const ActionDef* action = nullptr;
    AgentId agent = kNoAgent;
    Params params;
    RequestId request = 0;
    SimTime started = 0;
    SimTime drawn_elapsed = 0;
    ActionOutcome outcome;
    bool done = false;
    ThreadId thread = 0;
    std::unique_ptr<ActionContext> ctx;
};

/// Addresses named by a discovery range: "a.b.c.d", "a.b.c.d/len" or
/// "a.b.c.d-e.f.g.h". Throws Error(Parameter) when empty or above 65536.
std::vector<Ipv4> expand_range(const std::string& range);

/// Ports named by "22", "1-1024" or "22,80,8000-8080". Throws Error(Parameter).
std::vector<std::uint16_t> expand_ports(const std::string& ports);

/// Chance that an entry's draw sequence ends in agent installation, given
/// its first result entry with an agent draw. Used for cost estimates only.
double agent_chance(const VulnerabilityEntry& entry);

} // namespace attacksim
