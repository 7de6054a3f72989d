#pragma once

// Vulnerability database: requirement trees, ordered probabilistic results
// and the resolution procedure.

#include "attacksim/host.hpp"
#include "attacksim/rng.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace attacksim {

/// Empty set matches anything; otherwise the host value must be a member.
using ValueSet = std::set<std::string>;

enum class RequirementType { System, Application, Compose, Hidden };
enum class AppRequirement { Target, Running, Installed, NotRunning };
enum class LogicOp { And, Or };

struct Requirement {
    std::string id;
    RequirementType type = RequirementType::System;

    // system
    ValueSet os_name;
    ValueSet os_arch;
    ValueSet win;
    ValueSet editions;
    ValueSet servicepacks;

    // application
    AppRequirement status = AppRequirement::Target;
    std::string app_name;  // empty matches any application
    ValueSet version_major;
    ValueSet version_minor;

    // compose
    LogicOp op = LogicOp::And;
    std::vector<std::string> operands;

    // hidden: a per-host parameter the attacker cannot observe
    std::string param;
    ValueSet param_values;
};

enum class DrawKind { Crash, Reset, Agent, Alarm, Log };
enum class DrawTarget { Os, Application };

struct Draw {
    DrawKind kind = DrawKind::Agent;
    DrawTarget what = DrawTarget::Os;  // crash and reset only
    double chance = 0;
    double magnitude = 1;  // alarm and log only
};

struct ResultEntry {
    std::string for_requirement;
    std::vector<Draw> draws;
};

enum class OutcomeKind { None, CrashOs, ResetOs, CrashApp, ResetApp, AgentInstalled };

std::string_view to_string(OutcomeKind kind);

struct VulnerabilityEntry {
    std::string id;
    std::string name;
    bool local = false;
    std::string category = "exploit";  // exploit, dos or leakage
    double noise_level = 1.0;
    std::map<std::string, Requirement> requirements;
    std::vector<ResultEntry> results;
};

class VulnDb {
public:
    void add(VulnerabilityEntry entry);
    const VulnerabilityEntry* find(const std::string& id) const;
    const std::vector<VulnerabilityEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    void merge(const VulnDb& other);

private:
    std::vector<VulnerabilityEntry> entries_;
    std::map<std::string, std::size_t> index_;
};

/// Parses a <vulndb> document (or a single <vulnerability>). Throws
/// ParseError with line/column on malformed markup, undefined or cyclic
/// requirement references, chances outside [0,1] and unsupported results.
VulnDb parse_vulndb(std::string_view document);

std::string serialize(const VulnDb& db);

/// Pure: evaluates `id` within `entry` against the host. `target` is the
/// application the exploit is aimed at, if any.
bool eval_requirement(const VulnerabilityEntry& entry, const std::string& id, const HostProfile& host,
                      const ApplicationInstance* target);

struct NoiseDraw {
    DrawKind kind = DrawKind::Alarm;
    double magnitude = 0;
};

struct Resolution {
    OutcomeKind kind = OutcomeKind::None;
    std::optional<std::string> matched_requirement;
    /// Alarm and log draws that fired before the terminal outcome.
    std::vector<NoiseDraw> noise;
};

/// First result entry whose requirement holds is selected; its draws are
/// processed in order, each positive chance consuming one uniform draw u,
/// and the first crash/reset/agent draw with u < chance ends resolution.
Resolution resolve_exploit(const VulnerabilityEntry& entry, const HostProfile& host, const ApplicationInstance* target,
                           RandomSource& rng);

} // namespace attacksim
