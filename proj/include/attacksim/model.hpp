#pragma once

// Attack model: probabilistic assets, the attacker's environment knowledge,
// the abstract action contract and noise bookkeeping.

#include "attacksim/types.hpp"

#include "json.hpp"

#include <compare>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace attacksim {

enum class AssetKind {
    Banner,
    OperatingSystem,
    IPConnectivity,
    TCPConnectivity,
    Application,
    AgentPresence,
    UserList,
    FileSystemInfo,
};

std::string_view to_string(AssetKind kind);
std::optional<AssetKind> asset_kind_from_string(std::string_view name);

using Attributes = std::map<std::string, std::string>;

struct Asset {
    AssetKind kind = AssetKind::Banner;
    Attributes attributes;
    double probability = 1.0;

    /// Attribute value or empty string.
    const std::string& attr(const std::string& name) const;
};

/// Attributes each kind must carry.
const std::vector<std::string>& required_attributes(AssetKind kind);

/// Throws Error(SchemaViolation) when the asset does not fit its kind.
void validate_asset(const Asset& asset);

struct AssetKey {
    AssetKind kind;
    Attributes identity;

    friend auto operator<=>(const AssetKey&, const AssetKey&) = default;
};

/// Every attribute participates in identity, except OS assets which key on
/// (host, os) so that detail refinements replace rather than duplicate.
AssetKey key_of(const Asset& asset);

/// Kind plus bound attributes. Values of the form "$name" are placeholders
/// substituted from action parameters by bind().
struct AssetTemplate {
    AssetKind kind = AssetKind::Banner;
    Attributes bound;

    bool matches(const Asset& asset) const;
    AssetTemplate bind(const Params& params) const;
};

class EnvironmentKnowledge {
public:
    explicit EnvironmentKnowledge(AgentId owner = kNoAgent) : owner_(owner) {}

    /// Last write wins on the asset's key.
    void assert_asset(Asset asset);

    std::vector<Asset> query_goal(const AssetTemplate& pattern) const;

    /// Sum of probabilities over matching assets.
    double goal_mass(const AssetTemplate& pattern) const;

    /// The goal is satisfied once the matching assets account for the whole
    /// probability mass (a single asset at p=1, or a complete set of
    /// alternative hypotheses).
    bool goal_satisfied(const AssetTemplate& pattern) const;

    const Asset* find(const AssetKey& key) const;

    template <typename Fn>
    void for_each(AssetKind kind, Fn&& fn) const {
        auto it = by_kind_.find(kind);
        if (it == by_kind_.end()) return;
        for (const auto& [identity, asset] : it->second) fn(asset);
    }

    std::size_t size() const { return size_; }
    AgentId owner() const { return owner_; }
    void set_owner(AgentId owner) { owner_ = owner; }

    std::vector<Asset> all() const;
    void clear();

private:
    AgentId owner_;
    std::map<AssetKind, std::map<Attributes, Asset>> by_kind_;
    std::size_t size_ = 0;
};

nlohmann::json to_json(const Asset& asset);
Asset asset_from_json(const nlohmann::json& j);

struct RunTime {
    double min_ms = 0;
    double avg_ms = 0;
    double max_ms = 0;

    friend bool operator==(const RunTime&, const RunTime&) = default;
};

struct Cost {
    RunTime run_time;
    double success_probability = 1.0;
    double stealthiness = 1.0;
    double zero_dayness = 0.0;

    static Cost zero() { return Cost{}; }
    bool is_zero() const {
        return run_time == RunTime{} && success_probability == 1.0 && stealthiness == 1.0;
    }
};

nlohmann::json to_json(const Cost& cost);

enum class NoiseCategory { Irremovable, CleanableOnSuccess, CleanableAlways };

std::string_view to_string(NoiseCategory category);
std::optional<NoiseCategory> noise_category_from_string(std::string_view name);

/// Where an action's noise lands. Path sensors only exist where the
/// scenario placed an IDS or firewall.
enum class SensorScope { PathIds, PathFirewall, TargetLog, LocalLog };

struct NoiseTemplate {
    SensorScope scope = SensorScope::PathIds;
    NoiseCategory category = NoiseCategory::Irremovable;
    double magnitude = 1.0;
};

struct NoiseEvent {
    std::uint64_t id = 0;
    std::string sensor;
    NoiseCategory category = NoiseCategory::Irremovable;
    double magnitude = 0;
    ActionInstanceId action = 0;
    AgentId agent = kNoAgent;
    SimTime timestamp = 0;
};

nlohmann::json to_json(const NoiseEvent& event);
NoiseEvent noise_from_json(const nlohmann::json& j);

/// Noise recorded against world sensors plus the success flag of each
/// originating action instance.
class NoiseLog {
public:
    const NoiseEvent& record(NoiseEvent event);
    void mark_action(ActionInstanceId action, bool succeeded);
    std::optional<bool> action_succeeded(ActionInstanceId action) const;

    /// Removes the agent's CleanableAlways events and its CleanableOnSuccess
    /// events whose action succeeded. Irremovable noise always stays.
    std::vector<NoiseEvent> cleanup(AgentId agent);

    const std::vector<NoiseEvent>& events() const { return events_; }
    double total_magnitude() const;

    nlohmann::json to_json() const;
    void restore(const nlohmann::json& j);

private:
    std::vector<NoiseEvent> events_;
    std::map<ActionInstanceId, bool> outcomes_;
    std::uint64_t next_id_ = 1;
};

/// Numeric attribute window, e.g. OS version between 6.1 and 6.9.
struct NumericRange {
    std::string attribute;
    double lo = 0;
    double hi = 0;
};

/// Environment conditions facilitate an action without being required.
/// `subject` selects the assets the condition talks about (kind + bound
/// attributes such as the host); `expect` and `range` are the predicate.
struct EnvCondition {
    std::string name;
    AssetTemplate subject;
    Attributes expect;
    std::optional<NumericRange> range;
    double penalty = 0.1;
    double prior = 0.5;

    /// Probability, under current beliefs, that the condition holds.
    double belief(const EnvironmentKnowledge& env, const Params& params) const;
    bool satisfied_by(const Asset& asset) const;
};

using GoalCheck = std::function<bool(const EnvironmentKnowledge&, const Params&)>;

struct ActionSpec {
    std::string name;
    AssetTemplate goal;
    std::vector<AssetTemplate> requirements;
    std::vector<EnvCondition> environment_conditions;
    std::vector<NoiseTemplate> noise_profile;
    RunTime run_time;
    double base_success_probability = 1.0;
    double zero_dayness = 0.0;
    /// Names that must be bound in the params of every invocation.
    std::vector<std::string> parameters;
    /// Overrides the default goal test (bound goal template fully satisfied).
    GoalCheck goal_check;

    void validate() const;
    bool goal_satisfied(const EnvironmentKnowledge& env, const Params& params) const;
};

Cost estimate_cost(const ActionSpec& spec, const EnvironmentKnowledge& env, const Params& params);

enum class ActionStatus { Success, Failure };

struct ActionOutcome {
    ActionInstanceId instance = 0;
    ActionStatus status = ActionStatus::Failure;
    std::vector<Asset> produced_assets;
    std::vector<NoiseEvent> noise_events;
    double elapsed_ms = 0;
    Cost cost_incurred;
    nlohmann::json detail = nlohmann::json::object();

    bool succeeded() const { return status == ActionStatus::Success; }
};

nlohmann::json to_json(const ActionOutcome& outcome);

} // namespace attacksim
