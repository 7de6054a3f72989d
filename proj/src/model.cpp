#include "attacksim/model.hpp"

#include "attacksim/error.hpp"
#include "attacksim/ipv4.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

namespace attacksim {

namespace {

constexpr std::array<std::pair<AssetKind, std::string_view>, 8> kKindNames{{
    {AssetKind::Banner, "Banner"},
    {AssetKind::OperatingSystem, "OperatingSystem"},
    {AssetKind::IPConnectivity, "IPConnectivity"},
    {AssetKind::TCPConnectivity, "TCPConnectivity"},
    {AssetKind::Application, "Application"},
    {AssetKind::AgentPresence, "AgentPresence"},
    {AssetKind::UserList, "UserList"},
    {AssetKind::FileSystemInfo, "FileSystemInfo"},
}};

constexpr double kMassEpsilon = 1e-9;

bool is_address_attribute(const std::string& name) {
    return name == "host" || name == "source" || name == "target";
}

std::optional<double> parse_number(const std::string& text) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

} // namespace

std::string_view to_string(AssetKind kind) {
    for (auto [k, name] : kKindNames)
        if (k == kind) return name;
    return "?";
}

std::optional<AssetKind> asset_kind_from_string(std::string_view name) {
    for (auto [k, n] : kKindNames)
        if (n == name) return k;
    return std::nullopt;
}

const std::string& Asset::attr(const std::string& name) const {
    static const std::string empty;
    auto it = attributes.find(name);
    return it == attributes.end() ? empty : it->second;
}

const std::vector<std::string>& required_attributes(AssetKind kind) {
    static const std::map<AssetKind, std::vector<std::string>> schema{
        {AssetKind::Banner, {"host", "port", "banner"}},
        {AssetKind::OperatingSystem, {"host", "os"}},
        {AssetKind::IPConnectivity, {"source", "target"}},
        {AssetKind::TCPConnectivity, {"source", "target", "port"}},
        {AssetKind::Application, {"host", "application"}},
        {AssetKind::AgentPresence, {"host", "agent"}},
        {AssetKind::UserList, {"host", "users"}},
        {AssetKind::FileSystemInfo, {"host", "path"}},
    };
    return schema.at(kind);
}

void validate_asset(const Asset& asset) {
    if (!(asset.probability >= 0.0 && asset.probability <= 1.0))
        throw Error(ErrorCode::SchemaViolation,
                    std::string(to_string(asset.kind)) + " probability outside [0,1]");
    for (const auto& name : required_attributes(asset.kind)) {
        auto it = asset.attributes.find(name);
        if (it == asset.attributes.end())
            throw Error(ErrorCode::SchemaViolation,
                        std::string(to_string(asset.kind)) + " asset missing attribute '" + name + "'");
        if (is_address_attribute(name) && !Ipv4::parse(it->second))
            throw Error(ErrorCode::SchemaViolation,
                        std::string(to_string(asset.kind)) + " attribute '" + name + "' is not an address");
        if (name == "port") {
            auto port = parse_number(it->second);
            if (!port || *port < 0 || *port > 65535 || std::floor(*port) != *port)
                throw Error(ErrorCode::SchemaViolation, "port '" + it->second + "' outside 0-65535");
        }
    }
}

AssetKey key_of(const Asset& asset) {
    if (asset.kind == AssetKind::OperatingSystem)
        return {asset.kind, {{"host", asset.attr("host")}, {"os", asset.attr("os")}}};
    return {asset.kind, asset.attributes};
}

bool AssetTemplate::matches(const Asset& asset) const {
    if (asset.kind != kind) return false;
    for (const auto& [name, value] : bound) {
        auto it = asset.attributes.find(name);
        if (it == asset.attributes.end() || it->second != value) return false;
    }
    return true;
}

AssetTemplate AssetTemplate::bind(const Params& params) const {
    AssetTemplate out{kind, {}};
    for (const auto& [name, value] : bound) {
        if (!value.empty() && value.front() == '$') {
            auto it = params.find(value.substr(1));
            if (it == params.end())
                throw Error(ErrorCode::Parameter, "unbound parameter '" + value.substr(1) + "'");
            out.bound[name] = it->second;
        } else {
            out.bound[name] = value;
        }
    }
    return out;
}

void EnvironmentKnowledge::assert_asset(Asset asset) {
    validate_asset(asset);
    auto key = key_of(asset);
    auto& bucket = by_kind_[asset.kind];
    auto [it, inserted] = bucket.insert_or_assign(std::move(key.identity), std::move(asset));
    if (inserted) ++size_;
}

std::vector<Asset> EnvironmentKnowledge::query_goal(const AssetTemplate& pattern) const {
    std::vector<Asset> out;
    for_each(pattern.kind, [&](const Asset& a) {
        if (pattern.matches(a)) out.push_back(a);
    });
    return out;
}

double EnvironmentKnowledge::goal_mass(const AssetTemplate& pattern) const {
    double mass = 0;
    for_each(pattern.kind, [&](const Asset& a) {
        if (pattern.matches(a)) mass += a.probability;
    });
    return mass;
}

bool EnvironmentKnowledge::goal_satisfied(const AssetTemplate& pattern) const {
    return goal_mass(pattern) >= 1.0 - kMassEpsilon;
}

const Asset* EnvironmentKnowledge::find(const AssetKey& key) const {
    auto bucket = by_kind_.find(key.kind);
    if (bucket == by_kind_.end()) return nullptr;
    auto it = bucket->second.find(key.identity);
    return it == bucket->second.end() ? nullptr : &it->second;
}

std::vector<Asset> EnvironmentKnowledge::all() const {
    std::vector<Asset> out;
    out.reserve(size_);
    for (const auto& [kind, bucket] : by_kind_)
        for (const auto& [identity, asset] : bucket) out.push_back(asset);
    return out;
}

void EnvironmentKnowledge::clear() {
    by_kind_.clear();
    size_ = 0;
}

nlohmann::json to_json(const Asset& asset) {
    return {{"kind", to_string(asset.kind)}, {"attributes", asset.attributes}, {"probability", asset.probability}};
}

Asset asset_from_json(const nlohmann::json& j) {
    auto kind = asset_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::SchemaViolation, "unknown asset kind " + j.at("kind").dump());
    Asset a{*kind, j.at("attributes").get<Attributes>(), j.at("probability").get<double>()};
    validate_asset(a);
    return a;
}

nlohmann::json to_json(const Cost& cost) {
    return {{"run_time", {{"min", cost.run_time.min_ms}, {"avg", cost.run_time.avg_ms}, {"max", cost.run_time.max_ms}}},
            {"success_probability", cost.success_probability},
            {"stealthiness", cost.stealthiness},
            {"zero_dayness", cost.zero_dayness}};
}

std::string_view to_string(NoiseCategory category) {
    switch (category) {
    case NoiseCategory::Irremovable: return "irremovable";
    case NoiseCategory::CleanableOnSuccess: return "cleanable-on-success";
    case NoiseCategory::CleanableAlways: return "cleanable-always";
    }
    return "?";
}

std::optional<NoiseCategory> noise_category_from_string(std::string_view name) {
    for (auto c : {NoiseCategory::Irremovable, NoiseCategory::CleanableOnSuccess, NoiseCategory::CleanableAlways})
        if (to_string(c) == name) return c;
    return std::nullopt;
}

nlohmann::json to_json(const NoiseEvent& e) {
    return {{"id", e.id},         {"sensor", e.sensor}, {"category", to_string(e.category)}, {"magnitude", e.magnitude},
            {"action", e.action}, {"agent", e.agent},   {"timestamp", e.timestamp}};
}

NoiseEvent noise_from_json(const nlohmann::json& j) {
    NoiseEvent e;
    e.id = j.at("id");
    e.sensor = j.at("sensor");
    auto category = noise_category_from_string(j.at("category").get<std::string>());
    if (!category) throw Error(ErrorCode::SchemaViolation, "unknown noise category");
    e.category = *category;
    e.magnitude = j.at("magnitude");
    e.action = j.at("action");
    e.agent = j.at("agent");
    e.timestamp = j.at("timestamp");
    return e;
}

const NoiseEvent& NoiseLog::record(NoiseEvent event) {
    if (event.magnitude < 0) throw Error(ErrorCode::SchemaViolation, "negative noise magnitude");
    event.id = next_id_++;
    events_.push_back(std::move(event));
    return events_.back();
}

void NoiseLog::mark_action(ActionInstanceId action, bool succeeded) { outcomes_[action] = succeeded; }

std::optional<bool> NoiseLog::action_succeeded(ActionInstanceId action) const {
    auto it = outcomes_.find(action);
    if (it == outcomes_.end()) return std::nullopt;
    return it->second;
}

std::vector<NoiseEvent> NoiseLog::cleanup(AgentId agent) {
    std::vector<NoiseEvent> removed;
    std::vector<NoiseEvent> kept;
    for (auto& e : events_) {
        bool removable = false;
        if (e.agent == agent) {
            if (e.category == NoiseCategory::CleanableAlways) removable = true;
            if (e.category == NoiseCategory::CleanableOnSuccess) removable = action_succeeded(e.action).value_or(false);
        }
        (removable ? removed : kept).push_back(std::move(e));
    }
    events_ = std::move(kept);
    return removed;
}

double NoiseLog::total_magnitude() const {
    double total = 0;
    for (const auto& e : events_) total += e.magnitude;
    return total;
}

nlohmann::json NoiseLog::to_json() const {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : events_) events.push_back(attacksim::to_json(e));
    nlohmann::json outcomes = nlohmann::json::array();
    for (const auto& [id, ok] : outcomes_) outcomes.push_back({id, ok});
    return {{"events", events}, {"outcomes", outcomes}, {"next_id", next_id_}};
}

void NoiseLog::restore(const nlohmann::json& j) {
    events_.clear();
    outcomes_.clear();
    for (const auto& e : j.at("events")) events_.push_back(noise_from_json(e));
    for (const auto& o : j.at("outcomes")) outcomes_[o.at(0).get<ActionInstanceId>()] = o.at(1).get<bool>();
    next_id_ = j.at("next_id");
}

bool EnvCondition::satisfied_by(const Asset& asset) const {
    for (const auto& [name, value] : expect)
        if (asset.attr(name) != value) return false;
    if (range) {
        auto v = parse_number(asset.attr(range->attribute));
        if (!v || *v < range->lo || *v > range->hi) return false;
    }
    return true;
}

double EnvCondition::belief(const EnvironmentKnowledge& env, const Params& params) const {
    auto pattern = subject.bind(params);
    bool any = false;
    bool negated = false;
    double satisfied_mass = 0;
    double other_mass = 0;
    env.for_each(pattern.kind, [&](const Asset& a) {
        if (!pattern.matches(a)) return;
        any = true;
        if (satisfied_by(a)) {
            satisfied_mass += a.probability;
            if (a.probability == 0.0) negated = true;
        } else {
            other_mass += a.probability;
        }
    });
    if (!any) return prior;
    double residual = std::max(0.0, 1.0 - satisfied_mass - other_mass);
    double p = satisfied_mass + (negated ? 0.0 : residual * prior);
    return std::clamp(p, 0.0, 1.0);
}

void ActionSpec::validate() const {
    if (name.empty()) throw Error(ErrorCode::Validation, "action without a name");
    if (!(run_time.min_ms <= run_time.avg_ms && run_time.avg_ms <= run_time.max_ms) || run_time.min_ms < 0)
        throw Error(ErrorCode::Validation, name + ": run time must satisfy 0 <= min <= avg <= max");
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in_unit(base_success_probability) || !in_unit(zero_dayness))
        throw Error(ErrorCode::Validation, name + ": probabilities must lie in [0,1]");
    for (const auto& c : environment_conditions)
        if (!in_unit(c.penalty) || !in_unit(c.prior))
            throw Error(ErrorCode::Validation, name + ": condition '" + c.name + "' factors must lie in [0,1]");
}

bool ActionSpec::goal_satisfied(const EnvironmentKnowledge& env, const Params& params) const {
    if (goal_check) return goal_check(env, params);
    return env.goal_satisfied(goal.bind(params));
}

Cost estimate_cost(const ActionSpec& spec, const EnvironmentKnowledge& env, const Params& params) {
    if (spec.goal_satisfied(env, params)) return Cost::zero();
    Cost cost;
    cost.run_time = spec.run_time;
    double p = spec.base_success_probability;
    for (const auto& condition : spec.environment_conditions) {
        double b = condition.belief(env, params);
        p *= b + (1.0 - b) * condition.penalty;
    }
    cost.success_probability = std::clamp(p, 0.0, 1.0);
    double noise = 0;
    for (const auto& n : spec.noise_profile) noise += n.magnitude;
    cost.stealthiness = 1.0 / (1.0 + noise);
    cost.zero_dayness = spec.zero_dayness;
    return cost;
}

nlohmann::json to_json(const ActionOutcome& outcome) {
    nlohmann::json assets = nlohmann::json::array();
    for (const auto& a : outcome.produced_assets) assets.push_back(to_json(a));
    nlohmann::json noise = nlohmann::json::array();
    for (const auto& n : outcome.noise_events) noise.push_back(to_json(n));
    return {{"instance", outcome.instance},
            {"status", outcome.succeeded() ? "success" : "failure"},
            {"produced_assets", assets},
            {"noise_events", noise},
            {"elapsed_ms", outcome.elapsed_ms},
            {"cost", to_json(outcome.cost_incurred)},
            {"detail", outcome.detail}};
}

} // namespace attacksim
