#include "attacksim/control.hpp"

#include "attacksim/actions.hpp"
#include "attacksim/error.hpp"

#include "httplib.h"

#include <chrono>

namespace attacksim {

using nlohmann::json;

int http_status(const Error& e) {
    switch (e.code()) {
    case ErrorCode::NotFound:
    case ErrorCode::DeadAgent:
    case ErrorCode::Lookup: return 404;
    case ErrorCode::Busy:
    case ErrorCode::ChainBroken:
    case ErrorCode::Channel:
    case ErrorCode::DeadMachine: return 409;
    case ErrorCode::BadDescriptor:
    case ErrorCode::ConnectionReset:
    case ErrorCode::Bind: return 500;
    default: return 400;
    }
}

json error_body(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) return {{"error", to_string(err->code())}, {"message", e.what()}};
    if (dynamic_cast<const json::exception*>(&e)) return {{"error", "parse"}, {"message", e.what()}};
    return {{"error", "internal"}, {"message", e.what()}};
}

namespace {

AgentId agent_field(const json& request) {
    if (!request.is_object() || !request.contains("agent")) throw Error(ErrorCode::Parameter, "missing 'agent'");
    const auto& a = request.at("agent");
    if (a.is_number_unsigned() || a.is_number_integer()) return a.get<AgentId>();
    if (a.is_string()) {
        try {
            return std::stoull(a.get<std::string>());
        } catch (const std::exception&) {
        }
    }
    throw Error(ErrorCode::Parameter, "'agent' must be an agent id");
}

std::string string_field(const json& request, const char* key) {
    if (!request.contains(key) || !request.at(key).is_string())
        throw Error(ErrorCode::Parameter, std::string("missing string '") + key + "'");
    return request.at(key).get<std::string>();
}

Params params_field(const json& request) {
    Params p;
    if (!request.contains("params")) return p;
    const auto& j = request.at("params");
    if (!j.is_object()) throw Error(ErrorCode::Parameter, "'params' must be an object");
    for (const auto& [k, v] : j.items()) {
        if (v.is_string()) p[k] = v.get<std::string>();
        else if (v.is_number_integer() || v.is_number_unsigned()) p[k] = std::to_string(v.get<std::int64_t>());
        else throw Error(ErrorCode::Parameter, "parameter '" + k + "' must be a string or integer");
    }
    return p;
}

json agent_json(const World& w, const Agent& a) {
    return {{"id", a.id},
            {"host", w.machine(a.machine).primary().to_string()},
            {"privilege", to_string(a.privilege)},
            {"parent", a.parent},
            {"channel", to_string(a.channel.kind)},
            {"alive", a.alive}};
}

} // namespace

Controller::Controller(LoadOptions defaults) : defaults_(std::move(defaults)) {}

Controller::~Controller() { stop_engine(); }

World& Controller::require_world() const {
    if (!world_) throw Error(ErrorCode::Lookup, "no scenario loaded");
    return *world_;
}

World& Controller::world() { return require_world(); }

bool Controller::loaded() const {
    std::lock_guard lock(mu_);
    return world_ != nullptr;
}

void Controller::adopt(std::unique_ptr<World> world) {
    std::lock_guard lock(mu_);
    world_ = std::move(world);
}

json Controller::load_scenario(const json& request) {
    std::unique_ptr<World> w;
    if (request.is_object() && request.contains("path")) {
        w = attacksim::load_scenario_file(string_field(request, "path"), defaults_);
    } else if (request.is_object() && request.contains("generate")) {
        const auto& g = request.at("generate");
        GeneratorOptions o;
        o.networks = g.value("networks", o.networks);
        o.machines_per_network = g.value("machines", o.machines_per_network);
        o.seed = g.value("seed", o.seed);
        w = attacksim::load_scenario(generate_scenario(o), defaults_);
    } else {
        w = attacksim::load_scenario(request, defaults_);
    }
    std::lock_guard lock(mu_);
    world_ = std::move(w);
    json agents = json::array();
    for (const auto& [id, a] : world_->agents()) agents.push_back(agent_json(*world_, a));
    return {{"loaded", true}, {"seed", world_->seed()}, {"agents", agents}};
}

json Controller::list_agents() const {
    std::lock_guard lock(mu_);
    auto& w = require_world();
    json out = json::array();
    for (const auto& [id, a] : w.agents()) out.push_back(agent_json(w, a));
    return out;
}

json Controller::library() const {
    std::lock_guard lock(mu_);
    json out = json::array();
    auto& w = require_world();
    for (const auto& name : w.actions().names()) {
        const auto* def = w.actions().find(name);
        out.push_back({{"name", name}, {"parameters", def->spec.parameters}, {"defaults", def->defaults},
                       {"info_gathering", def->info_gathering}});
    }
    return out;
}

json Controller::execute_action(const json& request) {
    auto agent = agent_field(request);
    auto action = string_field(request, "action");
    auto params = params_field(request);
    std::lock_guard lock(mu_);
    auto& w = require_world();
    RequestId id = next_request_;
    if (request.contains("request_id")) {
        if (!request.at("request_id").is_number_unsigned() && !request.at("request_id").is_number_integer())
            throw Error(ErrorCode::Parameter, "'request_id' must be an integer");
        id = request.at("request_id").get<RequestId>();
    }
    auto instance = w.start_action(agent, action, params, id);
    next_request_ = std::max(next_request_, id + 1);
    events_cv_.notify_all();
    return {{"request_id", id}, {"instance", instance}};
}

json Controller::estimate(const json& request) const {
    auto agent = agent_field(request);
    auto action = string_field(request, "action");
    auto params = params_field(request);
    std::lock_guard lock(mu_);
    return to_json(require_world().estimate(agent, action, params));
}

json Controller::action_status(ActionInstanceId instance) const {
    std::lock_guard lock(mu_);
    auto& w = require_world();
    if (const auto* out = w.action_outcome(instance)) return to_json(*out);
    if (!w.action_known(instance))
        throw Error(ErrorCode::NotFound, "unknown action instance " + std::to_string(instance));
    return {{"instance", instance}, {"status", "running"}};
}

json Controller::query_env() const {
    std::lock_guard lock(mu_);
    json out = json::array();
    for (const auto& a : require_world().env().all()) out.push_back(to_json(a));
    return out;
}

std::vector<EventRecord> Controller::events_since(std::uint64_t seq) const {
    std::lock_guard lock(mu_);
    return require_world().events_since(seq);
}

std::vector<EventRecord> Controller::wait_events(std::uint64_t seq, int wait_ms) const {
    std::unique_lock lock(mu_);
    auto ready = [&] {
        return world_ && !world_->events().empty() && world_->events().back().seq >= seq;
    };
    if (wait_ms > 0 && engine_running_) events_cv_.wait_for(lock, std::chrono::milliseconds(wait_ms), ready);
    if (!world_) return {};
    return world_->events_since(seq);
}

json Controller::snapshot() const {
    std::lock_guard lock(mu_);
    return attacksim::snapshot(require_world());
}

void Controller::restore(const json& snap) {
    auto w = attacksim::restore(snap);
    std::lock_guard lock(mu_);
    world_ = std::move(w);
}

json Controller::shell(const json& request) {
    auto agent = agent_field(request);
    auto command = string_field(request, "command");
    std::lock_guard lock(mu_);
    return {{"output", require_world().agent_shell(agent, command)}};
}

json Controller::cleanup(const json& request) {
    auto agent = agent_field(request);
    std::lock_guard lock(mu_);
    auto removed = require_world().cleanup(agent);
    json events = json::array();
    for (const auto& e : removed) events.push_back(to_json(e));
    return {{"removed", removed.size()}, {"events", events}};
}

json Controller::status() const {
    std::lock_guard lock(mu_);
    if (!world_) return {{"loaded", false}};
    return {{"loaded", true},
            {"now", world_->now()},
            {"events", world_->events().size()},
            {"in_flight", world_->actions_in_flight()},
            {"runs_to_sleep", world_->runs_to_sleep()},
            {"syscalls", world_->totals().syscalls_executed},
            {"engine", engine_running_.load()}};
}

ActionOutcome Controller::wait(ActionInstanceId instance) {
    if (engine_running_) {
        for (;;) {
            {
                std::lock_guard lock(mu_);
                if (const auto* out = require_world().action_outcome(instance)) return *out;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
    }
    std::lock_guard lock(mu_);
    auto& w = require_world();
    w.run_until([&] { return w.action_done(instance); });
    if (const auto* out = w.action_outcome(instance)) return *out;
    ActionOutcome stalled;
    stalled.instance = instance;
    stalled.detail["error"] = "action stalled";
    return stalled;
}

void Controller::start_engine() {
    if (engine_running_.exchange(true)) return;
    engine_ = std::thread([this] { engine_loop(); });
}

void Controller::stop_engine() {
    if (!engine_running_.exchange(false)) return;
    if (engine_.joinable()) engine_.join();
}

void Controller::engine_loop() {
    while (engine_running_) {
        bool progressed = false;
        {
            std::lock_guard lock(mu_);
            if (world_) progressed = world_->step();
        }
        events_cv_.notify_all();
        if (!progressed) std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

// ---- HTTP ------------------------------------------------------------------

struct ControlServer::Impl {
    httplib::Server server;
};

namespace {

std::string ndjson(const std::vector<EventRecord>& events) {
    std::string out;
    for (const auto& e : events) out += to_json(e).dump() + "\n";
    return out;
}

std::uint64_t query_u64(const httplib::Request& req, const char* key, std::uint64_t fallback) {
    if (!req.has_param(key)) return fallback;
    try {
        return std::stoull(req.get_param_value(key));
    } catch (const std::exception&) {
        throw Error(ErrorCode::Parameter, std::string("query parameter '") + key + "' must be a number");
    }
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn, int ok_status = 200) {
    return [fn, ok_status](const httplib::Request& req, httplib::Response& res) {
        try {
            json body = req.body.empty() ? json::object() : json::parse(req.body);
            res.set_content(fn(req, body).dump(), "application/json");
            res.status = ok_status;
        } catch (const Error& e) {
            res.status = http_status(e);
            res.set_content(error_body(e).dump(), "application/json");
        } catch (const json::exception& e) {
            res.status = 400;
            res.set_content(error_body(e).dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(error_body(e).dump(), "application/json");
        }
    };
}

} // namespace

ControlServer::ControlServer(Controller& controller) : impl_(std::make_unique<Impl>()), controller_(controller) {
    auto& s = impl_->server;
    auto& c = controller_;
    using Req = httplib::Request;
    s.Post("/api/load_scenario", guarded([&c](const Req&, const json& b) { return c.load_scenario(b); }));
    s.Get("/api/agents", guarded([&c](const Req&, const json&) { return c.list_agents(); }));
    s.Get("/api/library", guarded([&c](const Req&, const json&) { return c.library(); }));
    s.Post("/api/actions", guarded([&c](const Req&, const json& b) { return c.execute_action(b); }, 202));
    s.Get(R"(/api/actions/(\d+))", guarded([&c](const Req& r, const json&) {
              return c.action_status(std::stoull(r.matches[1].str()));
          }));
    s.Post("/api/estimate", guarded([&c](const Req&, const json& b) { return c.estimate(b); }));
    s.Get("/api/env", guarded([&c](const Req&, const json&) { return c.query_env(); }));
    s.Get("/api/snapshot", guarded([&c](const Req&, const json&) { return c.snapshot(); }));
    s.Post("/api/restore", guarded([&c](const Req&, const json& b) {
               c.restore(b);
               return json{{"restored", true}};
           }));
    s.Post("/api/shell", guarded([&c](const Req&, const json& b) { return c.shell(b); }));
    s.Post("/api/cleanup", guarded([&c](const Req&, const json& b) { return c.cleanup(b); }));
    s.Get("/api/status", guarded([&c](const Req&, const json&) { return c.status(); }));

    s.Get("/api/events", [&c](const Req& req, httplib::Response& res) {
        try {
            auto from = query_u64(req, "from", 0);
            auto wait = static_cast<int>(query_u64(req, "wait_ms", 0));
            res.set_content(ndjson(c.wait_events(from, wait)), "application/x-ndjson");
        } catch (const Error& e) {
            res.status = http_status(e);
            res.set_content(error_body(e).dump(), "application/json");
        }
    });
    s.Get("/api/stream", [&c](const Req& req, httplib::Response& res) {
        std::uint64_t from = 0;
        try {
            from = query_u64(req, "from", 0);
        } catch (const Error& e) {
            res.status = http_status(e);
            res.set_content(error_body(e).dump(), "application/json");
            return;
        }
        auto next = std::make_shared<std::uint64_t>(from);
        res.set_chunked_content_provider("application/x-ndjson", [&c, next](std::size_t, httplib::DataSink& sink) {
            if (!sink.is_writable()) return false;
            std::vector<EventRecord> events;
            try {
                events = c.wait_events(*next, 500);
            } catch (const std::exception&) {
                return false;
            }
            if (!events.empty()) {
                auto text = ndjson(events);
                if (!sink.write(text.data(), text.size())) return false;
                *next = events.back().seq + 1;
            }
            return true;
        });
    });
}

ControlServer::~ControlServer() { stop(); }

void ControlServer::start(const std::string& host, int port) {
    auto& s = impl_->server;
    port_ = port == 0 ? s.bind_to_any_port(host) : (s.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorCode::Bind, "cannot listen on " + host + ":" + std::to_string(port));
    thread_ = std::thread([&s] { s.listen_after_bind(); });
    s.wait_until_ready();
}

void ControlServer::listen(const std::string& host, int port) {
    port_ = port;
    if (!impl_->server.listen(host, port)) throw Error(ErrorCode::Bind, "cannot listen on " + host + ":" + std::to_string(port));
}

void ControlServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

} // namespace attacksim
