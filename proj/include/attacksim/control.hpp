#pragma once

// Operator surface. Controller serializes every world interaction behind
// one engine mutex, taken between engine steps; ControlServer exposes it
// over HTTP with JSON bodies and NDJSON event streams.
//
//   POST /api/load_scenario   scenario document | {"path": f} | {"generate": {...}}
//   GET  /api/agents
//   GET  /api/library
//   POST /api/actions         {"agent", "action", "params", "request_id"?} -> 202 {"request_id", "instance"}
//   GET  /api/actions/<id>    outcome, or {"status": "running"}
//   POST /api/estimate        {"agent", "action", "params"}
//   GET  /api/env             attacker knowledge only
//   GET  /api/events?from=N[&wait_ms=T]   NDJSON, one record per line
//   GET  /api/stream?from=N   chunked NDJSON that follows new events
//   GET  /api/snapshot        POST /api/restore
//   POST /api/shell           {"agent", "command"}
//   POST /api/cleanup         {"agent"}
//   GET  /api/status
//
// Errors: {"error": <code>, "message": <text>} with 404 for unknown agents,
// actions or entries, 400 for malformed input, 409 for busy or broken
// chains.

#include "attacksim/error.hpp"
#include "attacksim/scenario.hpp"
#include "attacksim/world.hpp"

#include "json.hpp"

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace attacksim {

int http_status(const Error& e);
nlohmann::json error_body(const std::exception& e);

class Controller {
public:
    explicit Controller(LoadOptions defaults = {});
    ~Controller();

    nlohmann::json load_scenario(const nlohmann::json& request);
    void adopt(std::unique_ptr<World> world);

    nlohmann::json list_agents() const;
    nlohmann::json library() const;
    /// Returns {"request_id", "instance"} at once; completion is an event.
    nlohmann::json execute_action(const nlohmann::json& request);
    nlohmann::json estimate(const nlohmann::json& request) const;
    nlohmann::json action_status(ActionInstanceId instance) const;
    nlohmann::json query_env() const;
    std::vector<EventRecord> events_since(std::uint64_t seq) const;
    /// Blocks up to `wait_ms` for events at or after `seq`.
    std::vector<EventRecord> wait_events(std::uint64_t seq, int wait_ms) const;
    nlohmann::json snapshot() const;
    void restore(const nlohmann::json& snapshot);
    nlohmann::json shell(const nlohmann::json& request);
    nlohmann::json cleanup(const nlohmann::json& request);
    nlohmann::json status() const;

    /// Waits for an action: steps the engine itself unless the engine thread
    /// runs, in which case it polls.
    ActionOutcome wait(ActionInstanceId instance);

    /// Background engine loop for server mode.
    void start_engine();
    void stop_engine();
    bool engine_running() const { return engine_running_; }

    /// Direct access for tests and tools; callers hold no lock.
    World& world();
    bool loaded() const;

    template <typename Fn>
    auto locked(Fn&& fn) const {
        std::lock_guard lock(mu_);
        return fn();
    }

private:
    World& require_world() const;
    void engine_loop();

    LoadOptions defaults_;
    mutable std::mutex mu_;
    mutable std::condition_variable events_cv_;
    std::unique_ptr<World> world_;
    RequestId next_request_ = 1;
    std::atomic<bool> engine_running_{false};
    std::thread engine_;
};

class ControlServer {
public:
    explicit ControlServer(Controller& controller);
    ~ControlServer();

    /// Binds host:port (port 0 picks one) and serves on a background thread.
    void start(const std::string& host, int port);
    void stop();
    int port() const { return port_; }

    /// Blocks serving on the calling thread.
    void listen(const std::string& host, int port);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    Controller& controller_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace attacksim
