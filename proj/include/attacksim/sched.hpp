#pragma once

// Cooperative, non-preemptive round-robin scheduler over the
// machine / process / thread tree. Simulated threads are C++ coroutines that
// suspend at every syscall; the scheduler executes the pending syscall and
// resumes the thread on its next visit.

#include "attacksim/syscall.hpp"
#include "attacksim/types.hpp"

#include <coroutine>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace attacksim {

class SimTask {
public:
    struct promise_type {
        std::optional<SyscallRequest> pending;
        SyscallResponse result;
        std::exception_ptr error;
        // innermost suspended frame; differs from the root while a Task runs
        std::coroutine_handle<> active;

        SimTask get_return_object() {
            auto h = std::coroutine_handle<promise_type>::from_promise(*this);
            active = h;
            return SimTask(h);
        }
        std::suspend_always initial_suspend() noexcept { return {}; }
        std::suspend_always final_suspend() noexcept { return {}; }
        void return_void() noexcept {}
        void unhandled_exception() noexcept { error = std::current_exception(); }
    };

    using Handle = std::coroutine_handle<promise_type>;

    SimTask() = default;
    explicit SimTask(Handle h) : handle_(h) {}
    SimTask(SimTask&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
    SimTask& operator=(SimTask&& other) noexcept {
        if (this != &other) {
            destroy();
            handle_ = std::exchange(other.handle_, {});
        }
        return *this;
    }
    SimTask(const SimTask&) = delete;
    SimTask& operator=(const SimTask&) = delete;
    ~SimTask() { destroy(); }

    bool valid() const { return static_cast<bool>(handle_); }
    bool done() const { return !handle_ || handle_.done(); }
    promise_type& promise() const { return handle_.promise(); }
    void resume() const { handle_.promise().active.resume(); }

private:
    void destroy() {
        if (handle_) handle_.destroy();
        handle_ = {};
    }

    Handle handle_;
};

inline SimTask::promise_type* root_of(SimTask::promise_type& p) { return &p; }
template <typename P>
SimTask::promise_type* root_of(P& p) {
    return p.root;
}

/// `co_await syscall(request)` inside a SimTask or Task yields to the scheduler.
struct SyscallAwaiter {
    SyscallRequest request;
    SimTask::promise_type* root = nullptr;

    bool await_ready() const noexcept { return false; }
    template <typename P>
    void await_suspend(std::coroutine_handle<P> h) {
        root = root_of(h.promise());
        root->active = h;
        root->pending = std::move(request);
    }
    SyscallResponse await_resume() { return std::move(root->result); }
};

inline SyscallAwaiter syscall(SyscallRequest request) { return SyscallAwaiter{std::move(request), nullptr}; }

struct SchedulerConfig {
    std::uint64_t runs_to_sleep = 512;
    double sleep_ms = 20.0;
    std::uint64_t lost_threshold = 8;
    std::uint64_t runs_to_sleep_min = 64;
    std::uint64_t runs_to_sleep_max = 8192;
    std::uint64_t backoff_step = 64;

    void validate() const;
};

struct RunStats {
    std::uint64_t machine_runs = 0;
    std::uint64_t syscalls_executed = 0;
    std::uint64_t syscalls_lost_per_sleep = 0;
    double wall_time_ms = 0;

    RunStats& operator+=(const RunStats& other);
};

/// Exponential increment above the lost-syscall threshold, linear back-off
/// otherwise, clamped to [min, max].
std::uint64_t adjust_runs_to_sleep(const SchedulerConfig& config, const RunStats& interval);

/// True once `runs_since_sleep` machine runs have accumulated.
bool idle_sleep_due(const SchedulerConfig& config, std::uint64_t runs_since_sleep);

enum class ThreadState { Ready, Blocked, Sleeping, Done };

struct ThreadInfo {
    ThreadId id = 0;
    MachineId machine = 0;
    ProcessId process = 0;
};

/// What the kernel did with a thread's pending syscall.
struct ExecResult {
    enum class Kind { Completed, Blocked, SleepThenComplete } kind = Kind::Completed;
    SyscallResponse response;
    SimTime wake_at = 0;

    static ExecResult completed(SyscallResponse r) { return {Kind::Completed, std::move(r), 0}; }
    static ExecResult blocked() { return {Kind::Blocked, {}, 0}; }
    static ExecResult sleep_then(SyscallResponse r, SimTime wake) { return {Kind::SleepThenComplete, std::move(r), wake}; }
};

using SyscallExecutor = std::function<ExecResult(const ThreadInfo&, const SyscallRequest&)>;

/// Called with (thread, exception) when a coroutine body throws.
using FaultHandler = std::function<void(const ThreadInfo&, std::exception_ptr)>;

class Scheduler {
public:
    ThreadId spawn(MachineId machine, ProcessId process, SimTask task);

    /// Moves a blocked thread back to Ready; the blocked syscall is retried
    /// on its next visit.
    void wake(ThreadId thread);

    void kill_thread(ThreadId thread);
    void kill_process(MachineId machine, ProcessId process);
    void kill_machine(MachineId machine);

    /// One pass over every machine holding a Ready thread at round start,
    /// in machine order, depth-first over processes and threads.
    RunStats run_round(const SyscallExecutor& execute, const FaultHandler& on_fault = {});

    /// Wakes sleepers whose deadline is <= now.
    void wake_sleepers(SimTime now);
    std::optional<SimTime> next_wake() const;

    bool has_ready() const { return !ready_machines_.empty(); }
    bool alive(ThreadId thread) const { return threads_.count(thread) != 0; }
    std::optional<ThreadState> state(ThreadId thread) const;
    std::size_t thread_count() const { return threads_.size(); }
    std::size_t thread_count(MachineId machine) const;
    std::uint64_t runs_of(MachineId machine) const;
    std::uint64_t rounds() const { return rounds_; }

    /// Ids of live threads in scheduling order; used for determinism checks.
    std::vector<ThreadId> threads_in_order() const;

    /// Trace of (machine, thread, opcode) for executed syscalls when enabled.
    struct TraceEntry {
        MachineId machine;
        ThreadId thread;
        Opcode opcode;
        friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
    };
    void enable_trace(bool on) { trace_enabled_ = on; }
    const std::vector<TraceEntry>& trace() const { return trace_; }

    ThreadId next_thread_id() const { return next_id_; }
    void set_next_thread_id(ThreadId id) { next_id_ = id; }

private:
    struct Thread {
        ThreadInfo info;
        SimTask task;
        ThreadState state = ThreadState::Ready;
        std::optional<SyscallRequest> pending;  // issued but not yet completed
        SimTime wake_at = 0;
    };

    void set_state(Thread& t, ThreadState s);
    void run_segment(ThreadId id, const SyscallExecutor& execute, const FaultHandler& on_fault, RunStats& stats);
    void erase(ThreadId id);

    std::map<ThreadId, Thread> threads_;
    // machine -> process -> threads
    std::map<MachineId, std::map<ProcessId, std::set<ThreadId>>> tree_;
    std::map<MachineId, std::size_t> ready_count_;
    std::set<MachineId> ready_machines_;
    std::set<std::pair<SimTime, ThreadId>> sleepers_;
    std::map<MachineId, std::uint64_t> runs_;
    std::uint64_t rounds_ = 0;
    ThreadId next_id_ = 1;
    ThreadId running_ = 0;
    bool running_killed_ = false;
    bool trace_enabled_ = false;
    std::vector<TraceEntry> trace_;
};

} // namespace attacksim
