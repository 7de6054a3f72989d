#include "attacksim/sched.hpp"

#include "attacksim/error.hpp"

#include <algorithm>
#include <chrono>

namespace attacksim {

void SchedulerConfig::validate() const {
    if (sleep_ms <= 0) throw Error(ErrorCode::Validation, "sleep_ms must be positive");
    if (runs_to_sleep_min == 0 || runs_to_sleep_min > runs_to_sleep_max)
        throw Error(ErrorCode::Validation, "runs-to-sleep bounds must satisfy 0 < min <= max");
    if (runs_to_sleep < runs_to_sleep_min || runs_to_sleep > runs_to_sleep_max)
        throw Error(ErrorCode::Validation, "runs_to_sleep outside its bounds");
}

RunStats& RunStats::operator+=(const RunStats& other) {
    machine_runs += other.machine_runs;
    syscalls_executed += other.syscalls_executed;
    syscalls_lost_per_sleep += other.syscalls_lost_per_sleep;
    wall_time_ms += other.wall_time_ms;
    return *this;
}

std::uint64_t adjust_runs_to_sleep(const SchedulerConfig& config, const RunStats& interval) {
    std::uint64_t runs = config.runs_to_sleep;
    if (interval.syscalls_lost_per_sleep > config.lost_threshold) {
        runs = runs > config.runs_to_sleep_max / 2 ? config.runs_to_sleep_max : runs * 2;
    } else {
        runs = runs < config.runs_to_sleep_min + config.backoff_step ? config.runs_to_sleep_min : runs - config.backoff_step;
    }
    return std::clamp(runs, config.runs_to_sleep_min, config.runs_to_sleep_max);
}

bool idle_sleep_due(const SchedulerConfig& config, std::uint64_t runs_since_sleep) {
    return runs_since_sleep >= config.runs_to_sleep;
}

ThreadId Scheduler::spawn(MachineId machine, ProcessId process, SimTask task) {
    ThreadId id = next_id_++;
    Thread t;
    t.info = ThreadInfo{id, machine, process};
    t.task = std::move(task);
    t.state = ThreadState::Done;
    auto [it, ok] = threads_.emplace(id, std::move(t));
    tree_[machine][process].insert(id);
    set_state(it->second, ThreadState::Ready);
    return id;
}

void Scheduler::set_state(Thread& t, ThreadState s) {
    if (t.state == s) return;
    auto m = t.info.machine;
    if (t.state == ThreadState::Ready) {
        if (--ready_count_[m] == 0) {
            ready_count_.erase(m);
            ready_machines_.erase(m);
        }
    }
    if (t.state == ThreadState::Sleeping) sleepers_.erase({t.wake_at, t.info.id});
    t.state = s;
    if (s == ThreadState::Ready) {
        ++ready_count_[m];
        ready_machines_.insert(m);
    }
    if (s == ThreadState::Sleeping) sleepers_.insert({t.wake_at, t.info.id});
}

void Scheduler::wake(ThreadId thread) {
    auto it = threads_.find(thread);
    if (it != threads_.end() && it->second.state == ThreadState::Blocked) set_state(it->second, ThreadState::Ready);
}

void Scheduler::erase(ThreadId id) {
    auto it = threads_.find(id);
    if (it == threads_.end()) return;
    auto& t = it->second;
    set_state(t, ThreadState::Done);
    auto m = tree_.find(t.info.machine);
    if (m != tree_.end()) {
        auto p = m->second.find(t.info.process);
        if (p != m->second.end()) {
            p->second.erase(id);
            if (p->second.empty()) m->second.erase(p);
        }
        if (m->second.empty()) tree_.erase(m);
    }
    threads_.erase(it);
}

void Scheduler::kill_thread(ThreadId thread) {
    if (thread == running_) {
        running_killed_ = true;
        return;
    }
    erase(thread);
}

void Scheduler::kill_process(MachineId machine, ProcessId process) {
    auto m = tree_.find(machine);
    if (m == tree_.end()) return;
    auto p = m->second.find(process);
    if (p == m->second.end()) return;
    std::vector<ThreadId> ids(p->second.begin(), p->second.end());
    for (auto id : ids) kill_thread(id);
}

void Scheduler::kill_machine(MachineId machine) {
    auto m = tree_.find(machine);
    if (m == tree_.end()) return;
    std::vector<ThreadId> ids;
    for (const auto& [process, threads] : m->second) ids.insert(ids.end(), threads.begin(), threads.end());
    for (auto id : ids) kill_thread(id);
}

void Scheduler::run_segment(ThreadId id, const SyscallExecutor& execute, const FaultHandler& on_fault, RunStats& stats) {
    auto& t = threads_.at(id);
    const ThreadInfo info = t.info;
    // Coroutine bodies and the kernel may kill the running thread (a local
    // exploit crashing its own machine); the erase is deferred until the
    // frame is suspended again.
    running_ = id;
    running_killed_ = false;
    auto killed = [&] {
        if (!running_killed_) return false;
        running_ = 0;
        running_killed_ = false;
        erase(id);
        return true;
    };

    if (!t.pending) {
        t.task.resume();
        if (killed()) return;
        auto& promise = t.task.promise();
        if (promise.error) {
            auto error = promise.error;
            running_ = 0;
            erase(id);
            if (on_fault) on_fault(info, error);
            return;
        }
        if (t.task.done()) {
            running_ = 0;
            erase(id);
            return;
        }
        t.pending = std::move(promise.pending);
        promise.pending.reset();
        if (!t.pending) {
            running_ = 0;
            erase(id);
            if (on_fault)
                on_fault(info, std::make_exception_ptr(Error(ErrorCode::Validation, "thread suspended without a syscall")));
            return;
        }
    }

    SyscallRequest request = *t.pending;
    ExecResult result = execute(info, request);
    if (result.kind != ExecResult::Kind::Blocked) {
        ++stats.syscalls_executed;
        if (trace_enabled_) trace_.push_back({info.machine, id, request.opcode});
    }
    if (killed()) return;
    running_ = 0;

    auto& thread = threads_.at(id);
    switch (result.kind) {
    case ExecResult::Kind::Blocked:
        set_state(thread, ThreadState::Blocked);
        return;
    case ExecResult::Kind::Completed:
        thread.task.promise().result = std::move(result.response);
        thread.pending.reset();
        break;
    case ExecResult::Kind::SleepThenComplete:
        thread.task.promise().result = std::move(result.response);
        thread.pending.reset();
        set_state(thread, ThreadState::Done);  // leave Ready before re-keying
        thread.wake_at = result.wake_at;
        set_state(thread, ThreadState::Sleeping);
        break;
    }
}

RunStats Scheduler::run_round(const SyscallExecutor& execute, const FaultHandler& on_fault) {
    auto start = std::chrono::steady_clock::now();
    RunStats stats;
    std::vector<MachineId> machines(ready_machines_.begin(), ready_machines_.end());
    for (auto m : machines) {
        auto tree = tree_.find(m);
        if (tree == tree_.end()) continue;
        std::vector<ThreadId> ids;
        for (const auto& [process, threads] : tree->second) ids.insert(ids.end(), threads.begin(), threads.end());
        bool ran = false;
        for (auto id : ids) {
            auto it = threads_.find(id);
            if (it == threads_.end() || it->second.state != ThreadState::Ready) continue;
            if (!ran) {
                ran = true;
                ++stats.machine_runs;
                ++runs_[m];
            }
            run_segment(id, execute, on_fault, stats);
        }
    }
    ++rounds_;
    stats.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return stats;
}

void Scheduler::wake_sleepers(SimTime now) {
    while (!sleepers_.empty() && sleepers_.begin()->first <= now) {
        auto id = sleepers_.begin()->second;
        set_state(threads_.at(id), ThreadState::Ready);
    }
}

std::optional<SimTime> Scheduler::next_wake() const {
    if (sleepers_.empty()) return std::nullopt;
    return sleepers_.begin()->first;
}

std::optional<ThreadState> Scheduler::state(ThreadId thread) const {
    auto it = threads_.find(thread);
    if (it == threads_.end()) return std::nullopt;
    return it->second.state;
}

std::size_t Scheduler::thread_count(MachineId machine) const {
    auto m = tree_.find(machine);
    if (m == tree_.end()) return 0;
    std::size_t n = 0;
    for (const auto& [process, threads] : m->second) n += threads.size();
    return n;
}

std::uint64_t Scheduler::runs_of(MachineId machine) const {
    auto it = runs_.find(machine);
    return it == runs_.end() ? 0 : it->second;
}

std::vector<ThreadId> Scheduler::threads_in_order() const {
    std::vector<ThreadId> out;
    for (const auto& [m, processes] : tree_)
        for (const auto& [p, threads] : processes) out.insert(out.end(), threads.begin(), threads.end());
    return out;
}

} // namespace attacksim
