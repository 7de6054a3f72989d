#include "attacksim/error.hpp"
#include "attacksim/sched.hpp"
#include "attacksim/task.hpp"
#include "attacksim/world.hpp"

#include "doctest.h"
#include "support.hpp"

using namespace attacksim;

namespace {

SimTask spin() {
    for (;;) co_await syscall(sys::get_info("os"));
}

SimTask finite(int n) {
    for (int i = 0; i < n; ++i) co_await syscall(sys::get_info("os"));
}

ExecResult complete_all(const ThreadInfo&, const SyscallRequest&) { return ExecResult::completed({}); }

Task<std::int64_t> add_two() {
    auto a = co_await syscall(sys::get_info("a"));
    auto b = co_await syscall(sys::get_info("b"));
    co_return a.int_result(0) + b.int_result(0);
}

SimTask outer(std::int64_t& out) {
    out = co_await add_two();
    auto c = co_await syscall(sys::get_info("c"));
    out += c.int_result(0);
}

Task<void> failing() {
    co_await syscall(sys::get_info("x"));
    throw Error(ErrorCode::Command, "boom");
}

SimTask catches(bool& caught) {
    try {
        co_await failing();
    } catch (const Error&) {
        caught = true;
    }
    co_await syscall(sys::get_info("after"));
}

} // namespace

TEST_SUITE("sched") {

TEST_CASE("every runnable machine runs exactly once per round") {
    Scheduler s;
    testing::Gen g(9);
    std::map<MachineId, std::size_t> threads;
    for (MachineId m = 1; m <= 10; ++m) {
        auto n = g.between(1, 5);
        threads[m] = n;
        for (std::uint64_t i = 0; i < n; ++i) s.spawn(m, 1 + i % 2, spin());
    }
    s.enable_trace(true);
    for (int r = 0; r < 100; ++r) s.run_round(complete_all);
    for (const auto& [m, n] : threads) CHECK(s.runs_of(m) == 100);
    std::map<ThreadId, int> per_thread;
    for (const auto& e : s.trace()) ++per_thread[e.thread];
    CHECK(per_thread.size() == s.thread_count());
    for (const auto& [t, n] : per_thread) CHECK(n == 100);
}

TEST_CASE("rounds visit machines, processes and threads in order") {
    Scheduler s;
    auto t3 = s.spawn(2, 1, spin());
    auto t1 = s.spawn(1, 2, spin());
    auto t2 = s.spawn(1, 1, spin());
    s.enable_trace(true);
    s.run_round(complete_all);
    REQUIRE(s.trace().size() == 3);
    CHECK(s.trace()[0].thread == t2);
    CHECK(s.trace()[1].thread == t1);
    CHECK(s.trace()[2].thread == t3);
    CHECK(s.threads_in_order() == std::vector<ThreadId>{t2, t1, t3});
}

TEST_CASE("blocked threads stay off the run queue until woken") {
    Scheduler s;
    auto t = s.spawn(1, 1, spin());
    s.spawn(2, 1, spin());
    bool block = true;
    auto exec = [&](const ThreadInfo& info, const SyscallRequest&) {
        if (info.machine == 1 && block) return ExecResult::blocked();
        return ExecResult::completed({});
    };
    for (int r = 0; r < 10; ++r) s.run_round(exec);
    CHECK(s.runs_of(1) == 1);
    CHECK(s.runs_of(2) == 10);
    CHECK(s.state(t) == ThreadState::Blocked);
    block = false;
    s.wake(t);
    s.run_round(exec);
    CHECK(s.runs_of(1) == 2);
}

TEST_CASE("sleeping threads resume at their deadline") {
    Scheduler s;
    auto t = s.spawn(1, 1, finite(2));
    auto exec = [](const ThreadInfo&, const SyscallRequest&) { return ExecResult::sleep_then({}, 100); };
    s.run_round(exec);
    CHECK(s.state(t) == ThreadState::Sleeping);
    CHECK(s.next_wake() == 100);
    CHECK_FALSE(s.has_ready());
    s.wake_sleepers(99);
    CHECK_FALSE(s.has_ready());
    s.wake_sleepers(100);
    CHECK(s.has_ready());
}

TEST_CASE("finished threads are reaped") {
    Scheduler s;
    s.spawn(1, 1, finite(3));
    for (int r = 0; r < 5; ++r) s.run_round(complete_all);
    CHECK(s.thread_count() == 0);
    CHECK(s.runs_of(1) == 4);
}

TEST_CASE("a thread killed by its own syscall is erased safely") {
    Scheduler s;
    auto t = s.spawn(1, 1, spin());
    s.spawn(1, 1, spin());
    auto exec = [&](const ThreadInfo& info, const SyscallRequest&) {
        if (info.id == t) s.kill_thread(t);
        return ExecResult::completed({});
    };
    s.run_round(exec);
    CHECK_FALSE(s.alive(t));
    CHECK(s.thread_count() == 1);
    s.kill_machine(1);
    CHECK(s.thread_count() == 0);
}

TEST_CASE("faults are reported and the thread removed") {
    Scheduler s;
    bool caught = false;
    auto t = s.spawn(1, 1, catches(caught));
    int faults = 0;
    for (int r = 0; r < 4; ++r) s.run_round(complete_all, [&](const ThreadInfo&, std::exception_ptr) { ++faults; });
    CHECK(caught);
    CHECK(faults == 0);
    CHECK_FALSE(s.alive(t));
}

TEST_CASE("nested tasks share the simulated thread") {
    Scheduler s;
    std::int64_t out = 0;
    std::int64_t next = 1;
    s.enable_trace(true);
    s.spawn(1, 1, outer(out));
    auto exec = [&](const ThreadInfo&, const SyscallRequest&) {
        return ExecResult::completed(SyscallResponse{SysStatus::Ok, {next++}});
    };
    for (int r = 0; r < 5; ++r) s.run_round(exec);
    CHECK(out == 1 + 2 + 3);
    CHECK(s.trace().size() == 3);
    CHECK(s.thread_count() == 0);
}

TEST_CASE("runs-to-sleep doubles above the threshold and backs off linearly") {
    SchedulerConfig c;
    RunStats burst;
    burst.syscalls_lost_per_sleep = 9;
    RunStats quiet;
    quiet.syscalls_lost_per_sleep = 8;
    c.runs_to_sleep = 512;
    CHECK(adjust_runs_to_sleep(c, burst) == 1024);
    CHECK(adjust_runs_to_sleep(c, quiet) == 448);
    c.runs_to_sleep = 8000;
    CHECK(adjust_runs_to_sleep(c, burst) == 8192);
    c.runs_to_sleep = 100;
    CHECK(adjust_runs_to_sleep(c, quiet) == 64);
    CHECK(idle_sleep_due(c, 100));
    CHECK_FALSE(idle_sleep_due(c, 99));
}

TEST_CASE("engine trace shows bursts doubling and idle periods walking back to the floor") {
    World w(1);
    auto seg = w.add_segment("lan", SegmentKind::Switch, Cidr::from_string("10.0.0.0/24"));
    for (int i = 0; i < 10; ++i) {
        MachineSpec spec;
        spec.name = "m" + std::to_string(i);
        spec.interfaces = {{Ipv4::from_string("10.0.0." + std::to_string(i + 1)), seg}};
        auto m = w.add_machine(spec);
        w.spawn(m, w.create_process(m, "spin"), spin());
    }
    int bursts = 3;
    w.set_sleeper([&](double) {
        if (bursts-- > 0)
            for (int i = 0; i < 20; ++i) w.inbox().push([] {});
    });
    w.run_until([&] { return w.sleeps() >= 3 + 63 + 2; });
    const auto& trace = w.sleep_trace();
    REQUIRE(trace.size() >= 68);
    CHECK(trace[0] == 1024);
    CHECK(trace[1] == 2048);
    CHECK(trace[2] == 4096);
    for (std::size_t i = 3; i < 66; ++i) CHECK(trace[i] == 4096 - 64 * (i - 2));
    CHECK(trace[65] == 64);
    CHECK(trace[66] == 64);
    CHECK(trace[67] == 64);
}

}
