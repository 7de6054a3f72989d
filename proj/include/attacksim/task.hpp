#pragma once

// Nested coroutines for simulated threads. A Task<T> awaited from a SimTask
// (or from another Task) runs on the same simulated thread: its syscalls
// suspend the whole chain and the scheduler resumes the innermost frame.

#include "attacksim/sched.hpp"

#include <coroutine>
#include <exception>
#include <optional>
#include <utility>

namespace attacksim {

namespace detail {

template <typename T>
struct TaskPromise;

struct TaskPromiseBase {
    SimTask::promise_type* root = nullptr;
    std::coroutine_handle<> continuation;
    std::exception_ptr error;

    std::suspend_always initial_suspend() noexcept { return {}; }

    struct FinalAwaiter {
        bool await_ready() const noexcept { return false; }
        template <typename P>
        std::coroutine_handle<> await_suspend(std::coroutine_handle<P> h) noexcept {
            auto& p = h.promise();
            p.root->active = p.continuation;
            return p.continuation;
        }
        void await_resume() const noexcept {}
    };
    FinalAwaiter final_suspend() noexcept { return {}; }
    void unhandled_exception() noexcept { error = std::current_exception(); }
};

} // namespace detail

template <typename T = void>
class Task {
public:
    struct promise_type : detail::TaskPromiseBase {
        std::optional<T> value;
        Task get_return_object() { return Task(std::coroutine_handle<promise_type>::from_promise(*this)); }
        void return_value(T v) { value = std::move(v); }
    };

    explicit Task(std::coroutine_handle<promise_type> h) : handle_(h) {}
    Task(Task&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
    Task(const Task&) = delete;
    ~Task() {
        if (handle_) handle_.destroy();
    }

    bool await_ready() const noexcept { return false; }
    template <typename P>
    std::coroutine_handle<> await_suspend(std::coroutine_handle<P> parent) {
        auto* root = root_of(parent.promise());
        handle_.promise().root = root;
        handle_.promise().continuation = parent;
        root->active = handle_;
        return handle_;
    }
    T await_resume() {
        auto& p = handle_.promise();
        if (p.error) std::rethrow_exception(p.error);
        return std::move(*p.value);
    }

private:
    std::coroutine_handle<promise_type> handle_;
};

template <>
class Task<void> {
public:
    struct promise_type : detail::TaskPromiseBase {
        Task get_return_object() { return Task(std::coroutine_handle<promise_type>::from_promise(*this)); }
        void return_void() noexcept {}
    };

    explicit Task(std::coroutine_handle<promise_type> h) : handle_(h) {}
    Task(Task&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
    Task(const Task&) = delete;
    ~Task() {
        if (handle_) handle_.destroy();
    }

    bool await_ready() const noexcept { return false; }
    template <typename P>
    std::coroutine_handle<> await_suspend(std::coroutine_handle<P> parent) {
        auto* root = root_of(parent.promise());
        handle_.promise().root = root;
        handle_.promise().continuation = parent;
        root->active = handle_;
        return handle_;
    }
    void await_resume() {
        if (handle_.promise().error) std::rethrow_exception(handle_.promise().error);
    }

private:
    std::coroutine_handle<promise_type> handle_;
};

} // namespace attacksim
