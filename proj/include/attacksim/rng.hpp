#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace attacksim {

/// Source of uniform draws in [0, 1). Exploit resolution and the action
/// library take this interface so tests can script exact draw sequences.
class RandomSource {
public:
    virtual ~RandomSource() = default;
    virtual double next01() = 0;
};

/// Seeded generator. The 53-bit mantissa construction is spelled out so
/// draws are identical across standard library implementations.
class SeededRng final : public RandomSource {
public:
    explicit SeededRng(std::uint64_t seed = 0) : engine_(seed) {}

    double next01() override { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform real in [lo, hi].
    double uniform(double lo, double hi) { return lo + (hi - lo) * next01(); }

    /// Uniform integer in [lo, hi].
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        std::uint64_t span = hi - lo + 1;
        if (span == 0) return engine_();
        // rejection keeps the draw unbiased
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
        std::uint64_t x;
        do { x = engine_(); } while (x >= limit);
        return lo + x % span;
    }

    std::string state() const {
        std::ostringstream out;
        out << engine_;
        return out.str();
    }

    void restore(const std::string& state) {
        std::istringstream in(state);
        in >> engine_;
        if (!in) throw std::invalid_argument("bad generator state");
    }

private:
    std::mt19937_64 engine_;
};

/// Replays a fixed list of draws, then fails. Test helper.
class ScriptedRandom final : public RandomSource {
public:
    explicit ScriptedRandom(std::vector<double> draws) : draws_(std::move(draws)) {}

    double next01() override {
        if (next_ >= draws_.size()) throw std::out_of_range("scripted draws exhausted");
        return draws_[next_++];
    }

    std::size_t consumed() const { return next_; }

private:
    std::vector<double> draws_;
    std::size_t next_ = 0;
};

} // namespace attacksim
