#pragma once

#include "attacksim/scenario.hpp"
#include "attacksim/world.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace testing {

inline std::filesystem::path data_path(const std::string& name) {
    return std::filesystem::path(ATTACKSIM_TEST_DATA) / name;
}

inline std::unique_ptr<attacksim::World> lab(std::uint64_t seed = 1) {
    attacksim::LoadOptions o;
    o.seed = seed;
    return attacksim::load_scenario_file(data_path("lab.json"), o);
}

/// Small hand-rolled generator over a seeded stream.
struct Gen {
    attacksim::SeededRng rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return rng.uniform_int(lo, hi); }
    bool coin() { return between(0, 1) == 1; }
    std::string bytes(std::size_t max_len) {
        std::string s(between(0, max_len), '\0');
        for (auto& c : s) c = static_cast<char>(between(0, 255));
        return s;
    }
    std::int64_t any_int() { return static_cast<std::int64_t>(rng.uniform_int(0, UINT64_MAX - 1)); }
};

} // namespace testing
