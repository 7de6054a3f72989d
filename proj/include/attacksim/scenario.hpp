#pragma once

// Scenario documents (JSON, schema_version 1): loading with located
// validation errors, snapshots, world hashing and the N x M benchmark
// topology generator.

#include "attacksim/world.hpp"

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace attacksim {

inline constexpr int kScenarioSchema = 1;

struct LoadOptions {
    /// Relative file references resolve against this directory.
    std::filesystem::path base_dir = ".";
    std::optional<std::uint64_t> seed;
    std::vector<std::filesystem::path> extra_vulndb;
    std::vector<std::filesystem::path> extra_templates;
};

/// Builds a world. Errors are Error(Validation) or ParseError whose message
/// starts with a JSON pointer to the offending value, e.g.
/// "/machines/3/interfaces/0/address: duplicate address 10.0.0.5".
/// File references are inlined into the stored scenario document so that
/// snapshots are self-contained.
std::unique_ptr<World> load_scenario(const nlohmann::json& doc, const LoadOptions& options = {});
std::unique_ptr<World> load_scenario_file(const std::filesystem::path& file, LoadOptions options = {});

/// {"schema_version", "scenario", "state"}. Throws Busy mid-action.
nlohmann::json snapshot(const World& world);

/// Inverse of snapshot. An empty or null document yields an empty world.
std::unique_ptr<World> restore(const nlohmann::json& snapshot);

/// Canonical dump of topology, host profiles and dynamic state.
nlohmann::json describe(const World& world);
std::uint64_t world_hash(const World& world);

struct GeneratorOptions {
    std::size_t networks = 100;
    std::size_t machines_per_network = 10;
    std::uint64_t seed = 1;
    /// Puts an IDS sensor on every tenth network.
    bool ids = true;
};

/// Networks 10.<1+i/250>.<i%250>.0/24 behind one router each, all routers on
/// a 10.0.0.0/16 core. Exactly networks * machines_per_network machines;
/// the attacker is machine 1 of network 0.
nlohmann::json generate_scenario(const GeneratorOptions& options);

/// Vulnerability entry used by the generator and fixtures: remote IIS 4/5
/// exploit on Windows NT4 server.
std::string_view sample_vulndb();
std::string_view sample_signatures();

} // namespace attacksim
