#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace attacksim {

using MachineId = std::uint32_t;
using SegmentId = std::uint32_t;
using AgentId = std::uint64_t;
using ProcessId = std::uint64_t;
using ThreadId = std::uint64_t;
using RequestId = std::uint64_t;
using ActionInstanceId = std::uint64_t;

/// Simulated milliseconds since scenario start.
using SimTime = std::int64_t;

inline constexpr AgentId kNoAgent = 0;

/// Named action parameters ("host", "port", "ports", "range", ...).
using Params = std::map<std::string, std::string>;

} // namespace attacksim
