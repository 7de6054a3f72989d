#pragma once

// Static description of a simulated host as seen by exploit requirements:
// OS descriptor, installed applications and hidden parameters.

#include "attacksim/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace attacksim {

struct OSDescriptor {
    std::string name;         // windows, linux, openbsd, ...
    std::string arch;         // i386, x86_64, ...
    std::string version;      // nt4, 2000, 6.2, ...
    std::string edition;      // server, enterprise_server, workstation, ...
    std::string servicepack;  // 6, 6a, ...

    /// "name version" plus edition/servicepack when present.
    std::string label() const;

    friend bool operator==(const OSDescriptor&, const OSDescriptor&) = default;
};

enum class AppState { Running, Installed };

struct ApplicationInstance {
    std::string name;
    std::string version_major;
    std::string version_minor;
    AppState state = AppState::Running;
    std::vector<std::uint16_t> ports;
    std::string banner;
    /// Privilege an agent gets when this application is exploited.
    std::string privilege = "user";

    bool running() const { return state == AppState::Running; }
    std::string version() const { return version_minor.empty() ? version_major : version_major + "." + version_minor; }
};

struct HostProfile {
    OSDescriptor os;
    std::vector<ApplicationInstance> applications;
    std::map<std::string, std::string> hidden;

    const ApplicationInstance* application(const std::string& name) const;
    const ApplicationInstance* listener(std::uint16_t port) const;
};

} // namespace attacksim
