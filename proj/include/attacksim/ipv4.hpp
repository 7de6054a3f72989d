#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace attacksim {

class Ipv4 {
public:
    constexpr Ipv4() = default;
    constexpr explicit Ipv4(std::uint32_t value) : value_(value) {}

    static std::optional<Ipv4> parse(std::string_view text);
    /// Throws Error(Addressing) on malformed input.
    static Ipv4 from_string(std::string_view text);

    constexpr std::uint32_t value() const { return value_; }
    std::string to_string() const;

    constexpr bool is_any() const { return value_ == 0; }

    friend constexpr auto operator<=>(Ipv4, Ipv4) = default;

private:
    std::uint32_t value_ = 0;
};

/// Address block "a.b.c.d/len". Len 0 matches everything.
class Cidr {
public:
    constexpr Cidr() = default;
    constexpr Cidr(Ipv4 base, int prefix_len) : base_(Ipv4(base.value() & mask_for(prefix_len))), len_(prefix_len) {}

    static std::optional<Cidr> parse(std::string_view text);
    static Cidr from_string(std::string_view text);
    static constexpr Cidr any() { return Cidr(Ipv4(0), 0); }

    constexpr bool contains(Ipv4 addr) const { return (addr.value() & mask_for(len_)) == base_.value(); }
    constexpr Ipv4 base() const { return base_; }
    constexpr int prefix_len() const { return len_; }
    std::string to_string() const;

    /// Host addresses of the block, excluding network and broadcast for len <= 30.
    std::uint64_t host_count() const;
    Ipv4 host(std::uint64_t index) const;

    friend constexpr bool operator==(const Cidr&, const Cidr&) = default;

private:
    static constexpr std::uint32_t mask_for(int len) {
        return len <= 0 ? 0u : (len >= 32 ? 0xffffffffu : ~((1u << (32 - len)) - 1u));
    }

    Ipv4 base_;
    int len_ = 0;
};

} // namespace attacksim
