#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace acdn {

// An IPv4 host address (/32).
class Ipv4Addr {
public:
    constexpr Ipv4Addr() = default;
    constexpr explicit Ipv4Addr(std::uint32_t value) : value_(value) {}

    // Dotted-quad parser; rejects anything but four decimal octets.
    static std::optional<Ipv4Addr> parse(std::string_view text);
    // Like parse() but throws DataError.
    static Ipv4Addr from_string(std::string_view text);

    constexpr std::uint32_t value() const { return value_; }
    std::string to_string() const;

    friend constexpr auto operator<=>(Ipv4Addr, Ipv4Addr) = default;

private:
    std::uint32_t value_ = 0;
};

// A /24 prefix, identified by its network address.
class Slash24 {
public:
    constexpr Slash24() = default;
    constexpr explicit Slash24(Ipv4Addr addr) : network_(addr.value() & 0xFFFFFF00u) {}

    // Accepts "a.b.c.0", "a.b.c.0/24" and, leniently, any member address.
    static std::optional<Slash24> parse(std::string_view text);
    static Slash24 from_string(std::string_view text);

    constexpr Ipv4Addr network() const { return Ipv4Addr{network_}; }
    constexpr bool contains(Ipv4Addr addr) const { return (addr.value() & 0xFFFFFF00u) == network_; }
    // "a.b.c.0/24"
    std::string to_string() const;

    friend constexpr auto operator<=>(Slash24, Slash24) = default;

private:
    std::uint32_t network_ = 0;
};

inline Slash24 slash24_of(Ipv4Addr addr) { return Slash24{addr}; }

}  // namespace acdn

template <>
struct std::hash<acdn::Ipv4Addr> {
    std::size_t operator()(acdn::Ipv4Addr a) const noexcept { return std::hash<std::uint32_t>{}(a.value()); }
};

template <>
struct std::hash<acdn::Slash24> {
    std::size_t operator()(acdn::Slash24 s) const noexcept {
        return std::hash<std::uint32_t>{}(s.network().value());
    }
};
