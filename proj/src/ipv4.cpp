#include "acdn/ipv4.hpp"

#include <charconv>

#include "acdn/error.hpp"

namespace acdn {

std::optional<Ipv4Addr> Ipv4Addr::parse(std::string_view text) {
    std::uint32_t value = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (p == end || *p != '.') return std::nullopt;
            ++p;
        }
        if (p == end || *p < '0' || *p > '9') return std::nullopt;
        unsigned part = 0;
        auto [next, ec] = std::from_chars(p, end, part);
        if (ec != std::errc{} || part > 255 || next - p > 3) return std::nullopt;
        value = (value << 8) | part;
        p = next;
    }
    if (p != end) return std::nullopt;
    return Ipv4Addr{value};
}

Ipv4Addr Ipv4Addr::from_string(std::string_view text) {
    if (auto a = parse(text)) return *a;
    throw DataError("invalid IPv4 address '" + std::string(text) + "'");
}

std::string Ipv4Addr::to_string() const {
    std::string out;
    out.reserve(15);
    for (int shift = 24; shift >= 0; shift -= 8) {
        out += std::to_string((value_ >> shift) & 0xFFu);
        if (shift) out += '.';
    }
    return out;
}

std::optional<Slash24> Slash24::parse(std::string_view text) {
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        if (text.substr(slash + 1) != "24") return std::nullopt;
        text = text.substr(0, slash);
    }
    auto addr = Ipv4Addr::parse(text);
    if (!addr) return std::nullopt;
    return Slash24{*addr};
}

Slash24 Slash24::from_string(std::string_view text) {
    if (auto s = parse(text)) return *s;
    throw DataError("invalid /24 prefix '" + std::string(text) + "'");
}

std::string Slash24::to_string() const { return network().to_string() + "/24"; }

}  // namespace acdn
