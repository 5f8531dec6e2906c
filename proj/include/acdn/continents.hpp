#pragma once

#include <optional>
#include <string_view>

namespace acdn {

// Continent code (EU, NA, SA, AS, AF, OC) for an ISO 3166-1 alpha-2 country
// code, case-insensitive. Antarctica and unknown codes map to nullopt.
std::optional<std::string_view> continent_of(std::string_view country_iso2);

}  // namespace acdn
