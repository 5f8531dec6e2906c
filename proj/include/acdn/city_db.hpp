#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acdn/geodesy.hpp"

namespace acdn {

struct City {
    std::string name;
    std::string country;  // ISO 3166-1 alpha-2
    GeoPoint location;
    std::uint64_t population = 0;
};

// Geolocation candidates. (name, country) pairs are unique.
class CityDb {
public:
    CityDb() = default;
    // Throws DataError on duplicate (name, country) keys.
    explicit CityDb(std::vector<City> entries);

    const std::vector<City>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<City> entries_;
};

}  // namespace acdn
