#include "acdn/city_db.hpp"

#include <set>
#include <utility>

#include "acdn/error.hpp"

namespace acdn {

CityDb::CityDb(std::vector<City> entries) : entries_(std::move(entries)) {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& c : entries_) {
        if (!seen.emplace(c.name, c.country).second)
            throw DataError("duplicate city '" + c.name + "' in country '" + c.country + "'");
    }
}

}  // namespace acdn
