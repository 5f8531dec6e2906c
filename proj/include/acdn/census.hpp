#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "acdn/detect.hpp"
#include "acdn/ipv4.hpp"
#include "json.hpp"

namespace acdn {

struct TargetEntry {
    std::uint32_t rank = 0;
    std::string url;
};

using TargetList = std::vector<TargetEntry>;

// Throws DataError unless ranks are positive and unique.
void validate_target_list(const TargetList& targets);

// Census warnings are part of the output, not log lines.
struct Warning {
    std::string stage;
    std::string subject;
    std::string message;
};

struct RankedHost {
    std::uint32_t rank = 0;
    std::string host;
};

struct HostExtraction {
    std::vector<RankedHost> hosts;  // ordered by rank
    std::vector<Warning> warnings;
};

// Lowercased host of a URL, with scheme, credentials, port, path, query and
// fragment stripped. A missing scheme is accepted ("example.com/x").
std::optional<std::string> hostname_from_url(std::string_view url);

// One entry per distinct host, keeping the best (lowest) rank.
HostExtraction extract_hostnames(const TargetList& targets);

// Name resolution effect. An empty result means the name did not resolve;
// a thrown exception is reported as a resolver failure.
using Resolver = std::function<std::vector<Ipv4Addr>(const std::string& host)>;

using Slash24Groups = std::map<Slash24, std::vector<Ipv4Addr>>;

struct Resolution {
    std::vector<Ipv4Addr> addresses;  // unique, sorted
    Slash24Groups groups;             // members sorted
    std::map<std::string, std::vector<Ipv4Addr>> by_host;
    std::vector<Warning> warnings;
};

Resolution resolve_targets(const std::vector<RankedHost>& hosts, const Resolver& resolver);

// Probing effect: RTT in ms, or nullopt on timeout.
using Prober = std::function<std::optional<double>(const VantagePoint& vp, Ipv4Addr target)>;

struct CensusConfig {
    // Members probed per /24; the rest inherit the /24 verdict.
    std::size_t representatives_per_slash24 = 4;
    // Concurrent prober calls; 0 picks hardware concurrency.
    unsigned max_in_flight = 0;
    DetectConfig detect;
};

enum class SubnetVerdict { unicast, anycast, excluded_conservative, unmeasured };

const char* to_string(SubnetVerdict v);
std::optional<SubnetVerdict> subnet_verdict_from_string(std::string_view s);

struct SubnetRecord {
    Slash24 prefix;
    SubnetVerdict verdict = SubnetVerdict::unicast;
    std::size_t location_count = 0;
    std::set<std::string> continents;
    std::vector<Ipv4Addr> members;
    std::vector<Ipv4Addr> probed;
    std::vector<Ipv4Addr> anycast_members;
    // Instances of the probed member with the most locations.
    std::vector<AnycastInstance> instances;
};

struct CensusStats {
    std::size_t ip32s = 0;
    std::size_t slash24s = 0;
    std::size_t probed_ip32s = 0;
    std::size_t probes_sent = 0;
    std::size_t probes_missing = 0;
    std::size_t anycast_ip32s = 0;
    std::size_t anycast_slash24s = 0;
    std::size_t excluded_slash24s = 0;
};

struct CensusReport {
    std::map<Slash24, SubnetRecord> subnets;
    CensusStats stats;
    std::vector<DetectionFailure> failures;
    std::vector<Warning> warnings;
    std::optional<std::size_t> min_locations;  // set once filtered
};

// Indices of up to k evenly spaced members of a sorted member list.
std::vector<std::size_t> representative_indices(std::size_t members, std::size_t k);

CensusReport run_census(const Slash24Groups& groups, const Prober& prober, const std::vector<VantagePoint>& vps,
                        const CityDb* cities, const CensusConfig& cfg = {});

// Demotes anycast /24s seen in fewer than min_locations places.
// Throws std::invalid_argument when min_locations < 2.
CensusReport filter_conservative(CensusReport report, std::size_t min_locations);

// /24 prefixes with an anycast verdict.
std::set<Slash24> anycast_slash24s(const CensusReport& report);

// Point features for every located instance of every anycast /24.
nlohmann::json export_geojson(const CensusReport& report, const std::map<Slash24, std::string>& owners = {});

}  // namespace acdn
