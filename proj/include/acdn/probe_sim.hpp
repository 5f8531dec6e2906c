#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acdn/detect.hpp"
#include "acdn/events.hpp"
#include "acdn/flow.hpp"
#include "acdn/geodesy.hpp"
#include "acdn/ipv4.hpp"

namespace acdn {

// Stable 64-bit mixing used to derive per-entity random streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value);
std::uint64_t stable_hash(std::string_view text);

struct GeoBounds {
    double lat_min = -90.0;
    double lat_max = 90.0;
    double lon_min = -180.0;
    double lon_max = 180.0;

    static GeoBounds world() { return {}; }
    static GeoBounds europe() { return {35.0, 70.0, -10.0, 40.0}; }
};

struct SyntheticDeployment {
    Ipv4Addr target;
    std::vector<GeoPoint> sites;
    std::vector<int> ttl_initial;  // per site, one of 32/64/128/255
    std::uint64_t seed = 0;
};

// RTT = (2 d / v) * inflation + |N(0, jitter_ms)|, never below 2 d / v.
struct RttModel {
    double inflation = 1.5;
    double jitter_ms = 0.0;
    std::uint64_t seed = 0;
    double speed_km_per_ms = kFiberSpeedKmPerMs;
};

// Nearest site by great-circle distance (ties by index); stands in for BGP
// proximity.
std::size_t nearest_site(const GeoPoint& from, const SyntheticDeployment& deployment);

// Deterministic per (vp id, target, model seed). Throws std::invalid_argument
// for an empty deployment or inflation below 1.
PingMeasurement simulate_ping(const VantagePoint& vp, const SyntheticDeployment& deployment, const RttModel& model,
                              std::int64_t timestamp = 0);

// Sites drawn uniformly on the sphere inside the bounds with a minimum
// pairwise separation. Throws DataError when the separation cannot be met.
SyntheticDeployment gen_deployment(Ipv4Addr target, std::size_t n_sites, const GeoBounds& bounds,
                                   std::uint64_t seed, double min_separation_km = 500.0,
                                   std::size_t max_attempts_per_site = 10'000);

// Well-spread vantage points: a Fibonacci lattice under a seeded rotation.
// Ids are "vp000", "vp001", ...
std::vector<VantagePoint> gen_vantage_points(std::size_t n, std::uint64_t seed);

// ---- passive side ------------------------------------------------------

struct SubnetProfile {
    Slash24 prefix;
    bool anycast = true;
    std::string owner;
    std::size_t servers = 16;
    double weight = 1.0;  // share of flows
    double base_rtt_ms = 8.0;
    double rtt_jitter_ms = 1.0;
    std::vector<int> ttl_initial{64};  // per-server mixture, cycled over servers
    int hops = 9;
    double think_ms = 20.0;
    double ttfb_tail_ms = 40.0;
    std::size_t services = 8;
    std::size_t fqdns_per_service = 3;
    std::size_t ips_per_fqdn = 1;
    std::string suffix = "com";
    double bytes_median = 30'000.0;
};

enum class ScenarioEventKind {
    rtt,    // RTT level change (TTFB follows)
    ttl,    // initial-TTL mixture change
    ttfb,   // server think-time change
    route,  // RTT, TTL mixture and hops together
};

struct ScheduledEvent {
    Slash24 subnet;
    ScenarioEventKind kind = ScenarioEventKind::rtt;
    double at_s = 0.0;                  // offset from scenario start
    std::optional<double> until_s;      // revert instant, if any
    std::optional<double> rtt_ms;       // new RTT level
    std::vector<int> ttl_initial;       // new mixture
    std::optional<int> hops;            // new hop count
    std::optional<double> think_ms;     // new think time
    std::optional<double> transient_rtt_ms;  // excursion right before the revert
    double transient_s = 0.0;
};

struct FlowScenario {
    double start_ts = 1'409'529'600.0;  // 2014-09-01T00:00:00Z
    double duration_s = 0.0;
    std::size_t clients = 0;
    double active_prob_peak = 0.6;
    double active_prob_trough = 0.08;
    double peak_hour_utc = 20.0;
    double flows_per_active_hour = 6.0;
    double other_l7_fraction = 0.0;
    double dns_refresh_s = 21'600.0;
    std::vector<SubnetProfile> subnets;
    std::vector<ScheduledEvent> events;
};

// One injected change, per affected metric.
struct TruthEvent {
    Slash24 subnet;
    double ts = 0.0;
    RoutingEventKind kind = RoutingEventKind::rtt_shift;
    EventValue before;
    EventValue after;
};

struct FlowLog {
    std::vector<FlowRecord> flows;      // by ts_start, then generation order
    std::vector<DnsObservation> dns;    // by ts
    std::vector<TruthEvent> truth;      // by ts, then subnet, then kind
};

// Throws DataError on invalid scenarios, including events that change the
// same parameter of one subnet over overlapping intervals.
FlowLog gen_flowlog(const FlowScenario& scenario, std::uint64_t seed);

}  // namespace acdn
