#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "acdn/city_db.hpp"
#include "acdn/geodesy.hpp"
#include "acdn/ipv4.hpp"

namespace acdn {

struct VantagePoint {
    std::string id;
    GeoPoint location;
};

// One RTT sample from a vantage point to a target address.
struct PingMeasurement {
    std::string vp_id;
    GeoPoint vp_location;
    Ipv4Addr target;
    double rtt_ms = 0.0;
    std::int64_t timestamp = 0;
};

// One inferred replica site.
struct AnycastInstance {
    LatencyDisk disk;
    std::string witness_vp;
    std::optional<City> location;
    bool high_confidence = false;
};

enum class Verdict { unicast, anycast };

const char* to_string(Verdict v);

struct DetectionResult {
    Ipv4Addr target;
    Verdict verdict = Verdict::unicast;
    // The vantage points whose disks are disjoint, ordered by id.
    std::optional<std::pair<std::string, std::string>> witness_pair;
    std::vector<AnycastInstance> instances;
    std::size_t num_locations = 0;
};

// Per-target failure inside a batch.
struct DetectionFailure {
    Ipv4Addr target;
    std::string reason;
};

enum class GreedyOrder {
    smallest_radius,  // tighter disks first
    vp_id,            // plain lexicographic vantage point order
};

struct DetectConfig {
    double speed_km_per_ms = kFiberSpeedKmPerMs;
    double high_confidence_radius_km = 300.0;
    GreedyOrder order = GreedyOrder::smallest_radius;
    // Worker threads for classify_batch; 0 picks hardware concurrency.
    unsigned threads = 0;
};

// Verdict only: `instances` is left empty and `num_locations` is the pairwise
// lower bound (2 when a witness exists, 1 otherwise).
// Throws DataError on empty input, mixed targets, duplicate vantage points or
// invalid RTTs.
DetectionResult detect_anycast(std::span<const PingMeasurement> ms, const DetectConfig& cfg = {});

// Greedy maximal set of pairwise-disjoint latency disks. Disks that cover the
// whole sphere are never selected. Same errors as detect_anycast.
std::vector<AnycastInstance> enumerate_instances(std::span<const PingMeasurement> ms,
                                                 const DetectConfig& cfg = {});

// Labels the instance with the most populous city inside its disk (ties by
// name, then country) and sets the high-confidence flag from the radius.
AnycastInstance geolocate_instance(AnycastInstance inst, const CityDb& cities,
                                   const DetectConfig& cfg = {});

// detect + enumerate + geolocate for one target. `cities` may be null.
DetectionResult classify_target(std::span<const PingMeasurement> ms, const CityDb* cities,
                                const DetectConfig& cfg = {});

using Campaign = std::map<Ipv4Addr, std::vector<PingMeasurement>>;

Campaign group_by_target(std::span<const PingMeasurement> ms);

struct BatchOutcome {
    std::vector<DetectionResult> results;  // ordered by target
    std::vector<DetectionFailure> failures;
};

// Classifies every target group; a failing group becomes a failure record and
// never aborts the batch. Output is independent of the thread count.
BatchOutcome classify_batch(const Campaign& campaign, const CityDb* cities, const DetectConfig& cfg = {});

}  // namespace acdn
