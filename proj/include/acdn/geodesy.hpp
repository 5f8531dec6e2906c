#pragma once

#include <numbers>

namespace acdn {

// Spherical Earth model.
inline constexpr double kEarthRadiusKm = 6371.0;
// Largest great-circle distance on the sphere (pi * R).
inline constexpr double kHalfCircumferenceKm = std::numbers::pi * kEarthRadiusKm;
// Signal propagation speed in fiber, 2/3 of c, in km per millisecond.
inline constexpr double kFiberSpeedKmPerMs = 2.0 / 3.0 * 299'792.458 / 1000.0;

// A point on the sphere; latitude in [-90, 90], longitude in (-180, 180].
class GeoPoint {
public:
    constexpr GeoPoint() = default;
    // Throws std::invalid_argument on non-finite input or latitude out of range.
    // Longitude is wrapped into (-180, 180].
    GeoPoint(double lat_deg, double lon_deg);

    constexpr double lat() const { return lat_; }
    constexpr double lon() const { return lon_; }

    friend constexpr bool operator==(const GeoPoint&, const GeoPoint&) = default;

private:
    double lat_ = 0.0;
    double lon_ = 0.0;
};

// The region reachable from a vantage point within one latency budget.
// Radii larger than the half circumference are clamped and the disk is
// marked as covering the whole sphere.
class LatencyDisk {
public:
    LatencyDisk() = default;
    // Throws std::invalid_argument if radius_km is negative or not finite.
    LatencyDisk(GeoPoint center, double radius_km);

    const GeoPoint& center() const { return center_; }
    double radius_km() const { return radius_km_; }
    bool covers_sphere() const { return covers_sphere_; }

private:
    GeoPoint center_;
    double radius_km_ = 0.0;
    bool covers_sphere_ = false;
};

double haversine_km(const GeoPoint& a, const GeoPoint& b);

// Half the RTT at propagation speed `speed_km_per_ms`.
// Throws std::invalid_argument for negative or non-finite RTT.
double rtt_to_radius_km(double rtt_ms, double speed_km_per_ms = kFiberSpeedKmPerMs);

// Inverse of rtt_to_radius_km: minimum RTT for a one-way distance.
double radius_to_rtt_ms(double distance_km, double speed_km_per_ms = kFiberSpeedKmPerMs);

bool disks_disjoint(const LatencyDisk& a, const LatencyDisk& b);

// Boundary inclusive.
bool point_in_disk(const GeoPoint& p, const LatencyDisk& d);

}  // namespace acdn
