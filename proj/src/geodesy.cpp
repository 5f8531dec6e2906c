#include "acdn/geodesy.hpp"

#include <cmath>
#include <stdexcept>

namespace acdn {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double wrap_longitude(double lon) {
    double wrapped = std::fmod(lon, 360.0);
    if (wrapped <= -180.0) wrapped += 360.0;
    if (wrapped > 180.0) wrapped -= 360.0;
    return wrapped;
}

}  // namespace

GeoPoint::GeoPoint(double lat_deg, double lon_deg) {
    if (!std::isfinite(lat_deg) || !std::isfinite(lon_deg))
        throw std::invalid_argument("GeoPoint: non-finite coordinate");
    if (lat_deg < -90.0 || lat_deg > 90.0)
        throw std::invalid_argument("GeoPoint: latitude out of [-90, 90]");
    lat_ = lat_deg;
    lon_ = wrap_longitude(lon_deg);
}

LatencyDisk::LatencyDisk(GeoPoint center, double radius_km) : center_(center) {
    if (!std::isfinite(radius_km) || radius_km < 0.0)
        throw std::invalid_argument("LatencyDisk: radius must be finite and nonnegative");
    if (radius_km >= kHalfCircumferenceKm) {
        radius_km_ = kHalfCircumferenceKm;
        covers_sphere_ = true;
    } else {
        radius_km_ = radius_km;
    }
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    const double lat1 = a.lat() * kDegToRad;
    const double lat2 = b.lat() * kDegToRad;
    const double dlat = lat2 - lat1;
    const double dlon = (b.lon() - a.lon()) * kDegToRad;
    const double s_lat = std::sin(dlat / 2.0);
    const double s_lon = std::sin(dlon / 2.0);
    double h = s_lat * s_lat + std::cos(lat1) * std::cos(lat2) * s_lon * s_lon;
    if (h > 1.0) h = 1.0;
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

double rtt_to_radius_km(double rtt_ms, double speed_km_per_ms) {
    if (!std::isfinite(rtt_ms) || rtt_ms < 0.0)
        throw std::invalid_argument("rtt_to_radius_km: RTT must be finite and nonnegative");
    if (!(speed_km_per_ms > 0.0)) throw std::invalid_argument("rtt_to_radius_km: speed must be positive");
    return rtt_ms / 2.0 * speed_km_per_ms;
}

double radius_to_rtt_ms(double distance_km, double speed_km_per_ms) {
    if (!(speed_km_per_ms > 0.0)) throw std::invalid_argument("radius_to_rtt_ms: speed must be positive");
    return 2.0 * distance_km / speed_km_per_ms;
}

bool disks_disjoint(const LatencyDisk& a, const LatencyDisk& b) {
    if (a.covers_sphere() || b.covers_sphere()) return false;
    return haversine_km(a.center(), b.center()) > a.radius_km() + b.radius_km();
}

bool point_in_disk(const GeoPoint& p, const LatencyDisk& d) {
    if (d.covers_sphere()) return true;
    return haversine_km(p, d.center()) <= d.radius_km();
}

}  // namespace acdn
