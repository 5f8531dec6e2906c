#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "acdn/flow.hpp"
#include "acdn/ipv4.hpp"
#include "acdn/public_suffix.hpp"

namespace acdn {

// Half-open interval [start, end) of UTC seconds.
struct TimeWindow {
    double start = -std::numeric_limits<double>::infinity();
    double end = std::numeric_limits<double>::infinity();

    bool contains(double ts) const { return ts >= start && ts < end; }
    static TimeWindow all() { return {}; }

    friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

// Per-/24 aggregate. `slash24` is empty for the "Others" row.
struct SubnetSummary {
    std::optional<Slash24> slash24;
    std::uint64_t distinct_ip32 = 0;
    std::uint64_t volume_bytes = 0;
    std::uint64_t flow_count = 0;
    std::uint64_t user_count = 0;
    std::uint64_t fqdn_count = 0;
    TimeWindow window;

    friend bool operator==(const SubnetSummary&, const SubnetSummary&) = default;
};

struct SummaryOptions {
    // Rows ranked past top_n, or with user_count <= others_cutoff, are
    // merged into one "Others" row with exact distinct counts.
    std::optional<std::size_t> top_n;
    std::optional<std::uint64_t> others_cutoff;
};

// One row per /24 seen in the window, by user count descending (ties by
// prefix), with the optional Others row last.
std::vector<SubnetSummary> subnet_summary(std::span<const FlowRecord> flows, TimeWindow window,
                                          const SummaryOptions& opts = {});

struct ServiceRow {
    std::string service;
    std::uint64_t servers = 0;
    std::uint64_t volume_bytes = 0;
    std::uint64_t flows = 0;
    std::uint64_t users = 0;
    std::uint64_t fqdn_count = 0;

    friend bool operator==(const ServiceRow&, const ServiceRow&) = default;
};

inline constexpr std::string_view kUnknownService = "(unknown)";

// Flows grouped by service label, by users descending (ties by name); flows
// without an fqdn form the "(unknown)" group. top_n == 0 keeps every row.
std::vector<ServiceRow> service_table(std::span<const FlowRecord> flows, std::size_t top_n,
                                      const PublicSuffixList& psl = PublicSuffixList::builtin());

struct UserSeriesPoint {
    double bin_start = 0.0;
    std::optional<double> fraction;  // absent when no client was active
    std::uint64_t active_clients = 0;
    std::uint64_t anycast_clients = 0;

    friend bool operator==(const UserSeriesPoint&, const UserSeriesPoint&) = default;
};

// Per bin: clients with an anycast flow over clients with any flow. Bins are
// aligned to multiples of bin_s and span the window (or the data when the
// window is unbounded). Throws std::invalid_argument when bin_s <= 0.
std::vector<UserSeriesPoint> active_user_series(std::span<const FlowRecord> web_flows,
                                                const std::set<Slash24>& anycast, double bin_s = 3600.0,
                                                TimeWindow window = TimeWindow::all());

struct DiscoveryPoint {
    double ts = 0.0;
    std::uint64_t distinct_servers = 0;

    friend bool operator==(const DiscoveryPoint&, const DiscoveryPoint&) = default;
};

// Cumulative distinct servers after each flow. Throws DataError when a flow
// starts more than reorder_tolerance_s before an earlier one.
std::vector<DiscoveryPoint> discovery_curve(std::span<const FlowRecord> flows, double reorder_tolerance_s = 60.0);

// Keeps only the points where the count changes, plus the last point.
std::vector<DiscoveryPoint> compress_steps(std::span<const DiscoveryPoint> curve);

using FqdnIpMap = std::map<std::string, std::set<Ipv4Addr>>;

FqdnIpMap build_fqdn_ip_map(std::span<const DnsObservation> observations);

// FQDNs with at least one address inside the /24, with all their addresses.
FqdnIpMap restrict_to_owner(const FqdnIpMap& map, Slash24 owner);

struct LbScope {
    std::optional<Slash24> within;  // nullopt: count every address
};

struct CdfPoint {
    std::uint64_t x = 0;  // distinct addresses per fqdn
    double y = 0.0;       // fraction of fqdns with at most x addresses

    friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

// Empirical CDF of distinct addresses per FQDN. With a /24 scope only
// addresses inside it count and FQDNs with none are dropped.
std::vector<CdfPoint> lb_cdf(const FqdnIpMap& map, LbScope scope = {});

}  // namespace acdn
