#pragma once

#include <compare>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "acdn/flow.hpp"
#include "acdn/ipv4.hpp"

namespace acdn {

inline constexpr int kInitialTtls[] = {32, 64, 128, 255};

struct TtlPair {
    int initial = 0;
    int hops = 0;

    friend auto operator<=>(const TtlPair&, const TtlPair&) = default;
};

// Smallest common initial TTL not below the observed value, and the implied
// hop count. Throws std::invalid_argument outside 1..255.
TtlPair ttl_initial_and_hops(int observed_ttl);

enum class SeriesMetric { rtt, ttfb };

struct SeriesBin {
    double bin_start = 0.0;
    double level = 0.0;  // median of per-flow values
    std::size_t sample_count = 0;
};

struct MetricSeries {
    Slash24 slash24;
    SeriesMetric metric = SeriesMetric::rtt;
    double bin_s = 3600.0;
    std::vector<SeriesBin> bins;
};

// Median with the mean of the two middle values for even sizes.
double median(std::vector<double> values);

// Per-bin medians of min-RTT or TTFB over flows of one /24. Bins are aligned
// to multiples of bin_s; bins with fewer than min_samples flows are omitted.
// Throws DataError if a flow belongs to another /24.
MetricSeries build_series(Slash24 slash24, std::span<const FlowRecord> flows, double bin_s, SeriesMetric metric,
                          std::size_t min_samples = 5);

using TtlPattern = std::set<TtlPair>;

struct TtlBin {
    double bin_start = 0.0;
    TtlPattern pattern;   // pairs with enough support
    TtlPattern observed;  // every pair seen at all
};

struct TtlPatternSeries {
    Slash24 slash24;
    double bin_s = 3600.0;
    std::vector<TtlBin> bins;
};

// Per-bin sets of (initial, hops) pairs seen in at least min_support flows.
// Bins with fewer than min_samples flows, or where no pair reaches the
// support threshold, are omitted.
TtlPatternSeries build_ttl_series(Slash24 slash24, std::span<const FlowRecord> flows, double bin_s,
                                  std::size_t min_support = 3, std::size_t min_samples = 5);

enum class RoutingEventKind { rtt_shift, ttl_pattern_change, ttfb_shift };

const char* to_string(RoutingEventKind k);

using EventValue = std::variant<double, TtlPattern>;

struct RoutingEvent {
    Slash24 slash24;
    double ts = 0.0;  // start of the first deviating bin
    RoutingEventKind kind = RoutingEventKind::rtt_shift;
    EventValue before;
    EventValue after;
    // Number of distinct metric kinds that agree, 1..3.
    int confidence = 1;
    std::vector<RoutingEventKind> corroborated_by;
};

struct LevelShiftConfig {
    double abs_min_ms = 5.0;
    double rel_min = 0.5;
    std::size_t persistence_bins = 2;
    // Bins a new regime needs before it can itself be left again. Short
    // excursions right after a shift fold into the same episode.
    std::size_t settle_bins = 6;
};

// Baseline-median level-shift detector. A shift is reported at bin t when the
// P bins t..t+P-1 all differ from the current baseline by at least
// max(abs_min_ms, rel_min * baseline); the baseline then restarts from bin t.
// Series shorter than 2P bins yield no events.
std::vector<RoutingEvent> detect_level_shifts(const MetricSeries& s, const LevelShiftConfig& cfg = {});

// Reports a change when the supported TTL pattern differs from the current
// one and the new pattern holds for persistence_bins consecutive bins. A bin
// whose missing pairs were still seen below the support threshold is taken as
// undersampled, not as evidence against the current pattern.
std::vector<RoutingEvent> detect_ttl_pattern_changes(const TtlPatternSeries& s, std::size_t persistence_bins = 2);

// Merges events of one /24 whose onsets chain within window_bins of each
// other. The earliest event of a group represents it. Throws DataError on
// mixed prefixes or timestamps not aligned to bin_s.
std::vector<RoutingEvent> correlate_events(std::span<const RoutingEvent> rtt_events,
                                           std::span<const RoutingEvent> ttl_events,
                                           std::span<const RoutingEvent> ttfb_events, std::size_t window_bins,
                                           double bin_s);

// A bin whose minimum TTFB is below twice its minimum RTT.
struct FloorViolation {
    Slash24 slash24;
    double bin_start = 0.0;
    double min_ttfb_ms = 0.0;
    double min_rtt_ms = 0.0;
};

std::vector<FloorViolation> check_ttfb_floor(std::span<const FlowRecord> flows, double bin_s);

struct EventsConfig {
    double bin_s = 3600.0;
    std::size_t min_samples = 5;
    std::size_t min_support = 3;
    LevelShiftConfig level;
    std::size_t ttl_persistence_bins = 2;
    std::size_t window_bins = 2;
};

struct SubnetEvents {
    Slash24 slash24;
    MetricSeries rtt;
    MetricSeries ttfb;
    TtlPatternSeries ttl;
    std::vector<RoutingEvent> rtt_events;
    std::vector<RoutingEvent> ttl_events;
    std::vector<RoutingEvent> ttfb_events;
    std::vector<RoutingEvent> correlated;
    std::vector<FloorViolation> floor_violations;
};

// Full per-/24 pipeline over time-ordered flows of that /24.
SubnetEvents analyze_subnet_events(Slash24 slash24, std::span<const FlowRecord> flows, const EventsConfig& cfg = {});

}  // namespace acdn
