#include "acdn/events.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "acdn/error.hpp"

namespace acdn {

TtlPair ttl_initial_and_hops(int observed_ttl) {
    if (observed_ttl < 1 || observed_ttl > 255) throw std::invalid_argument("observed TTL outside 1..255");
    for (int initial : kInitialTtls)
        if (initial >= observed_ttl) return {initial, initial - observed_ttl};
    return {255, 255 - observed_ttl};  // unreachable
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty set");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return (lower + upper) / 2.0;
}

const char* to_string(RoutingEventKind k) {
    switch (k) {
        case RoutingEventKind::rtt_shift: return "rtt_shift";
        case RoutingEventKind::ttl_pattern_change: return "ttl_pattern_change";
        case RoutingEventKind::ttfb_shift: return "ttfb_shift";
    }
    return "unknown";
}

namespace {

double bin_start_of(double ts, double bin_s) { return std::floor(ts / bin_s) * bin_s; }

void check_member(Slash24 slash24, const FlowRecord& f) {
    if (!slash24.contains(f.server_ip))
        throw DataError("flow to " + f.server_ip.to_string() + " outside " + slash24.to_string());
}

double median_of(const std::vector<SeriesBin>& bins, std::size_t from, std::size_t to) {
    std::vector<double> v;
    for (std::size_t i = from; i < to; ++i) v.push_back(bins[i].level);
    return median(std::move(v));
}

}  // namespace

MetricSeries build_series(Slash24 slash24, std::span<const FlowRecord> flows, double bin_s, SeriesMetric metric,
                          std::size_t min_samples) {
    if (!(bin_s > 0.0)) throw std::invalid_argument("bin size must be positive");
    std::map<double, std::vector<double>> per_bin;
    for (const auto& f : flows) {
        check_member(slash24, f);
        per_bin[bin_start_of(f.ts_start, bin_s)].push_back(metric == SeriesMetric::rtt ? f.min_rtt_ms : f.ttfb_ms);
    }
    MetricSeries s{slash24, metric, bin_s, {}};
    for (auto& [start, values] : per_bin) {
        if (values.size() < std::max<std::size_t>(min_samples, 1)) continue;
        const std::size_t n = values.size();
        s.bins.push_back({start, median(std::move(values)), n});
    }
    return s;
}

TtlPatternSeries build_ttl_series(Slash24 slash24, std::span<const FlowRecord> flows, double bin_s,
                                  std::size_t min_support, std::size_t min_samples) {
    if (!(bin_s > 0.0)) throw std::invalid_argument("bin size must be positive");
    std::map<double, std::map<TtlPair, std::size_t>> per_bin;
    for (const auto& f : flows) {
        check_member(slash24, f);
        ++per_bin[bin_start_of(f.ts_start, bin_s)][ttl_initial_and_hops(f.min_ttl)];
    }
    TtlPatternSeries s{slash24, bin_s, {}};
    for (const auto& [start, counts] : per_bin) {
        std::size_t total = 0;
        for (const auto& c : counts) total += c.second;
        if (total < std::max<std::size_t>(min_samples, 1)) continue;
        TtlPattern pattern, observed;
        for (const auto& [pair, n] : counts) {
            observed.insert(pair);
            if (n >= min_support) pattern.insert(pair);
        }
        if (!pattern.empty()) s.bins.push_back({start, std::move(pattern), std::move(observed)});
    }
    return s;
}

std::vector<RoutingEvent> detect_level_shifts(const MetricSeries& s, const LevelShiftConfig& cfg) {
    std::vector<RoutingEvent> events;
    const std::size_t p = std::max<std::size_t>(cfg.persistence_bins, 1);
    const std::size_t n = s.bins.size();
    if (n < 2 * p) return events;
    const RoutingEventKind kind =
        s.metric == SeriesMetric::rtt ? RoutingEventKind::rtt_shift : RoutingEventKind::ttfb_shift;

    std::size_t regime_start = 0;
    std::size_t min_regime = p;
    for (std::size_t i = p; i + p <= n;) {
        if (i - regime_start < min_regime) {
            ++i;
            continue;
        }
        const double baseline = median_of(s.bins, regime_start, i);
        const double threshold = std::max(cfg.abs_min_ms, cfg.rel_min * baseline);
        bool shifted = true;
        for (std::size_t j = i; j < i + p && shifted; ++j)
            shifted = std::abs(s.bins[j].level - baseline) >= threshold;
        if (!shifted) {
            ++i;
            continue;
        }
        const std::size_t settle = std::max(cfg.settle_bins, p);
        RoutingEvent e;
        e.slash24 = s.slash24;
        e.ts = s.bins[i].bin_start;
        e.kind = kind;
        e.before = baseline;
        e.after = median_of(s.bins, i, std::min(n, i + settle));
        events.push_back(std::move(e));
        regime_start = i;
        min_regime = settle;
        i += p;
    }
    return events;
}

std::vector<RoutingEvent> detect_ttl_pattern_changes(const TtlPatternSeries& s, std::size_t persistence_bins) {
    std::vector<RoutingEvent> events;
    const std::size_t p = std::max<std::size_t>(persistence_bins, 1);
    const std::size_t n = s.bins.size();
    if (n < 2) return events;
    // supported pairs within the pattern, and the pattern within what was seen
    auto consistent = [&](std::size_t j, const TtlPattern& pattern) {
        const auto& b = s.bins[j];
        if (!std::includes(pattern.begin(), pattern.end(), b.pattern.begin(), b.pattern.end())) return false;
        return std::all_of(pattern.begin(), pattern.end(),
                           [&](const TtlPair& x) { return b.pattern.count(x) || b.observed.count(x); });
    };
    auto holds = [&](std::size_t from, const TtlPattern& pattern) {
        if (from + p > n) return false;
        for (std::size_t j = from; j < from + p; ++j)
            if (!consistent(j, pattern)) return false;
        return true;
    };

    std::size_t i = 0;
    while (i < n && !holds(i, s.bins[i].pattern)) ++i;
    if (i >= n) return events;
    TtlPattern baseline = s.bins[i].pattern;
    for (i += p; i + p <= n;) {
        if (!consistent(i, baseline) && holds(i, s.bins[i].pattern)) {
            RoutingEvent e;
            e.slash24 = s.slash24;
            e.ts = s.bins[i].bin_start;
            e.kind = RoutingEventKind::ttl_pattern_change;
            e.before = baseline;
            e.after = s.bins[i].pattern;
            baseline = s.bins[i].pattern;
            events.push_back(std::move(e));
            i += p;
        } else {
            ++i;
        }
    }
    return events;
}

std::vector<RoutingEvent> correlate_events(std::span<const RoutingEvent> rtt_events,
                                           std::span<const RoutingEvent> ttl_events,
                                           std::span<const RoutingEvent> ttfb_events, std::size_t window_bins,
                                           double bin_s) {
    if (!(bin_s > 0.0)) throw std::invalid_argument("bin size must be positive");
    std::vector<RoutingEvent> all;
    for (auto group : {rtt_events, ttl_events, ttfb_events}) all.insert(all.end(), group.begin(), group.end());
    if (all.empty()) return all;
    for (const auto& e : all) {
        if (e.slash24 != all.front().slash24) throw DataError("events from different /24s cannot be correlated");
        const double offset = std::fmod(e.ts, bin_s);
        if (std::abs(offset) > 1e-6 && std::abs(offset - bin_s) > 1e-6)
            throw DataError("event timestamp " + std::to_string(e.ts) + " is not aligned to the binning");
    }
    std::stable_sort(all.begin(), all.end(), [](const RoutingEvent& a, const RoutingEvent& b) {
        return a.ts != b.ts ? a.ts < b.ts : a.kind < b.kind;
    });

    const double window_s = static_cast<double>(window_bins) * bin_s;
    std::vector<RoutingEvent> merged;
    std::set<RoutingEventKind> kinds;
    double last_ts = 0.0;
    auto close_group = [&] {
        if (merged.empty()) return;
        merged.back().confidence = static_cast<int>(kinds.size());
        merged.back().corroborated_by.assign(kinds.begin(), kinds.end());
    };
    for (const auto& e : all) {
        const bool joins = !merged.empty() && e.ts - last_ts <= window_s + 1e-9 && !kinds.count(e.kind);
        if (!joins) {
            close_group();
            merged.push_back(e);
            kinds.clear();
        }
        kinds.insert(e.kind);
        last_ts = e.ts;
    }
    close_group();
    return merged;
}

std::vector<FloorViolation> check_ttfb_floor(std::span<const FlowRecord> flows, double bin_s) {
    if (!(bin_s > 0.0)) throw std::invalid_argument("bin size must be positive");
    struct Minima {
        double ttfb = INFINITY;
        double rtt = INFINITY;
    };
    std::map<std::pair<Slash24, double>, Minima> per_bin;
    for (const auto& f : flows) {
        auto& m = per_bin[{slash24_of(f.server_ip), bin_start_of(f.ts_start, bin_s)}];
        m.ttfb = std::min(m.ttfb, f.ttfb_ms);
        m.rtt = std::min(m.rtt, f.min_rtt_ms);
    }
    std::vector<FloorViolation> out;
    for (const auto& [key, m] : per_bin)
        if (m.ttfb < 2.0 * m.rtt) out.push_back({key.first, key.second, m.ttfb, m.rtt});
    return out;
}

SubnetEvents analyze_subnet_events(Slash24 slash24, std::span<const FlowRecord> flows, const EventsConfig& cfg) {
    SubnetEvents out;
    out.slash24 = slash24;
    out.rtt = build_series(slash24, flows, cfg.bin_s, SeriesMetric::rtt, cfg.min_samples);
    out.ttfb = build_series(slash24, flows, cfg.bin_s, SeriesMetric::ttfb, cfg.min_samples);
    out.ttl = build_ttl_series(slash24, flows, cfg.bin_s, cfg.min_support, cfg.min_samples);
    out.rtt_events = detect_level_shifts(out.rtt, cfg.level);
    out.ttfb_events = detect_level_shifts(out.ttfb, cfg.level);
    out.ttl_events = detect_ttl_pattern_changes(out.ttl, cfg.ttl_persistence_bins);
    out.correlated = correlate_events(out.rtt_events, out.ttl_events, out.ttfb_events, cfg.window_bins, cfg.bin_s);
    out.floor_violations = check_ttfb_floor(flows, cfg.bin_s);
    return out;
}

}  // namespace acdn
