#include "acdn/characterize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "acdn/error.hpp"

namespace acdn {
namespace {

// Exact distinct counting over one group of flows.
struct Tally {
    std::unordered_set<std::uint32_t> servers;
    std::unordered_set<std::string_view> users;
    std::unordered_set<std::string_view> fqdns;
    std::uint64_t bytes = 0;
    std::uint64_t flows = 0;

    void add(const FlowRecord& f) {
        servers.insert(f.server_ip.value());
        users.insert(f.client_id);
        if (f.fqdn) fqdns.insert(*f.fqdn);
        bytes += f.bytes_down;
        ++flows;
    }
    void merge(const Tally& o) {
        servers.insert(o.servers.begin(), o.servers.end());
        users.insert(o.users.begin(), o.users.end());
        fqdns.insert(o.fqdns.begin(), o.fqdns.end());
        bytes += o.bytes;
        flows += o.flows;
    }
};

SubnetSummary to_summary(std::optional<Slash24> prefix, const Tally& t, TimeWindow window) {
    return {prefix, t.servers.size(), t.bytes, t.flows, t.users.size(), t.fqdns.size(), window};
}

}  // namespace

std::vector<SubnetSummary> subnet_summary(std::span<const FlowRecord> flows, TimeWindow window,
                                          const SummaryOptions& opts) {
    std::map<Slash24, Tally> per;
    for (const auto& f : flows)
        if (window.contains(f.ts_start)) per[slash24_of(f.server_ip)].add(f);

    std::vector<std::pair<Slash24, const Tally*>> ranked;
    for (const auto& [p, t] : per) ranked.emplace_back(p, &t);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second->users.size() > b.second->users.size();
    });

    std::vector<SubnetSummary> out;
    Tally others;
    bool has_others = false;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& [prefix, t] = ranked[i];
        const bool beyond_top = opts.top_n && i >= *opts.top_n;
        const bool below_cut = opts.others_cutoff && t->users.size() <= *opts.others_cutoff;
        if (beyond_top || below_cut) {
            others.merge(*t);
            has_others = true;
        } else {
            out.push_back(to_summary(prefix, *t, window));
        }
    }
    if (has_others) out.push_back(to_summary(std::nullopt, others, window));
    return out;
}

std::vector<ServiceRow> service_table(std::span<const FlowRecord> flows, std::size_t top_n,
                                      const PublicSuffixList& psl) {
    std::unordered_map<std::string, std::string> label_cache;
    std::map<std::string, Tally> per;
    for (const auto& f : flows) {
        std::string service(kUnknownService);
        if (f.fqdn) {
            auto [it, inserted] = label_cache.try_emplace(*f.fqdn);
            if (inserted) it->second = second_level_domain(*f.fqdn, psl);
            service = it->second;
        }
        per[service].add(f);
    }
    std::vector<ServiceRow> rows;
    for (const auto& [name, t] : per)
        rows.push_back({name, t.servers.size(), t.bytes, t.flows, t.users.size(), t.fqdns.size()});
    std::stable_sort(rows.begin(), rows.end(), [](const ServiceRow& a, const ServiceRow& b) { return a.users > b.users; });
    if (top_n != 0 && rows.size() > top_n) rows.resize(top_n);
    return rows;
}

std::vector<UserSeriesPoint> active_user_series(std::span<const FlowRecord> web_flows,
                                                const std::set<Slash24>& anycast, double bin_s, TimeWindow window) {
    if (!(bin_s > 0.0)) throw std::invalid_argument("bin size must be positive");
    struct Bin {
        std::unordered_set<std::string_view> active;
        std::unordered_set<std::string_view> anycast;
    };
    std::map<std::int64_t, Bin> bins;
    std::optional<std::int64_t> lo, hi;
    for (const auto& f : web_flows) {
        if (!window.contains(f.ts_start)) continue;
        const auto b = static_cast<std::int64_t>(std::floor(f.ts_start / bin_s));
        auto& bin = bins[b];
        bin.active.insert(f.client_id);
        if (anycast.count(slash24_of(f.server_ip))) bin.anycast.insert(f.client_id);
        lo = lo ? std::min(*lo, b) : b;
        hi = hi ? std::max(*hi, b) : b;
    }
    if (std::isfinite(window.start)) lo = static_cast<std::int64_t>(std::floor(window.start / bin_s));
    if (std::isfinite(window.end)) hi = static_cast<std::int64_t>(std::ceil(window.end / bin_s)) - 1;
    std::vector<UserSeriesPoint> out;
    if (!lo || !hi) return out;
    for (std::int64_t b = *lo; b <= *hi; ++b) {
        UserSeriesPoint p;
        p.bin_start = static_cast<double>(b) * bin_s;
        if (auto it = bins.find(b); it != bins.end()) {
            p.active_clients = it->second.active.size();
            p.anycast_clients = it->second.anycast.size();
            p.fraction = static_cast<double>(p.anycast_clients) / static_cast<double>(p.active_clients);
        }
        out.push_back(p);
    }
    return out;
}

std::vector<DiscoveryPoint> discovery_curve(std::span<const FlowRecord> flows, double reorder_tolerance_s) {
    std::vector<DiscoveryPoint> out;
    out.reserve(flows.size());
    std::unordered_set<std::uint32_t> seen;
    std::optional<double> latest;
    for (const auto& f : flows) {
        if (latest && f.ts_start < *latest - reorder_tolerance_s)
            throw DataError("flows out of order beyond tolerance at ts " + std::to_string(f.ts_start));
        latest = latest ? std::max(*latest, f.ts_start) : f.ts_start;
        seen.insert(f.server_ip.value());
        out.push_back({f.ts_start, seen.size()});
    }
    return out;
}

std::vector<DiscoveryPoint> compress_steps(std::span<const DiscoveryPoint> curve) {
    std::vector<DiscoveryPoint> out;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const bool changed = out.empty() || curve[i].distinct_servers != out.back().distinct_servers;
        if (changed || i + 1 == curve.size()) out.push_back(curve[i]);
    }
    return out;
}

FqdnIpMap build_fqdn_ip_map(std::span<const DnsObservation> observations) {
    FqdnIpMap out;
    for (const auto& obs : observations) out[obs.fqdn].insert(obs.answers.begin(), obs.answers.end());
    return out;
}

FqdnIpMap restrict_to_owner(const FqdnIpMap& map, Slash24 owner) {
    FqdnIpMap out;
    for (const auto& [fqdn, ips] : map) {
        if (std::any_of(ips.begin(), ips.end(), [&](Ipv4Addr ip) { return owner.contains(ip); }))
            out.emplace(fqdn, ips);
    }
    return out;
}

std::vector<CdfPoint> lb_cdf(const FqdnIpMap& map, LbScope scope) {
    std::map<std::uint64_t, std::uint64_t> histogram;
    std::uint64_t total = 0;
    for (const auto& [fqdn, ips] : map) {
        std::uint64_t n = 0;
        if (scope.within)
            n = static_cast<std::uint64_t>(std::count_if(ips.begin(), ips.end(),
                                                         [&](Ipv4Addr ip) { return scope.within->contains(ip); }));
        else
            n = ips.size();
        if (n == 0) continue;
        ++histogram[n];
        ++total;
    }
    std::vector<CdfPoint> out;
    std::uint64_t cum = 0;
    for (const auto& [x, count] : histogram) {
        cum += count;
        out.push_back({x, static_cast<double>(cum) / static_cast<double>(total)});
    }
    return out;
}

}  // namespace acdn
