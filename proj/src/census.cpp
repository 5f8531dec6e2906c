#include "acdn/census.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "acdn/continents.hpp"
#include "acdn/detail/parallel.hpp"
#include "acdn/error.hpp"

namespace acdn {

void validate_target_list(const TargetList& targets) {
    std::set<std::uint32_t> ranks;
    for (const auto& t : targets) {
        if (t.rank == 0) throw DataError("target rank must be positive: " + t.url);
        if (!ranks.insert(t.rank).second) throw DataError("duplicate target rank " + std::to_string(t.rank));
    }
}

namespace {

bool valid_hostname(std::string_view host) {
    if (host.empty() || host.size() > 253) return false;
    if (host.find('.') == std::string_view::npos) return false;
    std::size_t label = 0;
    for (std::size_t i = 0; i <= host.size(); ++i) {
        if (i == host.size() || host[i] == '.') {
            if (label == 0 || label > 63) return false;
            if (host[i - 1] == '-' || host[i - label] == '-') return false;
            label = 0;
            continue;
        }
        const char c = host[i];
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
        ++label;
    }
    return true;
}

}  // namespace

std::optional<std::string> hostname_from_url(std::string_view url) {
    while (!url.empty() && std::isspace(static_cast<unsigned char>(url.front()))) url.remove_prefix(1);
    while (!url.empty() && std::isspace(static_cast<unsigned char>(url.back()))) url.remove_suffix(1);
    if (auto scheme = url.find("://"); scheme != std::string_view::npos) {
        auto name = url.substr(0, scheme);
        if (name.empty() || !std::all_of(name.begin(), name.end(), [](char c) {
                return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
            }))
            return std::nullopt;
        url.remove_prefix(scheme + 3);
    }
    url = url.substr(0, url.find_first_of("/?#"));
    if (auto at = url.rfind('@'); at != std::string_view::npos) url.remove_prefix(at + 1);
    if (auto colon = url.find(':'); colon != std::string_view::npos) {
        auto port = url.substr(colon + 1);
        if (!std::all_of(port.begin(), port.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
            return std::nullopt;
        url = url.substr(0, colon);
    }
    if (!url.empty() && url.back() == '.') url.remove_suffix(1);
    std::string host(url);
    std::transform(host.begin(), host.end(), host.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (!valid_hostname(host)) return std::nullopt;
    return host;
}

HostExtraction extract_hostnames(const TargetList& targets) {
    HostExtraction out;
    std::map<std::string, std::uint32_t> best;
    for (const auto& t : targets) {
        auto host = hostname_from_url(t.url);
        if (!host) {
            out.warnings.push_back({"extract", t.url, "malformed URL skipped"});
            continue;
        }
        auto [it, inserted] = best.emplace(*host, t.rank);
        if (!inserted) it->second = std::min(it->second, t.rank);
    }
    for (auto& [host, rank] : best) out.hosts.push_back({rank, host});
    std::sort(out.hosts.begin(), out.hosts.end(), [](const RankedHost& a, const RankedHost& b) {
        return std::tie(a.rank, a.host) < std::tie(b.rank, b.host);
    });
    return out;
}

Resolution resolve_targets(const std::vector<RankedHost>& hosts, const Resolver& resolver) {
    Resolution out;
    std::set<Ipv4Addr> all;
    for (const auto& h : hosts) {
        std::vector<Ipv4Addr> addrs;
        try {
            addrs = resolver(h.host);
        } catch (const std::exception& e) {
            out.warnings.push_back({"resolve", h.host, std::string("resolver failure: ") + e.what()});
            continue;
        }
        std::sort(addrs.begin(), addrs.end());
        addrs.erase(std::unique(addrs.begin(), addrs.end()), addrs.end());
        if (addrs.empty()) out.warnings.push_back({"resolve", h.host, "no addresses (NXDOMAIN)"});
        all.insert(addrs.begin(), addrs.end());
        out.by_host[h.host] = std::move(addrs);
    }
    out.addresses.assign(all.begin(), all.end());
    for (Ipv4Addr a : out.addresses) out.groups[slash24_of(a)].push_back(a);
    return out;
}

const char* to_string(SubnetVerdict v) {
    switch (v) {
        case SubnetVerdict::unicast: return "unicast";
        case SubnetVerdict::anycast: return "anycast";
        case SubnetVerdict::excluded_conservative: return "excluded_conservative";
        case SubnetVerdict::unmeasured: return "unmeasured";
    }
    return "unknown";
}

std::optional<SubnetVerdict> subnet_verdict_from_string(std::string_view s) {
    for (auto v : {SubnetVerdict::unicast, SubnetVerdict::anycast, SubnetVerdict::excluded_conservative,
                   SubnetVerdict::unmeasured})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

std::vector<std::size_t> representative_indices(std::size_t members, std::size_t k) {
    std::vector<std::size_t> idx;
    if (members == 0 || k == 0) return idx;
    if (k >= members) {
        for (std::size_t i = 0; i < members; ++i) idx.push_back(i);
        return idx;
    }
    for (std::size_t i = 0; i < k; ++i) idx.push_back(i * members / k);
    return idx;
}

CensusReport run_census(const Slash24Groups& groups, const Prober& prober, const std::vector<VantagePoint>& vps,
                        const CityDb* cities, const CensusConfig& cfg) {
    CensusReport report;
    if (vps.size() < 2)
        report.warnings.push_back({"census", "vantage_points",
                                   "fewer than two vantage points; no anycast verdict is possible"});

    struct Probe {
        std::size_t vp;
        Ipv4Addr target;
    };
    std::vector<Probe> probes;
    for (const auto& [prefix, members] : groups) {
        auto& rec = report.subnets[prefix];
        rec.prefix = prefix;
        rec.members = members;
        std::sort(rec.members.begin(), rec.members.end());
        for (std::size_t i : representative_indices(rec.members.size(), cfg.representatives_per_slash24)) {
            rec.probed.push_back(rec.members[i]);
            for (std::size_t v = 0; v < vps.size(); ++v) probes.push_back({v, rec.members[i]});
        }
        report.stats.ip32s += rec.members.size();
        report.stats.probed_ip32s += rec.probed.size();
    }
    report.stats.slash24s = report.subnets.size();

    std::vector<std::optional<double>> rtts(probes.size());
    detail::parallel_for(probes.size(), cfg.max_in_flight,
                         [&](std::size_t i) { rtts[i] = prober(vps[probes[i].vp], probes[i].target); });

    Campaign campaign;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        ++report.stats.probes_sent;
        if (!rtts[i]) {
            ++report.stats.probes_missing;
            continue;
        }
        const auto& vp = vps[probes[i].vp];
        campaign[probes[i].target].push_back({vp.id, vp.location, probes[i].target, *rtts[i], 0});
    }

    BatchOutcome batch = classify_batch(campaign, cities, cfg.detect);
    report.failures = std::move(batch.failures);
    for (const auto& [prefix, rec] : report.subnets) {
        for (Ipv4Addr ip : rec.probed) {
            if (!campaign.count(ip)) report.failures.push_back({ip, "no measurement answered"});
        }
    }
    std::sort(report.failures.begin(), report.failures.end(),
              [](const DetectionFailure& a, const DetectionFailure& b) { return a.target < b.target; });

    std::map<Slash24, std::size_t> classified;
    for (auto& r : batch.results) {
        auto& rec = report.subnets.at(slash24_of(r.target));
        ++classified[rec.prefix];
        if (r.verdict == Verdict::anycast) {
            rec.anycast_members.push_back(r.target);
            ++report.stats.anycast_ip32s;
        }
        if (r.verdict == Verdict::anycast && r.num_locations > rec.location_count) {
            rec.location_count = r.num_locations;
            rec.instances = std::move(r.instances);
        } else if (rec.location_count == 0 && r.num_locations > 0 && rec.anycast_members.empty()) {
            // unicast members keep their single instance for geolocation
            rec.location_count = r.num_locations;
            rec.instances = std::move(r.instances);
        }
    }

    for (auto& [prefix, rec] : report.subnets) {
        if (!rec.anycast_members.empty()) {
            rec.verdict = SubnetVerdict::anycast;
            ++report.stats.anycast_slash24s;
        } else if (classified[prefix] == 0) {
            rec.verdict = SubnetVerdict::unmeasured;
            rec.location_count = 0;
        } else {
            rec.verdict = SubnetVerdict::unicast;
        }
        for (const auto& inst : rec.instances) {
            if (!inst.location) continue;
            if (auto cont = continent_of(inst.location->country)) rec.continents.emplace(*cont);
        }
    }
    return report;
}

CensusReport filter_conservative(CensusReport report, std::size_t min_locations) {
    if (min_locations < 2) throw std::invalid_argument("min_locations must be at least 2");
    report.min_locations = min_locations;
    report.stats.anycast_slash24s = 0;
    for (auto& [prefix, rec] : report.subnets) {
        if (rec.verdict == SubnetVerdict::anycast && rec.location_count < min_locations)
            rec.verdict = SubnetVerdict::excluded_conservative;
        if (rec.verdict == SubnetVerdict::anycast) ++report.stats.anycast_slash24s;
    }
    report.stats.excluded_slash24s = static_cast<std::size_t>(
        std::count_if(report.subnets.begin(), report.subnets.end(), [](const auto& kv) {
            return kv.second.verdict == SubnetVerdict::excluded_conservative;
        }));
    return report;
}

std::set<Slash24> anycast_slash24s(const CensusReport& report) {
    std::set<Slash24> out;
    for (const auto& [prefix, rec] : report.subnets)
        if (rec.verdict == SubnetVerdict::anycast) out.insert(prefix);
    return out;
}

nlohmann::json export_geojson(const CensusReport& report, const std::map<Slash24, std::string>& owners) {
    nlohmann::json features = nlohmann::json::array();
    std::size_t unlocated = 0;
    for (const auto& [prefix, rec] : report.subnets) {
        if (rec.verdict != SubnetVerdict::anycast) continue;
        for (const auto& inst : rec.instances) {
            if (!inst.location) {
                ++unlocated;
                continue;
            }
            nlohmann::json props = {
                {"slash24", prefix.to_string()},
                {"city", inst.location->name},
                {"country", inst.location->country},
                {"confidence", inst.high_confidence ? "high" : "low"},
                {"radius_km", inst.disk.radius_km()},
                {"witness_vp", inst.witness_vp},
            };
            if (auto it = owners.find(prefix); it != owners.end()) props["owner"] = it->second;
            features.push_back({
                {"type", "Feature"},
                {"geometry",
                 {{"type", "Point"},
                  {"coordinates", {inst.location->location.lon(), inst.location->location.lat()}}}},
                {"properties", std::move(props)},
            });
        }
    }
    return {
        {"type", "FeatureCollection"},
        {"properties", {{"features", features.size()}, {"unlocated_instances", unlocated}}},
        {"features", std::move(features)},
    };
}

}  // namespace acdn
