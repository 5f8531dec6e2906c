#include "acdn/probe_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <tuple>

#include "acdn/error.hpp"

namespace acdn {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value) {
    // splitmix64 finalizer over the combined state
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (value + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t stable_hash(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double round_to(double value, double step) { return std::round(value / step) * step; }

// Rounds up to whole microseconds-of-ms (1e-3 ms) without going below value.
double ceil_ms(double value) {
    double r = std::ceil(value * 1000.0) / 1000.0;
    if (r < value) r += 0.001;
    return r;
}

double round_ms(double value) { return std::round(value * 1000.0) / 1000.0; }

GeoPoint rounded_point(double lat, double lon) {
    return GeoPoint(std::clamp(round_to(lat, 1e-4), -90.0, 90.0), round_to(lon, 1e-4));
}

}  // namespace

std::size_t nearest_site(const GeoPoint& from, const SyntheticDeployment& deployment) {
    if (deployment.sites.empty()) throw std::invalid_argument("deployment has no sites");
    std::size_t best = 0;
    double best_d = haversine_km(from, deployment.sites[0]);
    for (std::size_t i = 1; i < deployment.sites.size(); ++i) {
        const double d = haversine_km(from, deployment.sites[i]);
        if (d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

PingMeasurement simulate_ping(const VantagePoint& vp, const SyntheticDeployment& deployment, const RttModel& model,
                              std::int64_t timestamp) {
    if (model.inflation < 1.0) throw std::invalid_argument("RTT inflation must be at least 1");
    if (model.jitter_ms < 0.0) throw std::invalid_argument("jitter must be nonnegative");
    const auto site = nearest_site(vp.location, deployment);
    const double d = haversine_km(vp.location, deployment.sites[site]);
    const double floor_ms = radius_to_rtt_ms(d, model.speed_km_per_ms);
    double noise = 0.0;
    if (model.jitter_ms > 0.0) {
        std::mt19937_64 rng(mix_seed(mix_seed(model.seed, stable_hash(vp.id)), deployment.target.value()));
        noise = std::abs(std::normal_distribution<double>(0.0, model.jitter_ms)(rng));
    }
    const double rtt = ceil_ms(floor_ms * model.inflation + noise);
    return {vp.id, vp.location, deployment.target, std::max(rtt, floor_ms), timestamp};
}

SyntheticDeployment gen_deployment(Ipv4Addr target, std::size_t n_sites, const GeoBounds& bounds, std::uint64_t seed,
                                   double min_separation_km, std::size_t max_attempts_per_site) {
    if (n_sites == 0) throw std::invalid_argument("a deployment needs at least one site");
    if (bounds.lat_min > bounds.lat_max || bounds.lon_min > bounds.lon_max)
        throw std::invalid_argument("inverted bounds");
    std::mt19937_64 rng(mix_seed(seed, target.value()));
    std::uniform_real_distribution<double> z(std::sin(bounds.lat_min * kDeg), std::sin(bounds.lat_max * kDeg));
    std::uniform_real_distribution<double> lon(bounds.lon_min, bounds.lon_max);

    SyntheticDeployment dep{target, {}, {}, seed};
    for (std::size_t s = 0; s < n_sites; ++s) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < max_attempts_per_site && !placed; ++attempt) {
            const GeoPoint p = rounded_point(std::asin(std::clamp(z(rng), -1.0, 1.0)) / kDeg, lon(rng));
            placed = std::all_of(dep.sites.begin(), dep.sites.end(),
                                 [&](const GeoPoint& q) { return haversine_km(p, q) >= min_separation_km; });
            if (placed) dep.sites.push_back(p);
        }
        if (!placed)
            throw DataError("cannot place " + std::to_string(n_sites) + " sites " +
                            std::to_string(min_separation_km) + " km apart within bounds");
    }
    std::discrete_distribution<int> ttl_pick({50, 30, 15, 5});
    constexpr std::array<int, 4> ttls{64, 128, 255, 32};
    for (std::size_t s = 0; s < n_sites; ++s) dep.ttl_initial.push_back(ttls[static_cast<std::size_t>(ttl_pick(rng))]);
    return dep;
}

std::vector<VantagePoint> gen_vantage_points(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0x5650));
    // random unit quaternion (Shoemake)
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
    const double qa = std::sqrt(1 - u1) * std::sin(2 * std::numbers::pi * u2);
    const double qb = std::sqrt(1 - u1) * std::cos(2 * std::numbers::pi * u2);
    const double qc = std::sqrt(u1) * std::sin(2 * std::numbers::pi * u3);
    const double qd = std::sqrt(u1) * std::cos(2 * std::numbers::pi * u3);
    const double rot[3][3] = {
        {1 - 2 * (qc * qc + qd * qd), 2 * (qb * qc - qa * qd), 2 * (qb * qd + qa * qc)},
        {2 * (qb * qc + qa * qd), 1 - 2 * (qb * qb + qd * qd), 2 * (qc * qd - qa * qb)},
        {2 * (qb * qd - qa * qc), 2 * (qc * qd + qa * qb), 1 - 2 * (qb * qb + qc * qc)},
    };
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<VantagePoint> vps;
    vps.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double theta = golden * static_cast<double>(i);
        const double v[3] = {r * std::cos(theta), r * std::sin(theta), z};
        double w[3];
        for (int k = 0; k < 3; ++k) w[k] = rot[k][0] * v[0] + rot[k][1] * v[1] + rot[k][2] * v[2];
        const double lat = std::asin(std::clamp(w[2], -1.0, 1.0)) / kDeg;
        const double lon = std::atan2(w[1], w[0]) / kDeg;
        char id[32];
        std::snprintf(id, sizeof id, "vp%03zu", i);
        vps.push_back({id, rounded_point(lat, lon)});
    }
    return vps;
}

// ---- flow log ----------------------------------------------------------

namespace {

struct SubnetState {
    double rtt_ms;
    std::vector<int> ttl_initial;
    int hops;
    double think_ms;
};

struct Interval {
    double from;
    double to;
};

bool changes_rtt(ScenarioEventKind k) { return k == ScenarioEventKind::rtt || k == ScenarioEventKind::route; }
bool changes_ttl(ScenarioEventKind k) { return k == ScenarioEventKind::ttl || k == ScenarioEventKind::route; }
bool changes_think(ScenarioEventKind k) { return k == ScenarioEventKind::ttfb; }

Interval active_interval(const ScheduledEvent& e) {
    return {e.at_s, e.until_s ? *e.until_s : std::numeric_limits<double>::infinity()};
}

class ScenarioModel {
public:
    explicit ScenarioModel(const FlowScenario& sc) : sc_(sc) {
        for (std::size_t i = 0; i < sc.subnets.size(); ++i) {
            if (!index_.emplace(sc.subnets[i].prefix, i).second)
                throw DataError("duplicate subnet " + sc.subnets[i].prefix.to_string());
        }
        events_.resize(sc.subnets.size());
        for (const auto& e : sc.events) {
            auto it = index_.find(e.subnet);
            if (it == index_.end()) throw DataError("event on unknown subnet " + e.subnet.to_string());
            if (e.until_s && *e.until_s <= e.at_s) throw DataError("event ends before it starts");
            if (changes_rtt(e.kind) && !e.rtt_ms) throw DataError("rtt event without rtt_ms");
            if (changes_ttl(e.kind) && e.ttl_initial.empty() && !e.hops)
                throw DataError("ttl event without ttl_initial or hops");
            if (changes_think(e.kind) && !e.think_ms) throw DataError("ttfb event without think_ms");
            if (e.transient_rtt_ms && (!e.until_s || e.transient_s <= 0.0 || e.transient_s >= *e.until_s - e.at_s))
                throw DataError("transient excursion must lie inside a bounded event");
            for (const auto* other : events_[it->second]) {
                const auto a = active_interval(e), b = active_interval(*other);
                const bool overlap = a.from < b.to && b.from < a.to;
                const bool shared = (changes_rtt(e.kind) && changes_rtt(other->kind)) ||
                                    (changes_ttl(e.kind) && changes_ttl(other->kind)) ||
                                    (changes_think(e.kind) && changes_think(other->kind));
                if (overlap && shared)
                    throw DataError("overlapping contradictory events on " + e.subnet.to_string());
            }
            events_[it->second].push_back(&e);
        }
    }

    // State at offset t (seconds from scenario start); transient excursions
    // are included only when with_transient is set.
    SubnetState state(std::size_t subnet, double t, bool with_transient = true) const {
        const auto& p = sc_.subnets[subnet];
        SubnetState s{p.base_rtt_ms, p.ttl_initial, p.hops, p.think_ms};
        for (const auto* e : events_[subnet]) {
            const auto iv = active_interval(*e);
            if (t < iv.from || t >= iv.to) continue;
            if (e->rtt_ms) s.rtt_ms = *e->rtt_ms;
            if (!e->ttl_initial.empty()) s.ttl_initial = e->ttl_initial;
            if (e->hops) s.hops = *e->hops;
            if (e->think_ms) s.think_ms = *e->think_ms;
            if (with_transient && e->transient_rtt_ms && t >= iv.to - e->transient_s) s.rtt_ms = *e->transient_rtt_ms;
        }
        return s;
    }

    std::vector<TruthEvent> truth() const {
        std::vector<TruthEvent> out;
        for (std::size_t i = 0; i < sc_.subnets.size(); ++i) {
            for (const auto* e : events_[i]) {
                emit(out, i, e->at_s, state(i, e->at_s - 1e-3, false), state(i, e->at_s, false));
                if (e->until_s) {
                    const double revert = *e->until_s - (e->transient_rtt_ms ? e->transient_s : 0.0);
                    emit(out, i, revert, state(i, revert - 1e-3, false), state(i, *e->until_s, false));
                }
            }
        }
        std::sort(out.begin(), out.end(), [](const TruthEvent& a, const TruthEvent& b) {
            return std::tie(a.ts, a.subnet, a.kind) < std::tie(b.ts, b.subnet, b.kind);
        });
        return out;
    }

    static TtlPattern pattern(const SubnetState& s) {
        TtlPattern p;
        for (int init : s.ttl_initial) p.insert({init, s.hops});
        return p;
    }

private:
    void emit(std::vector<TruthEvent>& out, std::size_t i, double at, const SubnetState& before,
              const SubnetState& after) const {
        const Slash24 prefix = sc_.subnets[i].prefix;
        const double ts = sc_.start_ts + at;
        if (before.rtt_ms != after.rtt_ms)
            out.push_back({prefix, ts, RoutingEventKind::rtt_shift, before.rtt_ms, after.rtt_ms});
        if (pattern(before) != pattern(after))
            out.push_back({prefix, ts, RoutingEventKind::ttl_pattern_change, pattern(before), pattern(after)});
        const double ttfb_before = 2 * before.rtt_ms + before.think_ms;
        const double ttfb_after = 2 * after.rtt_ms + after.think_ms;
        if (ttfb_before != ttfb_after)
            out.push_back({prefix, ts, RoutingEventKind::ttfb_shift, ttfb_before, ttfb_after});
    }

    const FlowScenario& sc_;
    std::map<Slash24, std::size_t> index_;
    std::vector<std::vector<const ScheduledEvent*>> events_;
};

struct FqdnPlan {
    std::string name;
    std::vector<Ipv4Addr> ips;
};

std::vector<std::vector<FqdnPlan>> plan_fqdns(const FlowScenario& sc) {
    static constexpr const char* kHosts[] = {"www", "img", "cdn", "api", "static", "media"};
    std::vector<std::vector<FqdnPlan>> out;
    for (std::size_t si = 0; si < sc.subnets.size(); ++si) {
        const auto& p = sc.subnets[si];
        if (p.servers == 0 || p.servers > 254) throw DataError("servers per subnet must be in 1..254");
        if (p.services == 0 || p.fqdns_per_service == 0 || p.ips_per_fqdn == 0)
            throw DataError("services, fqdns_per_service and ips_per_fqdn must be positive");
        std::vector<FqdnPlan> plans;
        for (std::size_t svc = 0; svc < p.services; ++svc) {
            for (std::size_t h = 0; h < p.fqdns_per_service; ++h) {
                const std::size_t g = svc * p.fqdns_per_service + h;
                std::string host = kHosts[h % std::size(kHosts)];
                if (h >= std::size(kHosts)) host += std::to_string(h / std::size(kHosts));
                FqdnPlan plan{host + ".n" + std::to_string(si) + "svc" + std::to_string(svc) + "." + p.suffix, {}};
                for (std::size_t m = 0; m < std::min(p.ips_per_fqdn, p.servers); ++m) {
                    const std::size_t server = (g * 7 + m) % p.servers;
                    plan.ips.emplace_back(p.prefix.network().value() + 1 + static_cast<std::uint32_t>(server));
                }
                plans.push_back(std::move(plan));
            }
        }
        out.push_back(std::move(plans));
    }
    return out;
}

}  // namespace

FlowLog gen_flowlog(const FlowScenario& sc, std::uint64_t seed) {
    const ScenarioModel model(sc);
    FlowLog log;
    log.truth = model.truth();
    if (sc.clients == 0 || sc.duration_s <= 0.0 || sc.subnets.empty()) return log;
    if (sc.active_prob_peak < 0 || sc.active_prob_peak > 1 || sc.active_prob_trough < 0 || sc.active_prob_trough > 1)
        throw DataError("activity probabilities must lie in [0, 1]");
    if (sc.flows_per_active_hour < 1.0) throw DataError("flows_per_active_hour must be at least 1");

    const auto fqdns = plan_fqdns(sc);
    std::vector<double> weights;
    for (const auto& p : sc.subnets) weights.push_back(p.weight);
    std::discrete_distribution<std::size_t> pick_subnet(weights.begin(), weights.end());
    std::vector<std::discrete_distribution<std::size_t>> pick_service;
    for (const auto& p : sc.subnets) {
        std::vector<double> w;
        for (std::size_t k = 0; k < p.services; ++k) w.push_back(1.0 / static_cast<double>(k + 1));
        pick_service.emplace_back(w.begin(), w.end());
    }

    std::vector<std::string> client_ids;
    for (std::size_t c = 0; c < sc.clients; ++c) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "c%012llx",
                      static_cast<unsigned long long>(mix_seed(seed, c) & 0xFFFFFFFFFFFFull));
        client_ids.emplace_back(buf);
    }

    std::mt19937_64 rng(mix_seed(seed, 0xF10));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::poisson_distribution<int> extra_flows(sc.flows_per_active_hour - 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    struct DnsKey {
        std::size_t client;
        std::uint32_t ip;
        auto operator<=>(const DnsKey&) const = default;
    };
    std::map<DnsKey, std::pair<const std::string*, double>> dns_seen;

    const std::size_t hours = static_cast<std::size_t>(std::ceil(sc.duration_s / 3600.0));
    struct Pending {
        double ts;
        std::size_t subnet;
        const FqdnPlan* fqdn;
        Ipv4Addr server;
    };
    std::vector<Pending> pending;
    for (std::size_t h = 0; h < hours; ++h) {
        const double hour_start = sc.start_ts + static_cast<double>(h) * 3600.0;
        const double hour_of_day = std::fmod(hour_start / 3600.0 + 0.5, 24.0);
        const double phase = std::cos(2.0 * std::numbers::pi * (hour_of_day - sc.peak_hour_utc) / 24.0);
        const double p_active =
            sc.active_prob_trough + (sc.active_prob_peak - sc.active_prob_trough) * (1.0 + phase) / 2.0;
        for (std::size_t c = 0; c < sc.clients; ++c) {
            if (unit(rng) >= p_active) continue;
            const int n = 1 + extra_flows(rng);
            pending.clear();
            for (int k = 0; k < n; ++k) {
                const double offset = std::floor(unit(rng) * 3'600'000.0) / 1000.0;
                const double ts = hour_start + offset;
                if (ts - sc.start_ts >= sc.duration_s) continue;
                const std::size_t si = pick_subnet(rng);
                const auto& prof = sc.subnets[si];
                const std::size_t svc = pick_service[si](rng);
                const std::size_t host = static_cast<std::size_t>(unit(rng) * static_cast<double>(prof.fqdns_per_service));
                const FqdnPlan& plan = fqdns[si][svc * prof.fqdns_per_service + std::min(host, prof.fqdns_per_service - 1)];
                const std::size_t ip_idx = static_cast<std::size_t>(unit(rng) * static_cast<double>(plan.ips.size()));
                pending.push_back({ts, si, &plan, plan.ips[std::min(ip_idx, plan.ips.size() - 1)]});
            }
            std::stable_sort(pending.begin(), pending.end(),
                             [](const Pending& a, const Pending& b) { return a.ts < b.ts; });
            // one client never starts two flows in the same millisecond
            for (std::size_t k = 1; k < pending.size(); ++k)
                if (pending[k].ts <= pending[k - 1].ts) pending[k].ts = round_ms(pending[k - 1].ts + 0.001);

            for (const auto& pf : pending) {
                const auto& prof = sc.subnets[pf.subnet];
                const SubnetState st = model.state(pf.subnet, pf.ts - sc.start_ts);
                const std::size_t server_idx = pf.server.value() - prof.prefix.network().value() - 1;
                const int initial = st.ttl_initial[server_idx % st.ttl_initial.size()];

                FlowRecord f;
                f.ts_start = pf.ts;
                f.client_id = client_ids[c];
                f.server_ip = pf.server;
                const double r = unit(rng);
                if (r < sc.other_l7_fraction) {
                    f.l7 = L7Protocol::other;
                    f.server_port = 1935;
                } else if (r < sc.other_l7_fraction + (1.0 - sc.other_l7_fraction) * 0.6) {
                    f.l7 = L7Protocol::tls;
                    f.server_port = 443;
                } else {
                    f.l7 = L7Protocol::http;
                    f.server_port = 80;
                }
                f.min_rtt_ms = round_ms(st.rtt_ms + std::abs(gauss(rng)) * prof.rtt_jitter_ms);
                f.ttfb_ms = round_ms(2.0 * f.min_rtt_ms + st.think_ms + expo(rng) * prof.ttfb_tail_ms);
                f.min_ttl = std::max(1, initial - st.hops);
                f.bytes_down = static_cast<std::uint64_t>(prof.bytes_median * std::exp(1.2 * gauss(rng)));
                f.ts_end = round_ms(f.ts_start + f.ttfb_ms / 1000.0 + expo(rng) * 20.0);
                f.fqdn = pf.fqdn->name;

                auto& seen = dns_seen[{c, pf.server.value()}];
                if (!seen.first || *seen.first != pf.fqdn->name || pf.ts - seen.second >= sc.dns_refresh_s) {
                    log.dns.push_back({pf.ts, client_ids[c], pf.fqdn->name, pf.fqdn->ips});
                    for (Ipv4Addr ip : pf.fqdn->ips) dns_seen[{c, ip.value()}] = {&pf.fqdn->name, pf.ts};
                }
                log.flows.push_back(std::move(f));
            }
        }
    }
    std::stable_sort(log.flows.begin(), log.flows.end(),
                     [](const FlowRecord& a, const FlowRecord& b) { return a.ts_start < b.ts_start; });
    std::stable_sort(log.dns.begin(), log.dns.end(),
                     [](const DnsObservation& a, const DnsObservation& b) { return a.ts < b.ts; });
    return log;
}

}  // namespace acdn
