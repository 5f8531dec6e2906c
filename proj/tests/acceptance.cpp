// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "acdn/characterize.hpp"
#include "acdn/cli.hpp"
#include "acdn/detect.hpp"
#include "acdn/error.hpp"
#include "acdn/events.hpp"
#include "acdn/flow.hpp"
#include "acdn/formats.hpp"
#include "acdn/probe_sim.hpp"
#include "json.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace acdn;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kSrc = ACDN_SOURCE_DIR;
const fs::path kTmp = ACDN_TEST_TMP;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void report(int n, const char* what, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", n, what, o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Ipv4Addr target_ip(std::uint32_t i) { return Ipv4Addr(0x0A000000u + i * 256 + 1); }

std::vector<PingMeasurement> campaign(const std::vector<VantagePoint>& vps, const SyntheticDeployment& d,
                                      const RttModel& m) {
    std::vector<PingMeasurement> out;
    out.reserve(vps.size());
    for (const auto& vp : vps) out.push_back(simulate_ping(vp, d, m));
    return out;
}

// ---- 1 -----------------------------------------------------------------------

Outcome unicast_soundness() {
    const auto t0 = Clock::now();
    const auto vps = gen_vantage_points(100, 101);
    oracle::Gen g(1);
    int anycast = 0;
    for (std::uint32_t i = 0; i < 200; ++i) {
        const auto d = gen_deployment(target_ip(i), 1, GeoBounds::world(), 1000 + i);
        RttModel m;
        m.seed = i;
        if (i % 2 == 0) {
            m.inflation = 1.0;
        } else {
            m.inflation = g.uniform(1.0, 3.0);
            m.jitter_ms = g.uniform(0.0, 10.0);
        }
        const auto ms = campaign(vps, d, m);
        if (detect_anycast(ms).verdict == Verdict::anycast) ++anycast;
        if (classify_target(ms, nullptr).verdict == Verdict::anycast) ++anycast;
    }
    const double t = seconds_since(t0);
    return {anycast == 0 && t < 10.0, fmt("%d anycast verdicts over 200 deployments, %.2f s", anycast, t)};
}

// ---- 2 -----------------------------------------------------------------------

Outcome anycast_recall() {
    const auto vps = gen_vantage_points(100, 202);
    oracle::Gen g(2);
    int detected = 0, count_ok = 0, disks_ok = 0, n = 0;
    std::size_t instances = 0, sites = 0;
    for (std::uint32_t i = 0; i < 200; ++i, ++n) {
        const std::size_t k = 2 + g.index(19);
        const auto d = gen_deployment(target_ip(i), k, GeoBounds::world(), 2000 + i, 3000.0);
        RttModel m;
        m.seed = i;
        m.inflation = g.uniform(1.0, 1.5);
        const auto r = classify_target(campaign(vps, d, m), nullptr);
        detected += r.verdict == Verdict::anycast;
        count_ok += r.num_locations <= k;
        bool each_one = true;
        for (const auto& inst : r.instances) {
            std::size_t inside = 0;
            for (const auto& s : d.sites) inside += point_in_disk(s, inst.disk);
            each_one = each_one && inside == 1;
        }
        disks_ok += each_one;
        instances += r.num_locations;
        sites += k;
    }
    const double rate = detected / double(n);
    return {rate >= 0.95 && count_ok == n && disks_ok == n,
            fmt("anycast %.1f%%, count <= sites %d/%d, one site per disk %d/%d, %zu of %zu sites enumerated",
                100 * rate, count_ok, n, disks_ok, n, instances, sites)};
}

// ---- 3 -----------------------------------------------------------------------

struct GeoStats {
    std::size_t located = 0, near_site = 0, small = 0, small_flagged = 0;
};

void geolocation_round(const std::vector<VantagePoint>& vps, const CityDb& db, const SyntheticDeployment& d,
                       std::uint64_t seed, GeoStats& st) {
    RttModel m;
    m.seed = seed;
    m.inflation = 1.0 + 0.5 * double(seed % 11) / 10.0;
    const auto r = classify_target(campaign(vps, d, m), &db);
    for (const auto& inst : r.instances) {
        if (inst.disk.radius_km() <= 300.0) {
            ++st.small;
            st.small_flagged += inst.high_confidence;
        }
        if (!inst.location) continue;
        ++st.located;
        double best = 1e18;
        for (const auto& s : d.sites) best = std::min(best, haversine_km(inst.location->location, s));
        st.near_site += best <= inst.disk.radius_km();
    }
}

Outcome geolocation() {
    std::ifstream in(kSrc / "data/cities.csv");
    const auto db = read_city_db(in);
    std::vector<City> by_pop = db.entries();
    std::stable_sort(by_pop.begin(), by_pop.end(),
                     [](const City& a, const City& b) { return a.population > b.population; });
    oracle::Gen g(3);

    // Sites at the k most populous cities at least 1000 km apart. Two
    // informational variants: cities picked with random skips (so more
    // populous non-site cities act as decoys), and uniform random sites.
    const auto pick = [&](std::size_t k, double skip) {
        std::vector<GeoPoint> sites;
        for (const auto& c : by_pop) {
            if (sites.size() == k) break;
            if (skip > 0 && g.coin(skip)) continue;
            if (std::all_of(sites.begin(), sites.end(),
                            [&](const GeoPoint& s) { return haversine_km(s, c.location) >= 1000.0; }))
                sites.push_back(c.location);
        }
        return sites;
    };
    GeoStats top, decoy, random;
    for (std::uint32_t i = 0; i < 200; ++i) {
        const auto vps = gen_vantage_points(100, 303 + i);
        const std::size_t k = 2 + g.index(9);
        SyntheticDeployment d{target_ip(i), pick(k, 0.0), std::vector<int>(k, 64), i};
        geolocation_round(vps, db, d, i, top);
        SyntheticDeployment s{target_ip(i), pick(k, 0.5), {}, i};
        s.ttl_initial.assign(s.sites.size(), 64);
        geolocation_round(vps, db, s, i, decoy);
        geolocation_round(vps, db, gen_deployment(target_ip(i), k, GeoBounds::world(), 3000 + i, 1000.0), i, random);
    }
    const bool pass = top.located > 0 && top.near_site == top.located && top.small_flagged == top.small;
    return {pass, fmt("populous-city sites: %zu/%zu located within radius, %zu/%zu small disks flagged; "
                      "info: with decoy cities %zu/%zu, random sites %zu/%zu",
                      top.near_site, top.located, top.small_flagged, top.small, decoy.near_site, decoy.located,
                      random.near_site, random.located)};
}

// ---- 4 -----------------------------------------------------------------------

Outcome greedy_quality() {
    oracle::Gen g(4);
    int independent = 0, maximal = 0;
    double worst = 1.0, sum = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<PingMeasurement> ms;
        const std::size_t n = 1 + g.index(12);
        for (std::size_t i = 0; i < n; ++i)
            ms.push_back({"vp" + std::to_string(i), g.point(), target_ip(0), g.uniform(1.0, 80.0), 0});
        const auto inst = enumerate_instances(ms);
        std::vector<oracle::Disk> chosen, all;
        for (const auto& x : inst) chosen.push_back({x.disk.center().lat(), x.disk.center().lon(), x.disk.radius_km()});
        for (const auto& m : ms)
            all.push_back({m.vp_location.lat(), m.vp_location.lon(),
                           std::min(rtt_to_radius_km(m.rtt_ms), kHalfCircumferenceKm)});
        independent += oracle::independent(chosen);
        maximal += oracle::maximal(chosen, all);
        const auto best = oracle::max_independent(all);
        const double ratio = best ? double(chosen.size()) / double(best) : 1.0;
        worst = std::min(worst, ratio);
        sum += ratio;
    }
    return {independent == 100 && maximal == 100,
            fmt("independent %d/100, maximal %d/100, greedy/optimal mean %.3f worst %.3f", independent, maximal,
                sum / 100, worst)};
}

// ---- 5 -----------------------------------------------------------------------

Outcome characterization() {
    FlowScenario sc;
    sc.duration_s = 30 * 86400.0;
    sc.clients = 1200;
    sc.other_l7_fraction = 0.05;
    for (std::uint32_t i = 0; i < 12; ++i) {
        SubnetProfile p;
        p.prefix = Slash24(Ipv4Addr(0x64400000u + i * 256));
        p.anycast = i < 8;
        p.weight = 1.0 + i % 4;
        p.servers = 8 + 4 * (i % 5);
        p.ips_per_fqdn = 1 + i % 3;
        p.suffix = i % 3 == 0 ? "co.uk" : "com";
        sc.subnets.push_back(p);
    }
    const auto log = gen_flowlog(sc, 5);

    // through the on-disk formats, as the pipeline sees it
    std::string text;
    for (const auto& f : log.flows) text += format_flow_line(f) + '\n';
    std::set<std::string> clients;
    for (const auto& f : log.flows) clients.insert(f.client_id);

    const auto t0 = Clock::now();
    std::istringstream in(text);
    const auto parsed = parse_flow_log(in);
    std::set<Slash24> any;
    for (const auto& p : sc.subnets)
        if (p.anycast) any.insert(p.prefix);
    const auto anyflows = filter_anycast_flows(parsed.flows, any);
    std::vector<FlowRecord> web;
    for (const auto& f : parsed.flows)
        if (f.l7 != L7Protocol::other) web.push_back(f);
    const TimeWindow month = TimeWindow::all();
    const TimeWindow week{sc.start_ts + 7 * 86400.0, sc.start_ts + 14 * 86400.0};
    const auto s_all = subnet_summary(anyflows, month);
    const auto s_top = subnet_summary(anyflows, week, {3, std::nullopt});
    const auto s_cut = subnet_summary(parsed.flows, month, {std::nullopt, 900});
    const auto services = service_table(anyflows, 0);
    const auto users = active_user_series(web, any);
    const auto disc = discovery_curve(anyflows);
    const auto map = build_fqdn_ip_map(log.dns);
    const auto cdf_all = lb_cdf(map);
    std::vector<std::vector<CdfPoint>> cdf_each;
    for (const auto& p : any) cdf_each.push_back(lb_cdf(map, {p}));
    const double t = seconds_since(t0);

    int bad = 0;
    bad += parsed.flows != log.flows;
    bad += s_all != oracle::subnet_summary(anyflows, month, std::nullopt, std::nullopt);
    bad += s_top != oracle::subnet_summary(anyflows, week, 3, std::nullopt);
    bad += s_cut != oracle::subnet_summary(parsed.flows, month, std::nullopt, 900);
    bad += services != oracle::service_table(anyflows, 0, PublicSuffixList::builtin());
    bad += users != oracle::user_series(web, any, 3600.0);
    bad += disc != oracle::discovery(anyflows);
    bad += cdf_all != oracle::cdf(map, std::nullopt);
    std::size_t i = 0;
    for (const auto& p : any) bad += cdf_each[i++] != oracle::cdf(map, p);

    const bool big = log.flows.size() >= 1'000'000 && clients.size() >= 1000 && sc.subnets.size() >= 10;
    return {bad == 0 && big && t < 60.0,
            fmt("%zu flows, %zu clients, %zu /24s, %d mismatching tables, %.1f s", log.flows.size(), clients.size(),
                sc.subnets.size(), bad, t)};
}

// ---- 6 -----------------------------------------------------------------------

Outcome event_detection() {
    FlowScenario sc;
    sc.duration_s = 14 * 86400.0;
    sc.clients = 300;
    SubnetProfile a, b;
    a.prefix = Slash24::from_string("10.1.1.0");
    a.ttl_initial = {128, 64};
    b.prefix = Slash24::from_string("10.2.2.0");
    b.base_rtt_ms = 14;
    sc.subnets = {a, b};
    ScheduledEvent rtt;
    rtt.subnet = a.prefix;
    rtt.kind = ScenarioEventKind::rtt;
    rtt.at_s = 3 * 86400.0;
    rtt.until_s = 4 * 86400.0;
    rtt.rtt_ms = 28;
    ScheduledEvent ttl;
    ttl.subnet = a.prefix;
    ttl.kind = ScenarioEventKind::ttl;
    ttl.at_s = 7 * 86400.0 + 5 * 3600.0;
    ttl.ttl_initial = {64};
    ScheduledEvent route;
    route.subnet = b.prefix;
    route.kind = ScenarioEventKind::route;
    route.at_s = 10 * 86400.0 + 13 * 3600.0;
    route.rtt_ms = 40;
    route.ttl_initial = {255};
    route.hops = 14;
    sc.events = {rtt, ttl, route};
    const auto log = gen_flowlog(sc, 6);

    const EventsConfig cfg;
    const double p = static_cast<double>(cfg.level.persistence_bins);
    std::map<Slash24, SubnetEvents> found;
    for (const auto& net : {a.prefix, b.prefix}) {
        std::vector<FlowRecord> mine;
        for (const auto& f : log.flows)
            if (net.contains(f.server_ip)) mine.push_back(f);
        found[net] = analyze_subnet_events(net, mine, cfg);
    }
    // scored: the injected RTT and TTL changes; the TTFB truths they drag
    // along are reported for information
    int matched = 0, truths = 0, ttfb_matched = 0, ttfb_truths = 0;
    for (const auto& t : log.truth) {
        const auto& se = found.at(t.subnet);
        const auto& list = t.kind == RoutingEventKind::rtt_shift          ? se.rtt_events
                           : t.kind == RoutingEventKind::ttfb_shift        ? se.ttfb_events
                                                                            : se.ttl_events;
        const bool hit = std::any_of(list.begin(), list.end(),
                                     [&](const RoutingEvent& e) { return std::abs(e.ts - t.ts) / cfg.bin_s <= p; });
        if (t.kind == RoutingEventKind::ttfb_shift) {
            ++ttfb_truths;
            ttfb_matched += hit;
        } else {
            ++truths;
            matched += hit;
        }
    }
    std::size_t detected = 0;
    for (const auto& [net, se] : found) detected += se.rtt_events.size() + se.ttfb_events.size() + se.ttl_events.size();
    const auto& rc = found.at(b.prefix).correlated;
    const int max_conf = std::accumulate(rc.begin(), rc.end(), 0,
                                         [](int m, const RoutingEvent& e) { return std::max(m, e.confidence); });

    // stationary series: no event of any kind
    int alarms = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        FlowScenario st;
        st.duration_s = 7 * 86400.0;
        st.clients = 40;
        SubnetProfile q;
        q.prefix = Slash24::from_string("10.9.9.0");
        q.base_rtt_ms = 4 + double(s % 60);
        q.rtt_jitter_ms = 0.5 + double(s % 5);
        q.ttl_initial = s % 3 ? std::vector<int>{64} : std::vector<int>{128, 64};
        st.subnets = {q};
        const auto quiet = gen_flowlog(st, 60'000 + s);
        const auto se = analyze_subnet_events(q.prefix, quiet.flows, cfg);
        alarms += !se.rtt_events.empty() || !se.ttfb_events.empty() || !se.ttl_events.empty();
    }
    return {matched == truths && alarms == 0 && max_conf == 3,
            fmt("%d/%d injected RTT/TTL changes within %g bins (info: TTFB follow-ons %d/%d, %zu events reported), "
                "%d/1000 stationary series alarmed, route confidence %d",
                matched, truths, p, ttfb_matched, ttfb_truths, detected, alarms, max_conf)};
}

// ---- 7 -----------------------------------------------------------------------

Outcome ttfb_floor() {
    FlowScenario sc;
    sc.duration_s = 7 * 86400.0;
    sc.clients = 300;
    for (std::uint32_t i = 0; i < 4; ++i) {
        SubnetProfile p;
        p.prefix = Slash24(Ipv4Addr(0x0A000000u + i * 256));
        p.base_rtt_ms = 5 + 20.0 * i;
        p.think_ms = i == 0 ? 0.0 : 20.0;
        sc.subnets.push_back(p);
    }
    auto log = gen_flowlog(sc, 7);
    std::size_t ok = 0;
    for (const auto& f : log.flows) ok += f.ttfb_ms >= 2.0 * f.min_rtt_ms;
    const auto clean = check_ttfb_floor(log.flows, 3600.0);

    // the check works on per-bin minima, so push a flow under twice the
    // smallest RTT of its bin
    std::map<std::pair<Slash24, double>, double> bin_rtt;
    const auto key = [](const FlowRecord& f) {
        return std::make_pair(slash24_of(f.server_ip), std::floor(f.ts_start / 3600.0) * 3600.0);
    };
    for (const auto& f : log.flows) {
        auto [it, fresh] = bin_rtt.try_emplace(key(f), f.min_rtt_ms);
        if (!fresh) it->second = std::min(it->second, f.min_rtt_ms);
    }
    oracle::Gen g(7);
    std::set<std::pair<Slash24, double>> corrupted;
    for (int i = 0; i < 50; ++i) {
        auto& f = log.flows[g.index(log.flows.size())];
        f.ttfb_ms = std::floor(1000 * g.uniform(0, 2.0 * bin_rtt.at(key(f)))) / 1000;
        corrupted.insert(key(f));
    }
    std::set<std::pair<Slash24, double>> flagged;
    for (const auto& v : check_ttfb_floor(log.flows, 3600.0)) flagged.insert({v.slash24, v.bin_start});
    return {ok == log.flows.size() && clean.empty() && flagged == corrupted,
            fmt("%zu/%zu flows obey the floor, %zu clean bins flagged, %zu/%zu corrupted bins flagged",
                ok, log.flows.size(), clean.size(), flagged.size(), corrupted.size())};
}

// ---- 8 -----------------------------------------------------------------------

Outcome throughput() {
    const auto vps = gen_vantage_points(100, 808);
    std::ifstream in(kSrc / "data/cities.csv");
    const auto db = read_city_db(in);
    oracle::Gen g(8);
    std::vector<PingMeasurement> all;
    all.reserve(10'000 * vps.size());
    for (std::uint32_t i = 0; i < 10'000; ++i) {
        const std::size_t k = g.coin(0.2) ? 2 + g.index(15) : 1;
        const auto d = gen_deployment(target_ip(i), k, GeoBounds::world(), 8000 + i, 1000.0);
        RttModel m;
        m.seed = i;
        m.jitter_ms = 1.0;
        for (const auto& vp : vps) all.push_back(simulate_ping(vp, d, m));
    }
    const auto t0 = Clock::now();
    const auto outcome = classify_batch(group_by_target(all), &db);
    const double t = seconds_since(t0);
    return {outcome.results.size() == 10'000 && outcome.failures.empty() && t < 180.0,
            fmt("%zu targets classified, %zu failures, %.1f s", outcome.results.size(), outcome.failures.size(), t)};
}

// ---- 9 -----------------------------------------------------------------------

nlohmann::json manifest_outputs(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    return nlohmann::json::parse(in).at("outputs");
}

Outcome determinism() {
    fs::remove_all(kTmp / "det");
    const std::string cities = (kSrc / "data/cities.csv").string();
    const std::string scenario = (kSrc / "data/scenarios/demo.json").string();
    std::ostringstream sink;
    std::vector<std::string> differing;
    int runs = 0;
    for (const char* rep : {"a", "b"}) {
        const fs::path base = kTmp / "det" / rep;
        const std::string sim = (base / "sim").string(), s = sim + "/";
        const std::string census = (base / "census").string() + "/census.json";
        const std::vector<std::vector<std::string>> cmds{
            {"simulate", "--seed", "2014", "--scenario", scenario, "-o", sim},
            {"detect", "--measurements", s + "measurements.txt", "--cities", cities, "-o", (base / "detect").string()},
            {"census", "--targets", s + "targets.txt", "--hosts", s + "hosts.txt", "--vps", s + "vps.txt",
             "--measurements", s + "measurements.txt", "--cities", cities, "--owners", s + "owners_active.csv", "-o",
             (base / "census").string()},
            {"ingest", "--flows", s + "flows.log", "--dns", s + "dns.log", "--census", census, "-o",
             (base / "ingest").string()},
            {"analyze", "--flows", (base / "ingest").string() + "/flows_annotated.log", "--census", census, "--dns",
             s + "dns.log", "-o", (base / "analyze").string()},
            {"events", "--flows", s + "flows.log", "--census", census, "-o", (base / "events").string()},
            {"report", "--census", census, "--owners", s + "owners.csv", "--events",
             (base / "events").string() + "/events.json", "--subnets", (base / "analyze").string() + "/subnets.json",
             "-o", (base / "report").string()},
        };
        for (const auto& c : cmds) {
            if (cli::run(c, sink, sink) != cli::kExitOk) return {false, c[0] + " failed: " + sink.str()};
            ++runs;
        }
    }
    for (const char* sub : {"sim", "detect", "census", "ingest", "analyze", "events", "report"}) {
        const auto a = manifest_outputs(kTmp / "det" / "a" / sub);
        const auto b = manifest_outputs(kTmp / "det" / "b" / sub);
        if (a != b || a.empty()) differing.push_back(sub);
    }
    // same output directory twice: the manifest itself must not change
    const fs::path again = kTmp / "det" / "again";
    std::string first;
    for (int i = 0; i < 2; ++i) {
        if (cli::run({"simulate", "--seed", "2014", "--scenario", scenario, "-o", again.string()}, sink, sink))
            return {false, "simulate failed"};
        std::ifstream in(again / "manifest.json", std::ios::binary);
        std::string bytes{std::istreambuf_iterator<char>(in), {}};
        if (i == 0) first = bytes;
        else if (bytes != first) differing.push_back("manifest");
    }
    std::string list;
    for (const auto& d : differing) list += " " + d;
    return {differing.empty(), fmt("%d subcommand runs, differing:%s", runs, list.empty() ? " none" : list.c_str())};
}

}  // namespace

int main() {
    fs::create_directories(kTmp);
    report(1, "no false anycast verdicts on unicast deployments", unicast_soundness);
    report(2, "anycast recall and instance soundness", anycast_recall);
    report(3, "city geolocation and confidence flag", geolocation);
    report(4, "greedy enumeration is independent and maximal", greedy_quality);
    report(5, "characterization tables equal a brute-force recount", characterization);
    report(6, "routing event detection", event_detection);
    report(7, "TTFB floor", ttfb_floor);
    report(8, "classification throughput", throughput);
    report(9, "byte-identical re-runs", determinism);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
