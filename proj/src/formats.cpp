#include "acdn/formats.hpp"

#include <string>

#include "acdn/detail/text.hpp"
#include "acdn/error.hpp"

namespace acdn {

using detail::fixed;
using detail::parse_number;
using detail::skippable_line;
using detail::split;
using nlohmann::json;

namespace {

[[noreturn]] void fail(std::string_view what, std::size_t line, std::string_view detail) {
    throw DataError(std::string(what) + " line " + std::to_string(line) + ": " + std::string(detail));
}

template <typename T>
T need(std::optional<T> v, std::string_view what, std::size_t line, std::string_view field) {
    if (!v) fail(what, line, "invalid " + std::string(field));
    return *v;
}

GeoPoint point_or_fail(double lat, double lon, std::string_view what, std::size_t line) {
    try {
        return GeoPoint(lat, lon);
    } catch (const std::invalid_argument& e) {
        fail(what, line, e.what());
    }
}

// Calls fn(fields, line_no) for each data line split on `delim`.
template <typename Fn>
void for_each_record(std::istream& in, std::string_view what, char delim, Fn&& fn) {
    if (!in) throw DataError(std::string(what) + ": stream is not readable");
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (skippable_line(line)) continue;
        fn(split(line, delim), no);
    }
    if (in.bad()) throw DataError(std::string(what) + ": read error");
}

}  // namespace

std::vector<PingMeasurement> read_measurements(std::istream& in) {
    std::vector<PingMeasurement> out;
    constexpr std::string_view what = "measurements";
    for_each_record(in, what, ',', [&](const auto& f, std::size_t no) {
        if (f.size() != 6) fail(what, no, "expected 6 fields");
        PingMeasurement m;
        m.vp_id = std::string(f[0]);
        if (m.vp_id.empty()) fail(what, no, "empty vp_id");
        m.vp_location = point_or_fail(need(parse_number<double>(f[1]), what, no, "vp_lat"),
                                      need(parse_number<double>(f[2]), what, no, "vp_lon"), what, no);
        m.target = need(Ipv4Addr::parse(f[3]), what, no, "target_ip");
        m.rtt_ms = need(parse_number<double>(f[4]), what, no, "rtt_ms");
        if (m.rtt_ms < 0.0) fail(what, no, "negative rtt_ms");
        m.timestamp = need(parse_number<std::int64_t>(f[5]), what, no, "ts");
        out.push_back(std::move(m));
    });
    return out;
}

std::string format_measurement_line(const PingMeasurement& m) {
    return m.vp_id + ',' + fixed(m.vp_location.lat(), 4) + ',' + fixed(m.vp_location.lon(), 4) + ',' +
           m.target.to_string() + ',' + fixed(m.rtt_ms, 3) + ',' + std::to_string(m.timestamp);
}

std::vector<VantagePoint> read_vantage_points(std::istream& in) {
    std::vector<VantagePoint> out;
    constexpr std::string_view what = "vantage points";
    for_each_record(in, what, ',', [&](const auto& f, std::size_t no) {
        if (f.size() != 3) fail(what, no, "expected 3 fields");
        if (f[0].empty()) fail(what, no, "empty vp_id");
        out.push_back({std::string(f[0]),
                       point_or_fail(need(parse_number<double>(f[1]), what, no, "lat"),
                                     need(parse_number<double>(f[2]), what, no, "lon"), what, no)});
    });
    return out;
}

std::string format_vantage_point_line(const VantagePoint& vp) {
    return vp.id + ',' + fixed(vp.location.lat(), 4) + ',' + fixed(vp.location.lon(), 4);
}

CityDb read_city_db(std::istream& in) {
    std::vector<City> cities;
    constexpr std::string_view what = "city db";
    for_each_record(in, what, ',', [&](const auto& f, std::size_t no) {
        if (f.size() != 5) fail(what, no, "expected 5 fields");
        cities.push_back({std::string(f[0]), std::string(f[1]),
                          point_or_fail(need(parse_number<double>(f[2]), what, no, "lat"),
                                        need(parse_number<double>(f[3]), what, no, "lon"), what, no),
                          need(parse_number<std::uint64_t>(f[4]), what, no, "population")});
    });
    return CityDb(std::move(cities));
}

TargetList read_target_list(std::istream& in) {
    TargetList out;
    constexpr std::string_view what = "target list";
    for_each_record(in, what, ',', [&](const auto& f, std::size_t no) {
        if (f.size() < 2) fail(what, no, "expected rank,url");
        // URLs may legitimately contain commas; keep the remainder intact
        std::string url(f[1]);
        for (std::size_t i = 2; i < f.size(); ++i) url += ',' + std::string(f[i]);
        out.push_back({need(parse_number<std::uint32_t>(f[0]), what, no, "rank"), url});
    });
    validate_target_list(out);
    return out;
}

std::map<std::string, std::vector<Ipv4Addr>> read_hosts_table(std::istream& in) {
    std::map<std::string, std::vector<Ipv4Addr>> out;
    constexpr std::string_view what = "hosts table";
    for_each_record(in, what, '\n', [&](const auto& f, std::size_t no) {
        const auto t = detail::split_ws(f[0]);
        if (t.empty() || t.size() > 2) fail(what, no, "expected 'host [ip,ip...]'");
        auto& addrs = out[std::string(t[0])];
        if (t.size() == 2)
            for (auto a : split(t[1], ',')) addrs.push_back(need(Ipv4Addr::parse(a), what, no, "address"));
    });
    return out;
}

std::map<Slash24, std::string> read_owners(std::istream& in) {
    std::map<Slash24, std::string> out;
    constexpr std::string_view what = "owners";
    for_each_record(in, what, ',', [&](const auto& f, std::size_t no) {
        if (f.size() != 2) fail(what, no, "expected prefix,owner");
        out[need(Slash24::parse(f[0]), what, no, "prefix")] = std::string(f[1]);
    });
    return out;
}

// ---- JSON ---------------------------------------------------------------

json to_json(const GeoPoint& p) { return {{"lat", p.lat()}, {"lon", p.lon()}}; }

namespace {

GeoPoint point_from_json(const json& j) { return GeoPoint(j.at("lat").get<double>(), j.at("lon").get<double>()); }

json strings(const std::vector<Ipv4Addr>& addrs) {
    json out = json::array();
    for (auto a : addrs) out.push_back(a.to_string());
    return out;
}

std::vector<Ipv4Addr> addrs_from_json(const json& j) {
    std::vector<Ipv4Addr> out;
    for (const auto& s : j) out.push_back(Ipv4Addr::from_string(s.get<std::string>()));
    return out;
}

AnycastInstance instance_from_json(const json& j) {
    AnycastInstance inst;
    inst.disk = LatencyDisk(point_from_json(j.at("center")), j.at("radius_km").get<double>());
    inst.witness_vp = j.at("witness_vp").get<std::string>();
    inst.high_confidence = j.at("high_confidence").get<bool>();
    if (const auto& loc = j.at("location"); !loc.is_null())
        inst.location = City{loc.at("city").get<std::string>(), loc.at("country").get<std::string>(),
                             point_from_json(loc), loc.at("population").get<std::uint64_t>()};
    return inst;
}

RoutingEventKind kind_from_string(std::string_view s) {
    for (auto k : {RoutingEventKind::rtt_shift, RoutingEventKind::ttl_pattern_change, RoutingEventKind::ttfb_shift})
        if (s == to_string(k)) return k;
    throw DataError("unknown event kind '" + std::string(s) + "'");
}

json value_to_json(const EventValue& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return to_json(std::get<TtlPattern>(v));
}

EventValue value_from_json(const json& j) {
    if (j.is_number()) return j.get<double>();
    TtlPattern p;
    for (const auto& pair : j) p.insert({pair.at(0).get<int>(), pair.at(1).get<int>()});
    return p;
}

}  // namespace

json to_json(const AnycastInstance& inst) {
    json loc = nullptr;
    if (inst.location) {
        loc = {{"city", inst.location->name},
               {"country", inst.location->country},
               {"lat", inst.location->location.lat()},
               {"lon", inst.location->location.lon()},
               {"population", inst.location->population}};
    }
    return {{"witness_vp", inst.witness_vp},
            {"center", to_json(inst.disk.center())},
            {"radius_km", inst.disk.radius_km()},
            {"covers_sphere", inst.disk.covers_sphere()},
            {"high_confidence", inst.high_confidence},
            {"location", std::move(loc)}};
}

json to_json(const DetectionResult& r) {
    json instances = json::array();
    for (const auto& inst : r.instances) instances.push_back(to_json(inst));
    json witness = nullptr;
    if (r.witness_pair) witness = {r.witness_pair->first, r.witness_pair->second};
    return {{"target", r.target.to_string()},
            {"verdict", to_string(r.verdict)},
            {"witness_pair", std::move(witness)},
            {"num_locations", r.num_locations},
            {"instances", std::move(instances)}};
}

json to_json(const DetectionFailure& f) {
    return {{"target", f.target.to_string()}, {"verdict", "failed"}, {"reason", f.reason}};
}

json to_json(const Warning& w) { return {{"stage", w.stage}, {"subject", w.subject}, {"message", w.message}}; }

json to_json(const CensusReport& report) {
    json subnets = json::array();
    for (const auto& [prefix, rec] : report.subnets) {
        json instances = json::array();
        for (const auto& inst : rec.instances) instances.push_back(to_json(inst));
        subnets.push_back({{"slash24", prefix.to_string()},
                           {"verdict", to_string(rec.verdict)},
                           {"location_count", rec.location_count},
                           {"continents", rec.continents},
                           {"members", strings(rec.members)},
                           {"probed", strings(rec.probed)},
                           {"anycast_members", strings(rec.anycast_members)},
                           {"instances", std::move(instances)}});
    }
    json failures = json::array();
    for (const auto& f : report.failures) failures.push_back({{"target", f.target.to_string()}, {"reason", f.reason}});
    json warnings = json::array();
    for (const auto& w : report.warnings) warnings.push_back(to_json(w));
    const auto& s = report.stats;
    return {{"min_locations", report.min_locations ? json(*report.min_locations) : json(nullptr)},
            {"stats",
             {{"ip32s", s.ip32s},
              {"slash24s", s.slash24s},
              {"probed_ip32s", s.probed_ip32s},
              {"probes_sent", s.probes_sent},
              {"probes_missing", s.probes_missing},
              {"anycast_ip32s", s.anycast_ip32s},
              {"anycast_slash24s", s.anycast_slash24s},
              {"excluded_slash24s", s.excluded_slash24s}}},
            {"subnets", std::move(subnets)},
            {"failures", std::move(failures)},
            {"warnings", std::move(warnings)}};
}

CensusReport census_report_from_json(const json& doc) {
    try {
        CensusReport report;
        if (!doc.at("min_locations").is_null()) report.min_locations = doc.at("min_locations").get<std::size_t>();
        const auto& s = doc.at("stats");
        report.stats = {s.at("ip32s").get<std::size_t>(),           s.at("slash24s").get<std::size_t>(),
                        s.at("probed_ip32s").get<std::size_t>(),    s.at("probes_sent").get<std::size_t>(),
                        s.at("probes_missing").get<std::size_t>(),  s.at("anycast_ip32s").get<std::size_t>(),
                        s.at("anycast_slash24s").get<std::size_t>(), s.at("excluded_slash24s").get<std::size_t>()};
        for (const auto& j : doc.at("subnets")) {
            SubnetRecord rec;
            rec.prefix = Slash24::from_string(j.at("slash24").get<std::string>());
            auto verdict = subnet_verdict_from_string(j.at("verdict").get<std::string>());
            if (!verdict) throw DataError("unknown subnet verdict");
            rec.verdict = *verdict;
            rec.location_count = j.at("location_count").get<std::size_t>();
            rec.continents = j.at("continents").get<std::set<std::string>>();
            rec.members = addrs_from_json(j.at("members"));
            rec.probed = addrs_from_json(j.at("probed"));
            rec.anycast_members = addrs_from_json(j.at("anycast_members"));
            for (const auto& inst : j.at("instances")) rec.instances.push_back(instance_from_json(inst));
            report.subnets.emplace(rec.prefix, std::move(rec));
        }
        for (const auto& f : doc.at("failures"))
            report.failures.push_back(
                {Ipv4Addr::from_string(f.at("target").get<std::string>()), f.at("reason").get<std::string>()});
        for (const auto& w : doc.at("warnings"))
            report.warnings.push_back({w.at("stage").get<std::string>(), w.at("subject").get<std::string>(),
                                       w.at("message").get<std::string>()});
        return report;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed census report: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("malformed census report: ") + e.what());
    }
}

json to_json(const SubnetSummary& s) {
    return {{"slash24", s.slash24 ? json(s.slash24->to_string()) : json("Others")},
            {"ip32", s.distinct_ip32},
            {"volume_bytes", s.volume_bytes},
            {"flows", s.flow_count},
            {"users", s.user_count},
            {"fqdns", s.fqdn_count}};
}

json to_json(const ServiceRow& r) {
    return {{"service", r.service}, {"servers", r.servers}, {"volume_bytes", r.volume_bytes},
            {"flows", r.flows},     {"users", r.users},     {"fqdns", r.fqdn_count}};
}

json to_json(const TtlPattern& p) {
    json out = json::array();
    for (const auto& pair : p) out.push_back({pair.initial, pair.hops});
    return out;
}

json to_json(const RoutingEvent& e) {
    json kinds = json::array();
    for (auto k : e.corroborated_by) kinds.push_back(to_string(k));
    return {{"slash24", e.slash24.to_string()},
            {"ts", e.ts},
            {"kind", to_string(e.kind)},
            {"before", value_to_json(e.before)},
            {"after", value_to_json(e.after)},
            {"confidence", e.confidence},
            {"corroborated_by", std::move(kinds)}};
}

json to_json(const TruthEvent& e) {
    return {{"slash24", e.subnet.to_string()},
            {"ts", e.ts},
            {"kind", to_string(e.kind)},
            {"before", value_to_json(e.before)},
            {"after", value_to_json(e.after)}};
}

TruthEvent truth_event_from_json(const json& doc) {
    return {Slash24::from_string(doc.at("slash24").get<std::string>()), doc.at("ts").get<double>(),
            kind_from_string(doc.at("kind").get<std::string>()), value_from_json(doc.at("before")),
            value_from_json(doc.at("after"))};
}

json to_json(const ParseError& e) { return {{"line", e.line}, {"message", e.message}, {"text", e.text}}; }

json to_json(const FloorViolation& v) {
    return {{"slash24", v.slash24.to_string()},
            {"bin_start", v.bin_start},
            {"min_ttfb_ms", v.min_ttfb_ms},
            {"min_rtt_ms", v.min_rtt_ms}};
}

json to_json(const SyntheticDeployment& d) {
    json sites = json::array();
    for (const auto& s : d.sites) sites.push_back(to_json(s));
    return {{"target", d.target.to_string()}, {"sites", std::move(sites)}, {"ttl_initial", d.ttl_initial},
            {"seed", d.seed}};
}

SyntheticDeployment deployment_from_json(const json& doc) {
    SyntheticDeployment d;
    d.target = Ipv4Addr::from_string(doc.at("target").get<std::string>());
    for (const auto& s : doc.at("sites")) d.sites.push_back(point_from_json(s));
    d.ttl_initial = doc.at("ttl_initial").get<std::vector<int>>();
    d.seed = doc.at("seed").get<std::uint64_t>();
    return d;
}

FlowScenario flow_scenario_from_json(const json& doc) {
    try {
        FlowScenario sc;
        sc.start_ts = doc.value("start_ts", sc.start_ts);
        sc.duration_s = doc.value("duration_s", sc.duration_s);
        sc.clients = doc.value("clients", sc.clients);
        sc.active_prob_peak = doc.value("active_prob_peak", sc.active_prob_peak);
        sc.active_prob_trough = doc.value("active_prob_trough", sc.active_prob_trough);
        sc.peak_hour_utc = doc.value("peak_hour_utc", sc.peak_hour_utc);
        sc.flows_per_active_hour = doc.value("flows_per_active_hour", sc.flows_per_active_hour);
        sc.other_l7_fraction = doc.value("other_l7_fraction", sc.other_l7_fraction);
        sc.dns_refresh_s = doc.value("dns_refresh_s", sc.dns_refresh_s);
        for (const auto& j : doc.value("subnets", json::array())) {
            SubnetProfile p;
            p.prefix = Slash24::from_string(j.at("prefix").get<std::string>());
            p.anycast = j.value("anycast", p.anycast);
            p.owner = j.value("owner", p.owner);
            p.servers = j.value("servers", p.servers);
            p.weight = j.value("weight", p.weight);
            p.base_rtt_ms = j.value("base_rtt_ms", p.base_rtt_ms);
            p.rtt_jitter_ms = j.value("rtt_jitter_ms", p.rtt_jitter_ms);
            p.ttl_initial = j.value("ttl_initial", p.ttl_initial);
            p.hops = j.value("hops", p.hops);
            p.think_ms = j.value("think_ms", p.think_ms);
            p.ttfb_tail_ms = j.value("ttfb_tail_ms", p.ttfb_tail_ms);
            p.services = j.value("services", p.services);
            p.fqdns_per_service = j.value("fqdns_per_service", p.fqdns_per_service);
            p.ips_per_fqdn = j.value("ips_per_fqdn", p.ips_per_fqdn);
            p.suffix = j.value("suffix", p.suffix);
            p.bytes_median = j.value("bytes_median", p.bytes_median);
            sc.subnets.push_back(std::move(p));
        }
        for (const auto& j : doc.value("events", json::array())) {
            ScheduledEvent e;
            e.subnet = Slash24::from_string(j.at("subnet").get<std::string>());
            const auto kind = j.at("kind").get<std::string>();
            if (kind == "rtt")
                e.kind = ScenarioEventKind::rtt;
            else if (kind == "ttl")
                e.kind = ScenarioEventKind::ttl;
            else if (kind == "ttfb")
                e.kind = ScenarioEventKind::ttfb;
            else if (kind == "route")
                e.kind = ScenarioEventKind::route;
            else
                throw DataError("unknown scenario event kind '" + kind + "'");
            e.at_s = j.at("at_s").get<double>();
            if (j.contains("until_s")) e.until_s = j.at("until_s").get<double>();
            if (j.contains("rtt_ms")) e.rtt_ms = j.at("rtt_ms").get<double>();
            e.ttl_initial = j.value("ttl_initial", std::vector<int>{});
            if (j.contains("hops")) e.hops = j.at("hops").get<int>();
            if (j.contains("think_ms")) e.think_ms = j.at("think_ms").get<double>();
            if (j.contains("transient_rtt_ms")) e.transient_rtt_ms = j.at("transient_rtt_ms").get<double>();
            e.transient_s = j.value("transient_s", 0.0);
            sc.events.push_back(std::move(e));
        }
        return sc;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed scenario: ") + e.what());
    }
}

}  // namespace acdn
