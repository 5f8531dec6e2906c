#include "acdn/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "acdn/census.hpp"
#include "acdn/characterize.hpp"
#include "acdn/continents.hpp"
#include "acdn/detail/parallel.hpp"
#include "acdn/detail/text.hpp"
#include "acdn/detect.hpp"
#include "acdn/error.hpp"
#include "acdn/events.hpp"
#include "acdn/flow.hpp"
#include "acdn/formats.hpp"
#include "acdn/probe_sim.hpp"
#include "output.hpp"

namespace acdn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    std::string subcommand;
    std::uint64_t seed = 0;
    std::string scenario;
    std::string out = ".";

    std::string measurements, vps, cities, targets, hosts, flows, dns, census, owners, events, subnets;

    double speed_km_per_ms = kFiberSpeedKmPerMs;
    double high_confidence_km = 300.0;
    std::string greedy_order = "smallest-radius";
    unsigned threads = 0;
    std::size_t representatives = 4;
    std::size_t min_locations = 3;

    std::size_t dns_capacity = 1u << 20;
    double dns_ttl_s = 86'400.0;
    double reorder_window_s = 60.0;

    std::size_t top_n = 10;
    std::optional<std::uint64_t> others_cutoff;
    std::size_t services_top = 0;
    std::optional<double> from, to;

    double bin_s = 3600.0;
    double abs_min_ms = 5.0;
    double rel_min = 0.5;
    std::size_t persistence_bins = 2;
    std::size_t settle_bins = 6;
    std::size_t min_samples = 5;
    std::size_t min_support = 3;
    std::size_t window_bins = 2;
};

template <typename T>
json opt_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

// Everything a subcommand reads from the config, recorded in its manifest.
json config_json(const RunConfig& c) {
    json j = {{"out", c.out}};
    const auto path = [&](const char* key, const std::string& v) {
        if (!v.empty()) j[key] = v;
    };
    const auto& s = c.subcommand;
    if (s == "simulate") {
        j["seed"] = c.seed;
        j["scenario"] = c.scenario;
        j["speed_km_per_ms"] = c.speed_km_per_ms;
    }
    if (s == "detect" || s == "census") {
        path("measurements", c.measurements);
        path("cities", c.cities);
        j["speed_km_per_ms"] = c.speed_km_per_ms;
        j["high_confidence_km"] = c.high_confidence_km;
        j["greedy_order"] = c.greedy_order;
    }
    if (s == "census") {
        path("targets", c.targets);
        path("hosts", c.hosts);
        path("vps", c.vps);
        path("owners", c.owners);
        j["representatives"] = c.representatives;
        j["min_locations"] = c.min_locations;
    }
    if (s == "ingest") {
        path("flows", c.flows);
        path("dns", c.dns);
        path("census", c.census);
        j["dns_capacity"] = c.dns_capacity;
        j["dns_ttl_s"] = c.dns_ttl_s;
        j["reorder_window_s"] = c.reorder_window_s;
    }
    if (s == "analyze") {
        path("flows", c.flows);
        path("dns", c.dns);
        path("census", c.census);
        j["top_n"] = c.top_n;
        j["others_cutoff"] = opt_json(c.others_cutoff);
        j["services_top"] = c.services_top;
        j["from"] = opt_json(c.from);
        j["to"] = opt_json(c.to);
        j["bin_s"] = c.bin_s;
        j["reorder_window_s"] = c.reorder_window_s;
    }
    if (s == "events") {
        path("flows", c.flows);
        path("census", c.census);
        j["bin_s"] = c.bin_s;
        j["abs_min_ms"] = c.abs_min_ms;
        j["rel_min"] = c.rel_min;
        j["persistence_bins"] = c.persistence_bins;
        j["settle_bins"] = c.settle_bins;
        j["min_samples"] = c.min_samples;
        j["min_support"] = c.min_support;
        j["window_bins"] = c.window_bins;
        j["reorder_window_s"] = c.reorder_window_s;
    }
    if (s == "report") {
        path("census", c.census);
        path("owners", c.owners);
        path("events", c.events);
        path("subnets", c.subnets);
    }
    return j;
}

template <typename T, typename Reader>
T read_text(const std::string& path, Reader&& reader) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return reader(in);
}

DetectConfig detect_config(const RunConfig& c) {
    DetectConfig d;
    d.speed_km_per_ms = c.speed_km_per_ms;
    d.high_confidence_radius_km = c.high_confidence_km;
    d.order = c.greedy_order == "vp-id" ? GreedyOrder::vp_id : GreedyOrder::smallest_radius;
    d.threads = c.threads;
    return d;
}

std::optional<CityDb> load_cities(const RunConfig& c, OutputDir& out) {
    if (c.cities.empty()) return std::nullopt;
    out.add_input("cities", c.cities);
    return read_text<CityDb>(c.cities, read_city_db);
}

std::map<Slash24, std::string> load_owners(const RunConfig& c, OutputDir& out) {
    if (c.owners.empty()) return {};
    out.add_input("owners", c.owners);
    return read_text<std::map<Slash24, std::string>>(c.owners, read_owners);
}

CensusReport load_census(const RunConfig& c, OutputDir& out) {
    out.add_input("census", c.census);
    return census_report_from_json(read_json_file(c.census));
}

ParsedFlows load_flows(const RunConfig& c, OutputDir& out) {
    out.add_input("flows", c.flows);
    std::ifstream in(c.flows);
    if (!in) throw DataError("cannot open " + c.flows);
    return parse_flow_log(in, c.reorder_window_s);
}

std::vector<json> errors_jsonl(const std::string& source, std::span<const ParseError> errors) {
    std::vector<json> out;
    for (const auto& e : errors) {
        auto j = to_json(e);
        j["source"] = source;
        out.push_back(std::move(j));
    }
    return out;
}

std::string flow_lines(std::span<const FlowRecord> flows) {
    std::string text;
    for (const auto& f : flows) {
        text += format_flow_line(f);
        text += '\n';
    }
    return text;
}

// ---- simulate -------------------------------------------------------------

GeoBounds bounds_from_json(const json& j) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "world") return GeoBounds::world();
        if (name == "europe") return GeoBounds::europe();
        throw DataError("unknown bounds '" + name + "'");
    }
    return {j.value("lat_min", -90.0), j.value("lat_max", 90.0), j.value("lon_min", -180.0),
            j.value("lon_max", 180.0)};
}

struct ActiveWorld {
    std::vector<VantagePoint> vps;
    std::map<Ipv4Addr, SyntheticDeployment> deployments;
    std::map<std::string, std::vector<Ipv4Addr>> hosts;  // in insertion-independent order
    std::map<std::uint32_t, std::string> ranked_hosts;
    std::map<Slash24, std::string> owners;
};

void add_host(ActiveWorld& w, std::uint32_t rank, const std::string& host, std::optional<Ipv4Addr> ip) {
    if (!w.ranked_hosts.emplace(rank, host).second) throw DataError("duplicate rank " + std::to_string(rank));
    auto& addrs = w.hosts[host];
    if (ip && std::find(addrs.begin(), addrs.end(), *ip) == addrs.end()) addrs.push_back(*ip);
}

ActiveWorld build_active(const json& a, std::uint64_t seed) {
    ActiveWorld w;
    w.vps = gen_vantage_points(a.value("vantage_points", std::size_t{100}), mix_seed(seed, 1));
    if (w.vps.empty()) throw DataError("simulate: at least one vantage point is required");

    const auto deploy = [&](Ipv4Addr ip, std::size_t sites, const json& opts) {
        if (w.deployments.count(ip)) throw DataError("duplicate simulated address " + ip.to_string());
        auto d = gen_deployment(ip, sites, bounds_from_json(opts.value("bounds", json("world"))),
                                mix_seed(seed, ip.value()), opts.value("min_separation_km", 500.0));
        w.deployments.emplace(ip, std::move(d));
    };

    for (const auto& t : a.value("targets", json::array())) {
        const auto ip = Ipv4Addr::from_string(t.at("ip").get<std::string>());
        deploy(ip, t.value("sites", std::size_t{1}), t);
        add_host(w, t.at("rank").get<std::uint32_t>(), t.at("host").get<std::string>(), ip);
        if (t.contains("owner")) w.owners[slash24_of(ip)] = t.at("owner").get<std::string>();
    }

    if (a.contains("random_targets")) {
        const auto& r = a.at("random_targets");
        const auto count = r.value("slash24s", std::size_t{0});
        const auto per = r.value("members_per_slash24", std::size_t{2});
        if (per == 0 || per > 254) throw DataError("members_per_slash24 must lie in 1..254");
        const double fraction = r.value("anycast_fraction", 0.1);
        const auto sites_min = r.value("sites_min", std::size_t{2});
        const auto sites_max = r.value("sites_max", std::size_t{12});
        if (sites_min < 2 || sites_max < sites_min) throw DataError("need 2 <= sites_min <= sites_max");
        const auto first = Slash24::from_string(r.value("first_prefix", std::string("100.64.0.0")));
        auto rank = r.value("first_rank", std::uint32_t{1000});
        std::mt19937_64 rng(mix_seed(seed, 3));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> n_sites(sites_min, sites_max);
        for (std::size_t s = 0; s < count; ++s) {
            const std::uint64_t net = std::uint64_t{first.network().value()} + s * 256;
            if (net > 0xFFFFFF00u) throw DataError("random_targets run past the address space");
            const bool anycast = unit(rng) < fraction;
            const std::size_t sites = anycast ? n_sites(rng) : 1;
            const Ipv4Addr base(static_cast<std::uint32_t>(net) + 1);
            deploy(base, sites, r);
            const std::string host = "www.site" + std::to_string(s) + ".example";
            for (std::size_t m = 0; m < per; ++m) {
                // members of one /24 share the deployment
                const Ipv4Addr ip(base.value() + static_cast<std::uint32_t>(m));
                if (m > 0) {
                    auto d = w.deployments.at(base);
                    d.target = ip;
                    if (!w.deployments.emplace(ip, std::move(d)).second)
                        throw DataError("duplicate simulated address " + ip.to_string());
                }
                if (m == 0) add_host(w, rank++, host, ip);
                else w.hosts[host].push_back(ip);
            }
        }
    }

    auto rank = a.value("unresolved_first_rank", std::uint32_t{900'000});
    for (const auto& h : a.value("unresolved_hosts", json::array())) add_host(w, rank++, h.get<std::string>(), std::nullopt);
    return w;
}

void write_active(const json& a, const RunConfig& c, OutputDir& out) {
    const auto world = build_active(a, c.seed);
    RttModel model;
    model.inflation = a.contains("rtt_model") ? a["rtt_model"].value("inflation", 1.5) : 1.5;
    model.jitter_ms = a.contains("rtt_model") ? a["rtt_model"].value("jitter_ms", 0.0) : 0.0;
    model.seed = mix_seed(c.seed, 2);
    model.speed_km_per_ms = c.speed_km_per_ms;
    const std::int64_t ts = a.value("timestamp", std::int64_t{1'409'529'600});

    std::string vps = "# vp_id,lat,lon\n";
    for (const auto& vp : world.vps) vps += format_vantage_point_line(vp) + '\n';
    out.write("vps.txt", vps);

    std::string targets = "# rank,url\n";
    for (const auto& [rank, host] : world.ranked_hosts) targets += std::to_string(rank) + ",http://" + host + "/\n";
    out.write("targets.txt", targets);

    std::string hosts = "# host ip[,ip...]\n";
    for (const auto& [host, addrs] : world.hosts) {
        hosts += host;
        for (std::size_t i = 0; i < addrs.size(); ++i) hosts += (i == 0 ? ' ' : ',') + addrs[i].to_string();
        hosts += '\n';
    }
    out.write("hosts.txt", hosts);

    std::vector<std::string> lines(world.deployments.size());
    std::vector<const SyntheticDeployment*> deps;
    for (const auto& [ip, d] : world.deployments) deps.push_back(&d);
    detail::parallel_for(deps.size(), c.threads, [&](std::size_t i) {
        std::string block;
        for (const auto& vp : world.vps) block += format_measurement_line(simulate_ping(vp, *deps[i], model, ts)) + '\n';
        lines[i] = std::move(block);
    });
    std::string ms = "# vp_id,vp_lat,vp_lon,target_ip,rtt_ms,ts\n";
    for (auto& l : lines) ms += l;
    out.write("measurements.txt", ms);

    json truth = json::array();
    for (const auto& [ip, d] : world.deployments) {
        auto j = to_json(d);
        j["anycast"] = d.sites.size() > 1;
        truth.push_back(std::move(j));
    }
    out.write_json("truth_active.json", {{"rtt_model", {{"inflation", model.inflation}, {"jitter_ms", model.jitter_ms}}},
                                         {"deployments", std::move(truth)}});
    if (!world.owners.empty()) {
        std::string owners;
        for (const auto& [p, o] : world.owners) owners += p.to_string() + ',' + o + '\n';
        out.write("owners_active.csv", owners);
    }
}

void write_passive(const json& p, const RunConfig& c, OutputDir& out) {
    const auto scenario = flow_scenario_from_json(p);
    const auto log = gen_flowlog(scenario, mix_seed(c.seed, 4));

    // the monitor sees no names; ingest recovers them from DNS
    std::string flows;
    for (auto f : log.flows) {
        f.fqdn.reset();
        flows += format_flow_line(f);
        flows += '\n';
    }
    out.write("flows.log", flows);

    std::string dns;
    for (const auto& o : log.dns) dns += format_dns_line(o) + '\n';
    out.write("dns.log", dns);

    json truth = json::array();
    for (const auto& e : log.truth) truth.push_back(to_json(e));
    out.write_json("truth_events.json", truth);

    std::string owners;
    for (const auto& s : scenario.subnets)
        if (!s.owner.empty()) owners += s.prefix.to_string() + ',' + s.owner + '\n';
    if (!owners.empty()) out.write("owners.csv", owners);
}

void cmd_simulate(const RunConfig& c, OutputDir& out) {
    out.add_input("scenario", c.scenario);
    const auto scenario = read_json_file(c.scenario);
    if (!scenario.is_object()) throw DataError("scenario must be a JSON object");
    for (const auto& [key, _] : scenario.items())
        if (key != "active" && key != "passive") throw DataError("unknown scenario section '" + key + "'");
    try {
        if (scenario.contains("active")) write_active(scenario["active"], c, out);
        if (scenario.contains("passive")) write_passive(scenario["passive"], c, out);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed scenario: ") + e.what());
    }
}

// ---- detect / census -------------------------------------------------------

void cmd_detect(const RunConfig& c, OutputDir& out) {
    out.add_input("measurements", c.measurements);
    const auto ms = read_text<std::vector<PingMeasurement>>(c.measurements, read_measurements);
    const auto cities = load_cities(c, out);
    const auto outcome = classify_batch(group_by_target(ms), cities ? &*cities : nullptr, detect_config(c));

    // results and failures interleaved by target address
    std::vector<std::pair<Ipv4Addr, json>> rows;
    std::size_t anycast = 0;
    for (const auto& r : outcome.results) {
        anycast += r.verdict == Verdict::anycast;
        rows.emplace_back(r.target, to_json(r));
    }
    for (const auto& f : outcome.failures) rows.emplace_back(f.target, to_json(f));
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<json> docs;
    for (auto& [_, j] : rows) docs.push_back(std::move(j));
    out.write_jsonl("detections.jsonl", docs);
    out.write_json("detect_summary.json", {{"measurements", ms.size()},
                                           {"targets", rows.size()},
                                           {"anycast", anycast},
                                           {"unicast", outcome.results.size() - anycast},
                                           {"failed", outcome.failures.size()}});
}

void cmd_census(const RunConfig& c, OutputDir& out) {
    out.add_input("targets", c.targets);
    out.add_input("hosts", c.hosts);
    out.add_input("vps", c.vps);
    out.add_input("measurements", c.measurements);
    const auto targets = read_text<TargetList>(c.targets, read_target_list);
    const auto table = read_text<std::map<std::string, std::vector<Ipv4Addr>>>(c.hosts, read_hosts_table);
    const auto vps = read_text<std::vector<VantagePoint>>(c.vps, read_vantage_points);
    const auto ms = read_text<std::vector<PingMeasurement>>(c.measurements, read_measurements);
    const auto cities = load_cities(c, out);
    const auto owners = load_owners(c, out);

    // Name resolution and probing are replayed from files: a host absent from
    // the table does not resolve and a missing (vp, target) pair times out.
    std::map<std::pair<std::string, Ipv4Addr>, double> rtts;
    for (const auto& m : ms) rtts[{m.vp_id, m.target}] = m.rtt_ms;
    const Resolver resolver = [&](const std::string& host) {
        auto it = table.find(host);
        return it == table.end() ? std::vector<Ipv4Addr>{} : it->second;
    };
    const Prober prober = [&](const VantagePoint& vp, Ipv4Addr target) -> std::optional<double> {
        auto it = rtts.find({vp.id, target});
        if (it == rtts.end()) return std::nullopt;
        return it->second;
    };

    const auto hosts = extract_hostnames(targets);
    const auto resolution = resolve_targets(hosts.hosts, resolver);
    CensusConfig cfg;
    cfg.representatives_per_slash24 = c.representatives;
    cfg.max_in_flight = c.threads;
    cfg.detect = detect_config(c);
    auto report = run_census(resolution.groups, prober, vps, cities ? &*cities : nullptr, cfg);
    report.warnings.insert(report.warnings.begin(), resolution.warnings.begin(), resolution.warnings.end());
    report.warnings.insert(report.warnings.begin(), hosts.warnings.begin(), hosts.warnings.end());
    report = filter_conservative(std::move(report), c.min_locations);

    out.write_json("census.json", to_json(report));
    out.write_json("census.geojson", export_geojson(report, owners));
    std::vector<json> warnings;
    for (const auto& w : report.warnings) warnings.push_back(to_json(w));
    out.write_jsonl("warnings.jsonl", warnings);
}

// ---- passive side ----------------------------------------------------------

void cmd_ingest(const RunConfig& c, OutputDir& out) {
    const auto parsed = load_flows(c, out);
    std::vector<DnsObservation> observations;
    std::vector<json> errors = errors_jsonl("flows", parsed.errors);
    if (!c.dns.empty()) {
        out.add_input("dns", c.dns);
        std::ifstream in(c.dns);
        if (!in) throw DataError("cannot open " + c.dns);
        auto dns = parse_dns_log(in);
        observations = std::move(dns.observations);
        auto e = errors_jsonl("dns", dns.errors);
        errors.insert(errors.end(), e.begin(), e.end());
    }

    DnsCache cache(c.dns_capacity, c.dns_ttl_s);
    const auto annotated = annotate_stream(parsed.flows, observations, cache);
    const auto named = std::count_if(annotated.begin(), annotated.end(), [](const auto& f) { return f.fqdn.has_value(); });
    out.write("flows_annotated.log", flow_lines(annotated));
    out.write_jsonl("parse_errors.jsonl", errors);

    json summary = {{"flows", annotated.size()},
                    {"annotated", named},
                    {"dns_observations", observations.size()},
                    {"errors", errors.size()}};
    if (!c.census.empty()) {
        const auto anycast = anycast_slash24s(load_census(c, out));
        std::vector<FlowRecord> kept;
        if (!anycast.empty()) kept = filter_anycast_flows(annotated, anycast);
        out.write("flows_anycast.log", flow_lines(kept));
        summary["anycast_flows"] = kept.size();
    }
    out.write_json("ingest_summary.json", summary);
}

void cmd_analyze(const RunConfig& c, OutputDir& out) {
    const auto parsed = load_flows(c, out);
    const auto anycast = anycast_slash24s(load_census(c, out));
    const TimeWindow window{c.from.value_or(-std::numeric_limits<double>::infinity()),
                            c.to.value_or(std::numeric_limits<double>::infinity())};

    std::vector<FlowRecord> web, in_window;
    for (const auto& f : parsed.flows) {
        if (f.l7 != L7Protocol::other) web.push_back(f);
        if (window.contains(f.ts_start)) in_window.push_back(f);
    }
    std::vector<FlowRecord> acdn;
    if (!anycast.empty()) acdn = filter_anycast_flows(in_window, anycast);

    SummaryOptions opts;
    if (c.top_n > 0) opts.top_n = c.top_n;
    opts.others_cutoff = c.others_cutoff;
    json subnets = json::array();
    for (const auto& s : subnet_summary(acdn, window, opts)) subnets.push_back(to_json(s));
    out.write_json("subnets.json", subnets);

    json services = json::array();
    for (const auto& r : service_table(acdn, c.services_top)) services.push_back(to_json(r));
    out.write_json("services.json", services);

    json users = json::array();
    for (const auto& p : active_user_series(web, anycast, c.bin_s, window))
        users.push_back({{"bin_start", p.bin_start},
                         {"fraction", opt_json(p.fraction)},
                         {"active_clients", p.active_clients},
                         {"anycast_clients", p.anycast_clients}});
    out.write_json("users.json", users);

    json discovery = json::array();
    for (const auto& p : compress_steps(discovery_curve(acdn, c.reorder_window_s)))
        discovery.push_back({{"ts", p.ts}, {"distinct_servers", p.distinct_servers}});
    out.write_json("discovery.json", discovery);

    if (!c.dns.empty()) {
        out.add_input("dns", c.dns);
        std::ifstream in(c.dns);
        if (!in) throw DataError("cannot open " + c.dns);
        const auto map = build_fqdn_ip_map(parse_dns_log(in).observations);
        const auto cdf_json = [](const std::vector<CdfPoint>& cdf) {
            json a = json::array();
            for (const auto& p : cdf) a.push_back({{"x", p.x}, {"y", p.y}});
            return a;
        };
        json per = json::object();
        for (const auto& prefix : anycast)
            per[prefix.to_string()] = cdf_json(lb_cdf(restrict_to_owner(map, prefix), LbScope{prefix}));
        out.write_json("lb_cdf.json", {{"all", cdf_json(lb_cdf(map))}, {"per_slash24", std::move(per)}});
    }
    out.write_jsonl("parse_errors.jsonl", errors_jsonl("flows", parsed.errors));
}

void cmd_events(const RunConfig& c, OutputDir& out) {
    const auto parsed = load_flows(c, out);
    std::optional<std::set<Slash24>> only;
    if (!c.census.empty()) only = anycast_slash24s(load_census(c, out));

    std::map<Slash24, std::vector<FlowRecord>> per;
    for (const auto& f : parsed.flows) {
        const auto p = slash24_of(f.server_ip);
        if (!only || only->count(p)) per[p].push_back(f);
    }

    EventsConfig cfg;
    cfg.bin_s = c.bin_s;
    cfg.min_samples = c.min_samples;
    cfg.min_support = c.min_support;
    cfg.level = {c.abs_min_ms, c.rel_min, c.persistence_bins, c.settle_bins};
    cfg.ttl_persistence_bins = c.persistence_bins;
    cfg.window_bins = c.window_bins;

    std::vector<std::pair<Slash24, std::vector<FlowRecord>>> work(per.begin(), per.end());
    std::vector<SubnetEvents> results(work.size());
    detail::parallel_for(work.size(), c.threads, [&](std::size_t i) {
        auto& flows = work[i].second;
        std::stable_sort(flows.begin(), flows.end(),
                         [](const auto& a, const auto& b) { return a.ts_start < b.ts_start; });
        results[i] = analyze_subnet_events(work[i].first, flows, cfg);
    });

    const auto list = [](const std::vector<RoutingEvent>& es) {
        json a = json::array();
        for (const auto& e : es) a.push_back(to_json(e));
        return a;
    };
    json subnets = json::array();
    json series = json::array();
    std::vector<json> violations;
    for (const auto& r : results) {
        subnets.push_back({{"slash24", r.slash24.to_string()},
                           {"correlated", list(r.correlated)},
                           {"rtt_events", list(r.rtt_events)},
                           {"ttl_events", list(r.ttl_events)},
                           {"ttfb_events", list(r.ttfb_events)}});
        const auto levels = [](const MetricSeries& s) {
            json a = json::array();
            for (const auto& b : s.bins) a.push_back({b.bin_start, b.level, b.sample_count});
            return a;
        };
        json ttl = json::array();
        for (const auto& b : r.ttl.bins) ttl.push_back({{"bin_start", b.bin_start}, {"pattern", to_json(b.pattern)}});
        series.push_back({{"slash24", r.slash24.to_string()},
                          {"rtt", levels(r.rtt)},
                          {"ttfb", levels(r.ttfb)},
                          {"ttl", std::move(ttl)}});
        for (const auto& v : r.floor_violations) violations.push_back(to_json(v));
    }
    out.write_json("events.json", {{"bin_s", c.bin_s}, {"subnets", std::move(subnets)}});
    out.write_json("series.json", series);
    out.write_jsonl("floor_violations.jsonl", violations);
    out.write_jsonl("parse_errors.jsonl", errors_jsonl("flows", parsed.errors));
}

// ---- report ---------------------------------------------------------------

void cmd_report(const RunConfig& c, OutputDir& out) {
    const auto report = load_census(c, out);
    const auto owners = load_owners(c, out);

    std::map<std::string, json> usage;
    if (!c.subnets.empty()) {
        out.add_input("subnets", c.subnets);
        for (const auto& row : read_json_file(c.subnets)) usage[row.at("slash24").get<std::string>()] = row;
    }
    std::map<std::string, std::pair<std::size_t, int>> changes;  // count, max confidence
    if (!c.events.empty()) {
        out.add_input("events", c.events);
        for (const auto& s : read_json_file(c.events).at("subnets")) {
            auto& [n, conf] = changes[s.at("slash24").get<std::string>()];
            for (const auto& e : s.at("correlated")) {
                ++n;
                conf = std::max(conf, e.at("confidence").get<int>());
            }
        }
    }

    static constexpr const char* kContinents[] = {"EU", "NA", "SA", "AS", "AF", "OC"};
    std::string csv = "slash24,owner,locations,EU,NA,SA,AS,AF,OC,ip32,users,flows,volume_bytes,changes,max_confidence\n";
    std::ostringstream txt;
    txt << "anycast /24s: " << report.stats.anycast_slash24s << " (" << report.stats.anycast_ip32s
        << " /32s), excluded: " << report.stats.excluded_slash24s << ", probed /32s: " << report.stats.probed_ip32s
        << " of " << report.stats.ip32s << "\n\n";
    for (const auto& [prefix, rec] : report.subnets) {
        if (rec.verdict != SubnetVerdict::anycast) continue;
        std::map<std::string, std::size_t> per_continent;
        for (const auto& inst : rec.instances)
            if (inst.location)
                if (auto cont = continent_of(inst.location->country)) ++per_continent[std::string(*cont)];
        const auto key = prefix.to_string();
        const auto owner = owners.count(prefix) ? owners.at(prefix) : std::string();
        csv += key + ',' + owner + ',' + std::to_string(rec.location_count);
        for (const char* cont : kContinents) csv += ',' + std::to_string(per_continent[cont]);
        if (auto it = usage.find(key); it != usage.end())
            csv += ',' + it->second.at("ip32").dump() + ',' + it->second.at("users").dump() + ',' +
                   it->second.at("flows").dump() + ',' + it->second.at("volume_bytes").dump();
        else
            csv += ",,,,";
        if (auto it = changes.find(key); it != changes.end())
            csv += ',' + std::to_string(it->second.first) + ',' + std::to_string(it->second.second);
        else
            csv += ",,";
        csv += '\n';

        txt << key;
        if (!owner.empty()) txt << " (" << owner << ")";
        txt << ": " << rec.location_count << " locations";
        for (const char* cont : kContinents)
            if (per_continent[cont]) txt << ' ' << cont << '=' << per_continent[cont];
        txt << '\n';
        for (const auto& inst : rec.instances) {
            txt << "  " << (inst.location ? inst.location->name + ", " + inst.location->country : "(unlocated)")
                << "  radius " << detail::fixed(inst.disk.radius_km(), 1) << " km"
                << (inst.high_confidence ? "  high-confidence" : "") << '\n';
        }
    }
    out.write("report.csv", csv);
    out.write("report.txt", txt.str());
    out.write_json("anycast_map.geojson", export_geojson(report, owners));
}

// ---- argument handling -------------------------------------------------------

// Turns a JSON config object into flags placed ahead of the command line, so
// explicit flags (parsed later, last one wins) override the file.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::optional<std::string> path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (!path || args.empty()) return args;
    const auto doc = read_json_file(*path);
    if (!doc.is_object()) throw CLI::ValidationError("--config", "config file must hold a JSON object");
    std::vector<std::string> flags;
    for (const auto& [key, value] : doc.items()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (value.is_null()) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) flags.push_back(flag);
            continue;
        }
        flags.push_back(flag);
        flags.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
    args.insert(args.begin() + 1, flags.begin(), flags.end());
    return args;
}

struct Subcommand {
    CLI::App* app;
    void (*fn)(const RunConfig&, OutputDir&);
};

template <typename T>
CLI::Option* add_optional(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
    return app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    RunConfig c;
    CLI::App app{"Anycast CDN census and passive traffic analysis", "acdn"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_version_flag("--version", "acdn 1.0.0");

    std::vector<Subcommand> subs;
    const auto sub = [&](const char* name, const char* help, void (*fn)(const RunConfig&, OutputDir&)) {
        auto* s = app.add_subcommand(name, help);
        s->add_option("--config", "JSON file whose keys are flag names; flags override it");
        s->add_option("-o,--out", c.out, "output directory")->capture_default_str();
        s->add_option("--threads", c.threads, "worker threads (0 = all cores)")->capture_default_str();
        subs.push_back({s, fn});
        return s;
    };
    const auto in_file = [](CLI::App* s, const char* name, std::string& target, const char* help, bool required) {
        auto* o = s->add_option(name, target, help)->check(CLI::ExistingFile);
        if (required) o->required();
    };
    const auto detect_opts = [&](CLI::App* s) {
        s->add_option("--speed-km-per-ms", c.speed_km_per_ms, "propagation speed")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        s->add_option("--high-confidence-km", c.high_confidence_km, "radius below which a location is trusted")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
        s->add_option("--greedy-order", c.greedy_order, "disk order for enumeration")
            ->check(CLI::IsMember({"smallest-radius", "vp-id"}))
            ->capture_default_str();
        in_file(s, "--cities", c.cities, "city database (name,country,lat,lon,population)", false);
    };
    const auto bin_opt = [&](CLI::App* s) {
        s->add_option("--bin-s", c.bin_s, "time bin in seconds")->check(CLI::PositiveNumber)->capture_default_str();
    };
    const auto reorder_opt = [&](CLI::App* s) {
        s->add_option("--reorder-window-s", c.reorder_window_s, "tolerated flow reordering")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
    };

    auto* sim = sub("simulate", "generate synthetic measurements, flow logs and truth files", cmd_simulate);
    sim->add_option("--seed", c.seed, "random seed")->required();
    in_file(sim, "--scenario", c.scenario, "scenario JSON", true);
    sim->add_option("--speed-km-per-ms", c.speed_km_per_ms, "propagation speed")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto* det = sub("detect", "classify targets from a ping campaign", cmd_detect);
    in_file(det, "--measurements", c.measurements, "vp_id,vp_lat,vp_lon,target_ip,rtt_ms,ts", true);
    detect_opts(det);

    auto* cen = sub("census", "target list to per-/24 anycast census", cmd_census);
    in_file(cen, "--targets", c.targets, "rank,url", true);
    in_file(cen, "--hosts", c.hosts, "host ip[,ip...] resolution table", true);
    in_file(cen, "--vps", c.vps, "vp_id,lat,lon", true);
    in_file(cen, "--measurements", c.measurements, "probe results replayed as the prober", true);
    in_file(cen, "--owners", c.owners, "prefix,owner", false);
    cen->add_option("--representatives", c.representatives, "members probed per /24")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cen->add_option("--min-locations", c.min_locations, "conservative filter threshold")
        ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()))
        ->capture_default_str();
    detect_opts(cen);

    auto* ing = sub("ingest", "parse a flow log and annotate it from DNS", cmd_ingest);
    in_file(ing, "--flows", c.flows, "flow log", true);
    in_file(ing, "--dns", c.dns, "DNS observation log", false);
    in_file(ing, "--census", c.census, "census.json; also writes the anycast subset", false);
    ing->add_option("--dns-capacity", c.dns_capacity, "DNS cache entries")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ing->add_option("--dns-ttl-s", c.dns_ttl_s, "DNS cache entry lifetime")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    reorder_opt(ing);

    auto* ana = sub("analyze", "traffic tables for anycast /24s", cmd_analyze);
    in_file(ana, "--flows", c.flows, "annotated flow log", true);
    in_file(ana, "--census", c.census, "census.json", true);
    in_file(ana, "--dns", c.dns, "DNS observation log for the load-balancing CDF", false);
    ana->add_option("--top-n", c.top_n, "subnet rows before Others (0 = all)")->capture_default_str();
    add_optional(ana, "--others-cutoff", c.others_cutoff, "fold subnets with at most this many users");
    ana->add_option("--services-top", c.services_top, "service rows (0 = all)")->capture_default_str();
    add_optional(ana, "--from", c.from, "window start, UTC seconds");
    add_optional(ana, "--to", c.to, "window end, UTC seconds (exclusive)");
    bin_opt(ana);
    reorder_opt(ana);

    auto* evt = sub("events", "routing change detection per /24", cmd_events);
    in_file(evt, "--flows", c.flows, "flow log", true);
    in_file(evt, "--census", c.census, "restrict to anycast /24s of this census", false);
    bin_opt(evt);
    evt->add_option("--abs-min-ms", c.abs_min_ms, "minimum absolute shift")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    evt->add_option("--rel-min", c.rel_min, "minimum shift relative to the baseline")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    evt->add_option("--persistence-bins", c.persistence_bins, "bins a change must hold")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    evt->add_option("--settle-bins", c.settle_bins, "bins before a new level can shift again")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    evt->add_option("--min-samples", c.min_samples, "flows per bin")->check(CLI::PositiveNumber)->capture_default_str();
    evt->add_option("--min-support", c.min_support, "flows per TTL pair")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    evt->add_option("--window-bins", c.window_bins, "correlation window")->capture_default_str();
    reorder_opt(evt);

    auto* rep = sub("report", "per-/24 summary table and map", cmd_report);
    in_file(rep, "--census", c.census, "census.json", true);
    in_file(rep, "--owners", c.owners, "prefix,owner", false);
    in_file(rep, "--events", c.events, "events.json", false);
    in_file(rep, "--subnets", c.subnets, "subnets.json", false);

    try {
        auto args = expand_config(raw_args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const DataError& e) {
        err << "acdn: " << e.what() << '\n';
        return kExitUsage;
    }

    for (const auto& s : subs) {
        if (!s.app->parsed()) continue;
        c.subcommand = s.app->get_name();
        try {
            OutputDir dir(c.out);
            s.fn(c, dir);
            dir.write_manifest(c.subcommand, config_json(c));
            return kExitOk;
        } catch (const DataError& e) {
            err << "acdn " << c.subcommand << ": " << e.what() << '\n';
            return kExitData;
        } catch (const InvariantError& e) {
            err << "acdn " << c.subcommand << ": internal error: " << e.what() << '\n';
            return kExitInternal;
        } catch (const std::invalid_argument& e) {
            err << "acdn " << c.subcommand << ": " << e.what() << '\n';
            return kExitData;
        } catch (const json::exception& e) {
            err << "acdn " << c.subcommand << ": " << e.what() << '\n';
            return kExitData;
        } catch (const std::exception& e) {
            err << "acdn " << c.subcommand << ": internal error: " << e.what() << '\n';
            return kExitInternal;
        }
    }
    return kExitUsage;
}

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace acdn::cli
