#include <stdexcept>

#include "acdn/census.hpp"
#include "acdn/continents.hpp"
#include "acdn/error.hpp"
#include "acdn/probe_sim.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace acdn;

namespace {

Ipv4Addr ip(const char* s) { return Ipv4Addr::from_string(s); }

// Prober backed by simulated deployments; unknown targets time out.
Prober sim_prober(const std::map<Ipv4Addr, SyntheticDeployment>& deps, RttModel model = {}) {
    return [&deps, model](const VantagePoint& vp, Ipv4Addr t) -> std::optional<double> {
        auto it = deps.find(t);
        if (it == deps.end()) return std::nullopt;
        return simulate_ping(vp, it->second, model).rtt_ms;
    };
}

}  // namespace

TEST_CASE("hostname extraction") {
    CHECK(hostname_from_url("http://example.com/index") == "example.com");
    CHECK(hostname_from_url("HTTPS://User:pw@WWW.Example.COM:8443/a?b#c") == "www.example.com");
    CHECK(hostname_from_url("example.org/path") == "example.org");
    CHECK(hostname_from_url("example.org.") == "example.org");
    CHECK_FALSE(hostname_from_url("not a url"));
    CHECK_FALSE(hostname_from_url(""));
    CHECK_FALSE(hostname_from_url("http://"));

    TargetList t{{500, "http://dup.example/"}, {10, "https://dup.example/x"}, {3, "not a url"}, {7, "b.example"}};
    const auto got = extract_hostnames(t);
    REQUIRE(got.hosts.size() == 2);
    CHECK(got.hosts[0].host == "b.example");
    CHECK(got.hosts[1].host == "dup.example");
    CHECK(got.hosts[1].rank == 10);
    REQUIRE(got.warnings.size() == 1);
    CHECK(got.warnings[0].subject == "not a url");
}

TEST_CASE("target list validation") {
    CHECK_NOTHROW(validate_target_list({{1, "a"}, {2, "b"}}));
    CHECK_THROWS_AS(validate_target_list({{1, "a"}, {1, "b"}}), DataError);
    CHECK_THROWS_AS(validate_target_list({{0, "a"}}), DataError);
}

TEST_CASE("resolve_targets groups by /24") {
    std::map<std::string, std::vector<Ipv4Addr>> table{
        {"one.example", {ip("1.2.3.9"), ip("1.2.3.4"), ip("1.2.3.4")}},
        {"two.example", {ip("9.8.7.6")}},
        {"nx.example", {}},
    };
    const Resolver r = [&](const std::string& h) {
        if (h == "boom.example") throw std::runtime_error("timeout");
        return table.at(h);
    };
    const auto res = resolve_targets({{1, "one.example"}, {2, "two.example"}, {3, "nx.example"}, {4, "boom.example"}}, r);
    CHECK(res.addresses.size() == 3);
    REQUIRE(res.groups.size() == 2);
    const auto& g = res.groups.at(Slash24::from_string("1.2.3.0/24"));
    CHECK(g == std::vector<Ipv4Addr>{ip("1.2.3.4"), ip("1.2.3.9")});
    CHECK(res.warnings.size() == 2);
    CHECK(res.by_host.at("nx.example").empty());
}

TEST_CASE("representatives are spread over the member list") {
    CHECK(representative_indices(0, 4).empty());
    CHECK(representative_indices(3, 4) == std::vector<std::size_t>{0, 1, 2});
    CHECK(representative_indices(8, 4) == std::vector<std::size_t>{0, 2, 4, 6});
    CHECK(representative_indices(10, 4) == std::vector<std::size_t>{0, 2, 5, 7});
}

TEST_CASE("run_census on simulated deployments") {
    const auto vps = gen_vantage_points(20, 3);
    std::map<Ipv4Addr, SyntheticDeployment> deps;
    deps[ip("1.2.3.4")] = gen_deployment(ip("1.2.3.4"), 3, GeoBounds::world(), 42, 5000);
    deps[ip("1.2.3.5")] = SyntheticDeployment{ip("1.2.3.5"), {GeoPoint(48.85, 2.35)}, {64}, 0};
    deps[ip("5.6.7.8")] = SyntheticDeployment{ip("5.6.7.8"), {GeoPoint(35.7, 139.7)}, {64}, 0};
    Slash24Groups groups{{Slash24::from_string("1.2.3.0"), {ip("1.2.3.5"), ip("1.2.3.4")}},
                         {Slash24::from_string("5.6.7.0"), {ip("5.6.7.8")}},
                         {Slash24::from_string("9.9.9.0"), {ip("9.9.9.9")}}};
    RttModel noiseless;
    noiseless.inflation = 1.0;
    const auto report = run_census(groups, sim_prober(deps, noiseless), vps, nullptr);

    const auto& any = report.subnets.at(Slash24::from_string("1.2.3.0"));
    CHECK(any.verdict == SubnetVerdict::anycast);
    CHECK(any.location_count >= 2);
    CHECK(any.location_count <= 3);
    CHECK(any.anycast_members == std::vector<Ipv4Addr>{ip("1.2.3.4")});
    CHECK(any.members == std::vector<Ipv4Addr>{ip("1.2.3.4"), ip("1.2.3.5")});
    CHECK(report.subnets.at(Slash24::from_string("5.6.7.0")).verdict == SubnetVerdict::unicast);
    CHECK(report.subnets.at(Slash24::from_string("9.9.9.0")).verdict == SubnetVerdict::unmeasured);
    REQUIRE(report.failures.size() == 1);
    CHECK(report.failures[0].target == ip("9.9.9.9"));
    CHECK(report.stats.ip32s == 4);
    CHECK(report.stats.slash24s == 3);
    CHECK(report.stats.probes_sent == 80);
    CHECK(report.stats.probes_missing == 20);
    CHECK(report.stats.anycast_slash24s == 1);
    CHECK(anycast_slash24s(report) == std::set<Slash24>{Slash24::from_string("1.2.3.0")});
}

TEST_CASE("run_census with one vantage point warns and finds nothing") {
    std::map<Ipv4Addr, SyntheticDeployment> deps;
    deps[ip("1.2.3.4")] = gen_deployment(ip("1.2.3.4"), 5, GeoBounds::world(), 1, 3000);
    const auto report = run_census({{Slash24::from_string("1.2.3.0"), {ip("1.2.3.4")}}}, sim_prober(deps),
                                   gen_vantage_points(1, 1), nullptr);
    CHECK(report.stats.anycast_slash24s == 0);
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].stage == "census");
}

TEST_CASE("all-unicast census finds no anycast /24") {
    const auto vps = gen_vantage_points(50, 8);
    std::map<Ipv4Addr, SyntheticDeployment> deps;
    Slash24Groups groups;
    oracle::Gen g(31);
    for (std::uint32_t i = 0; i < 60; ++i) {
        const Ipv4Addr a(0x0B000000u + i * 256 + 1);
        deps[a] = SyntheticDeployment{a, {g.point()}, {64}, 0};
        groups[slash24_of(a)].push_back(a);
    }
    RttModel model;
    model.jitter_ms = 3.0;
    const auto report = run_census(groups, sim_prober(deps, model), vps, nullptr);
    CHECK(report.stats.anycast_slash24s == 0);
    CHECK(report.stats.anycast_ip32s == 0);
}

TEST_CASE("filter_conservative") {
    CensusReport r;
    const auto p2 = Slash24::from_string("1.0.0.0"), p7 = Slash24::from_string("2.0.0.0"),
               pu = Slash24::from_string("3.0.0.0");
    r.subnets[p2] = {p2, SubnetVerdict::anycast, 2, {}, {}, {}, {}, {}};
    r.subnets[p7] = {p7, SubnetVerdict::anycast, 7, {}, {}, {}, {}, {}};
    r.subnets[pu] = {pu, SubnetVerdict::unicast, 1, {}, {}, {}, {}, {}};

    const auto f3 = filter_conservative(r, 3);
    CHECK(f3.subnets.at(p2).verdict == SubnetVerdict::excluded_conservative);
    CHECK(f3.subnets.at(p7).verdict == SubnetVerdict::anycast);
    CHECK(f3.subnets.at(pu).verdict == SubnetVerdict::unicast);
    CHECK(f3.stats.anycast_slash24s == 1);
    CHECK(f3.stats.excluded_slash24s == 1);
    CHECK(f3.min_locations == 3u);

    const auto f2 = filter_conservative(r, 2);
    CHECK(anycast_slash24s(f2) == anycast_slash24s(r));

    CHECK_THROWS_AS(filter_conservative(r, 1), std::invalid_argument);

    // monotone: raising the threshold never adds anycast /24s
    for (std::size_t m = 2; m < 10; ++m) {
        const auto a = anycast_slash24s(filter_conservative(r, m));
        const auto b = anycast_slash24s(filter_conservative(r, m + 1));
        CHECK(std::includes(a.begin(), a.end(), b.begin(), b.end()));
    }
}

TEST_CASE("export_geojson") {
    CensusReport empty;
    auto doc = export_geojson(empty);
    CHECK(doc["type"] == "FeatureCollection");
    CHECK(doc["features"].empty());

    CensusReport r;
    const auto p = Slash24::from_string("1.2.3.0");
    SubnetRecord rec{p, SubnetVerdict::anycast, 4, {"EU"}, {}, {}, {}, {}};
    const City cities[] = {{"Paris", "FR", {48.85, 2.35}, 1}, {"Berlin", "DE", {52.5, 13.4}, 1},
                           {"Madrid", "ES", {40.4, -3.7}, 1}};
    for (const auto& c : cities) {
        AnycastInstance inst;
        inst.disk = LatencyDisk(c.location, 100);
        inst.location = c;
        inst.high_confidence = true;
        rec.instances.push_back(inst);
    }
    AnycastInstance lost;
    lost.disk = LatencyDisk({0, -30}, 500);
    rec.instances.push_back(lost);
    r.subnets[p] = rec;
    doc = export_geojson(r, {{p, "Owner Inc"}});
    REQUIRE(doc["features"].size() == 3);
    CHECK(doc["properties"]["unlocated_instances"] == 1);
    const auto& f = doc["features"][0];
    CHECK(f["geometry"]["coordinates"][0] == doctest::Approx(2.35));
    CHECK(f["geometry"]["coordinates"][1] == doctest::Approx(48.85));
    CHECK(f["properties"]["owner"] == "Owner Inc");
    CHECK(f["properties"]["slash24"] == "1.2.3.0/24");
    CHECK(f["properties"]["confidence"] == "high");
}

TEST_CASE("continent table") {
    CHECK(continent_of("IT") == "EU");
    CHECK(continent_of("us") == "NA");
    CHECK(continent_of("BR") == "SA");
    CHECK(continent_of("JP") == "AS");
    CHECK(continent_of("NG") == "AF");
    CHECK(continent_of("AU") == "OC");
    CHECK_FALSE(continent_of("AQ"));
    CHECK_FALSE(continent_of("XX"));
}
