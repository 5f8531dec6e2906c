#include <filesystem>
#include <fstream>
#include <sstream>

#include "acdn/cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSrc = ACDN_SOURCE_DIR;
const fs::path kTmp = ACDN_TEST_TMP;

struct Result {
    int code;
    std::string out, err;
};

Result acdn_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = acdn::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
    const auto p = kTmp / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

json load(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// A small scenario shared by the tests below; simulated once.
const fs::path& simulated() {
    static const fs::path dir = [] {
        const auto d = fresh("sim");
        write(d / "scenario.json", R"({
          "active": {"vantage_points": 30,
                     "targets": [{"rank": 1, "host": "any.example", "ip": "1.2.3.4", "sites": 4, "min_separation_km": 3000},
                                 {"rank": 2, "host": "uni.example", "ip": "5.6.7.8", "sites": 1}]},
          "passive": {"duration_s": 172800, "clients": 40,
                      "subnets": [{"prefix": "1.2.3.0/24"}, {"prefix": "5.6.7.0/24", "anycast": false}]}
        })");
        const auto r = acdn_run({"simulate", "--seed", "7", "--scenario", (d / "scenario.json").string(), "-o",
                                 (d / "out").string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        return d / "out";
    }();
    return dir;
}

}  // namespace

TEST_CASE("usage errors") {
    CHECK(acdn_run({}).code == acdn::cli::kExitUsage);
    CHECK(acdn_run({"bogus"}).code == acdn::cli::kExitUsage);
    CHECK(acdn_run({"detect", "--nope"}).code == acdn::cli::kExitUsage);
    CHECK(acdn_run({"detect", "--measurements", "/no/such/file"}).code == acdn::cli::kExitUsage);
    const auto help = acdn_run({"--help"});
    CHECK(help.code == acdn::cli::kExitOk);
    CHECK(help.out.find("simulate") != std::string::npos);
}

TEST_CASE("data errors exit with code 2") {
    const auto d = fresh("bad");
    write(d / "m.txt", "vp1,0,0,1.2.3.4,-5,0\n");
    const auto r = acdn_run({"detect", "--measurements", (d / "m.txt").string(), "-o", (d / "out").string()});
    CHECK(r.code == acdn::cli::kExitData);
    CHECK(r.err.find("line 1") != std::string::npos);
    CHECK_FALSE(fs::exists(d / "out" / "manifest.json"));

    write(d / "scenario.json", R"({"weather": {}})");
    CHECK(acdn_run({"simulate", "--seed", "1", "--scenario", (d / "scenario.json").string(), "-o",
                    (d / "sim").string()})
              .code == acdn::cli::kExitData);
}

TEST_CASE("pipeline end to end") {
    const auto& sim = simulated();
    for (const char* f : {"vps.txt", "targets.txt", "hosts.txt", "measurements.txt", "flows.log", "dns.log",
                          "truth_events.json", "manifest.json"})
        CHECK_MESSAGE(fs::exists(sim / f), f);

    const auto d = fresh("pipeline");
    auto r = acdn_run({"detect", "--measurements", (sim / "measurements.txt").string(), "--cities",
                       (kSrc / "data/cities.csv").string(), "-o", (d / "detect").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto summary = load(d / "detect" / "detect_summary.json");
    CHECK(summary["anycast"] == 1);

    r = acdn_run({"census", "--targets", (sim / "targets.txt").string(), "--hosts", (sim / "hosts.txt").string(),
                  "--vps", (sim / "vps.txt").string(), "--measurements", (sim / "measurements.txt").string(), "-o",
                  (d / "census").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto census = load(d / "census" / "census.json");
    CHECK(census["stats"]["anycast_slash24s"] == 1);

    const auto census_path = (d / "census" / "census.json").string();
    r = acdn_run({"ingest", "--flows", (sim / "flows.log").string(), "--dns", (sim / "dns.log").string(), "--census",
                  census_path, "-o", (d / "ingest").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(fs::file_size(d / "ingest" / "flows_anycast.log") > 0);

    r = acdn_run({"analyze", "--flows", (d / "ingest" / "flows_annotated.log").string(), "--census", census_path,
                  "--dns", (sim / "dns.log").string(), "-o", (d / "analyze").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto subnets = load(d / "analyze" / "subnets.json");
    REQUIRE(subnets.size() == 1);
    CHECK(subnets[0]["slash24"] == "1.2.3.0/24");

    r = acdn_run({"events", "--flows", (sim / "flows.log").string(), "--census", census_path, "-o",
                  (d / "events").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);

    r = acdn_run({"report", "--census", census_path, "--events", (d / "events" / "events.json").string(),
                  "--subnets", (d / "analyze" / "subnets.json").string(), "-o", (d / "report").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(slurp(d / "report" / "report.csv").find("1.2.3.0/24") != std::string::npos);
}

TEST_CASE("analyze on an empty flow log yields empty tables") {
    const auto d = fresh("empty");
    write(d / "flows.log", "");
    const auto census = (fresh("empty_census") / "census.json");
    write(census, R"({"min_locations": null, "stats": {"ip32s": 0, "slash24s": 0, "probed_ip32s": 0,
        "probes_sent": 0, "probes_missing": 0, "anycast_ip32s": 0, "anycast_slash24s": 0, "excluded_slash24s": 0},
        "subnets": [], "failures": [], "warnings": []})");
    const auto r = acdn_run({"analyze", "--flows", (d / "flows.log").string(), "--census", census.string(), "-o",
                             (d / "out").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(load(d / "out" / "subnets.json").empty());
    CHECK(load(d / "out" / "services.json").empty());
}

TEST_CASE("config file supplies flags and explicit flags win") {
    const auto& sim = simulated();
    const auto d = fresh("config");
    write(d / "cfg.json", R"({"measurements": ")" + (sim / "measurements.txt").string() +
                              R"(", "high_confidence_km": 123, "greedy_order": "vp-id"})");
    const auto r = acdn_run({"detect", "--config", (d / "cfg.json").string(), "--greedy-order", "smallest-radius",
                             "-o", (d / "out").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto m = load(d / "out" / "manifest.json");
    CHECK(m["config"]["high_confidence_km"] == 123.0);
    CHECK(m["config"]["greedy_order"] == "smallest-radius");

    write(d / "broken.json", "{");
    CHECK(acdn_run({"detect", "--config", (d / "broken.json").string()}).code == acdn::cli::kExitUsage);
}

TEST_CASE("re-running gives byte-identical artifacts") {
    const auto d = fresh("determinism");
    const auto scenario = (kSrc / "data/scenarios/demo.json").string();
    for (const char* run : {"a", "b"}) {
        const auto r = acdn_run({"simulate", "--seed", "11", "--scenario", scenario, "-o", (d / run).string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
    }
    const auto a = load(d / "a" / "manifest.json"), b = load(d / "b" / "manifest.json");
    CHECK(a["outputs"] == b["outputs"]);
    const auto other = acdn_run({"simulate", "--seed", "12", "--scenario", scenario, "-o", (d / "c").string()});
    REQUIRE(other.code == 0);
    CHECK(load(d / "c" / "manifest.json")["outputs"] != a["outputs"]);
}
