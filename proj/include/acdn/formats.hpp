#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "acdn/census.hpp"
#include "acdn/characterize.hpp"
#include "acdn/city_db.hpp"
#include "acdn/detect.hpp"
#include "acdn/events.hpp"
#include "acdn/flow.hpp"
#include "acdn/probe_sim.hpp"
#include "json.hpp"

namespace acdn {

// Text inputs. Blank lines and '#' comments are ignored; every reader throws
// DataError with the offending line number on malformed input.

// vp_id,vp_lat,vp_lon,target_ip,rtt_ms,ts
std::vector<PingMeasurement> read_measurements(std::istream& in);
std::string format_measurement_line(const PingMeasurement& m);

// vp_id,lat,lon
std::vector<VantagePoint> read_vantage_points(std::istream& in);
std::string format_vantage_point_line(const VantagePoint& vp);

// name,country,lat,lon,population
CityDb read_city_db(std::istream& in);

// rank,url
TargetList read_target_list(std::istream& in);

// "host ip[,ip...]" or a bare "host" for a name that does not resolve.
std::map<std::string, std::vector<Ipv4Addr>> read_hosts_table(std::istream& in);

// "a.b.c.0/24,Owner name"
std::map<Slash24, std::string> read_owners(std::istream& in);

// JSON documents.

nlohmann::json to_json(const GeoPoint& p);
nlohmann::json to_json(const AnycastInstance& inst);
nlohmann::json to_json(const DetectionResult& r);
nlohmann::json to_json(const DetectionFailure& f);
nlohmann::json to_json(const Warning& w);
nlohmann::json to_json(const CensusReport& report);
CensusReport census_report_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const SubnetSummary& s);
nlohmann::json to_json(const ServiceRow& r);
nlohmann::json to_json(const RoutingEvent& e);
nlohmann::json to_json(const TruthEvent& e);
nlohmann::json to_json(const TtlPattern& p);
nlohmann::json to_json(const ParseError& e);
nlohmann::json to_json(const FloorViolation& v);
TruthEvent truth_event_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const SyntheticDeployment& d);
SyntheticDeployment deployment_from_json(const nlohmann::json& doc);

FlowScenario flow_scenario_from_json(const nlohmann::json& doc);

}  // namespace acdn
