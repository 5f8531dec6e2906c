#pragma once

#include <cstdint>
#include <istream>
#include <list>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "acdn/ipv4.hpp"

namespace acdn {

enum class L7Protocol { http, tls, other };

const char* to_string(L7Protocol p);
std::optional<L7Protocol> l7_from_string(std::string_view s);

// One TCP flow as logged by a passive probe. Times are UTC seconds.
struct FlowRecord {
    double ts_start = 0.0;
    double ts_end = 0.0;
    std::string client_id;  // opaque anonymized token, never a raw address
    Ipv4Addr server_ip;
    std::uint16_t server_port = 0;
    L7Protocol l7 = L7Protocol::other;
    std::uint64_t bytes_down = 0;
    double min_rtt_ms = 0.0;
    int min_ttl = 64;
    double ttfb_ms = 0.0;
    std::optional<std::string> fqdn;

    friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

// Space-delimited line:
//   ts_start ts_end client_id server_ip server_port l7 bytes_down min_rtt_ms min_ttl ttfb_ms [fqdn]
// with '-' for an absent fqdn. Times and milliseconds carry three decimals.
std::string format_flow_line(const FlowRecord& f);

// Parses one line; on failure returns a message.
std::variant<FlowRecord, std::string> parse_flow_line(std::string_view line);

struct ParseError {
    std::size_t line = 0;
    std::string message;
    std::string text;
};

using FlowItem = std::variant<FlowRecord, ParseError>;

// Streaming reader. Blank lines and '#' comments are skipped; a flow that
// starts more than `reorder_window_s` before the latest start seen so far is
// reported as an error record. Throws DataError if the stream fails.
class FlowLogReader {
public:
    explicit FlowLogReader(std::istream& in, double reorder_window_s = 60.0);

    std::optional<FlowItem> next();

private:
    std::istream& in_;
    double reorder_window_s_;
    std::size_t line_no_ = 0;
    std::optional<double> latest_start_;
};

struct ParsedFlows {
    std::vector<FlowRecord> flows;
    std::vector<ParseError> errors;
};

ParsedFlows parse_flow_log(std::istream& in, double reorder_window_s = 60.0);

struct DnsObservation {
    double ts = 0.0;
    std::string client_id;
    std::string fqdn;
    std::vector<Ipv4Addr> answers;  // at least one

    friend bool operator==(const DnsObservation&, const DnsObservation&) = default;
};

// "ts client_id fqdn ip[,ip...]"
std::string format_dns_line(const DnsObservation& obs);
std::variant<DnsObservation, std::string> parse_dns_line(std::string_view line);

struct ParsedDns {
    std::vector<DnsObservation> observations;
    std::vector<ParseError> errors;
};

ParsedDns parse_dns_log(std::istream& in);

// Bounded (client, server) -> fqdn cache with least-recently-used eviction.
// Newer observations overwrite older ones; entries older than ttl_s or
// observed after the lookup instant are never returned.
class DnsCache {
public:
    explicit DnsCache(std::size_t capacity = 1u << 20, double ttl_s = 86'400.0);

    void observe(const DnsObservation& obs);
    std::optional<std::string> lookup(const std::string& client_id, Ipv4Addr server, double at_ts);

    std::size_t size() const { return index_.size(); }
    std::size_t capacity() const { return capacity_; }
    double ttl_s() const { return ttl_s_; }

private:
    struct Entry {
        std::string client_id;
        Ipv4Addr server;
        std::string fqdn;
        double observed_ts;
    };
    struct KeyHash {
        std::size_t operator()(const std::pair<std::string, Ipv4Addr>& k) const noexcept;
    };
    using Lru = std::list<Entry>;

    std::size_t capacity_;
    double ttl_s_;
    Lru lru_;  // most recent first
    std::unordered_map<std::pair<std::string, Ipv4Addr>, Lru::iterator, KeyHash> index_;
};

// Fills a missing fqdn from the cache; flows that already carry one are
// returned unchanged.
FlowRecord annotate_flow(DnsCache& cache, FlowRecord f);

// Replays observations and flows in timestamp order (observations first on
// ties) and annotates every flow. Output preserves flow order.
std::vector<FlowRecord> annotate_stream(std::span<const FlowRecord> flows,
                                        std::span<const DnsObservation> observations, DnsCache& cache);

// Flows whose server lies in one of the given /24s.
// Throws std::invalid_argument on an empty set.
std::vector<FlowRecord> filter_anycast_flows(std::span<const FlowRecord> flows, const std::set<Slash24>& anycast);

}  // namespace acdn
