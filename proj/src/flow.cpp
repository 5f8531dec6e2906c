#include "acdn/flow.hpp"

#include <algorithm>
#include <stdexcept>

#include "acdn/detail/text.hpp"
#include "acdn/error.hpp"

namespace acdn {

using detail::fixed;
using detail::parse_number;

const char* to_string(L7Protocol p) {
    switch (p) {
        case L7Protocol::http: return "HTTP";
        case L7Protocol::tls: return "TLS";
        case L7Protocol::other: return "OTHER";
    }
    return "OTHER";
}

std::optional<L7Protocol> l7_from_string(std::string_view s) {
    if (s == "HTTP") return L7Protocol::http;
    if (s == "TLS") return L7Protocol::tls;
    if (s == "OTHER") return L7Protocol::other;
    return std::nullopt;
}

namespace {

bool valid_token(std::string_view s) {
    return !s.empty() && std::none_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n'; });
}

std::optional<std::string> check_client_id(std::string_view id) {
    if (!valid_token(id) || id == "-") return "invalid client_id";
    if (Ipv4Addr::parse(id)) return "raw client address rejected; client_id must be an anonymized token";
    return std::nullopt;
}

}  // namespace

std::string format_flow_line(const FlowRecord& f) {
    std::string out;
    out.reserve(128);
    out += fixed(f.ts_start);
    out += ' ';
    out += fixed(f.ts_end);
    out += ' ';
    out += f.client_id;
    out += ' ';
    out += f.server_ip.to_string();
    out += ' ';
    out += std::to_string(f.server_port);
    out += ' ';
    out += to_string(f.l7);
    out += ' ';
    out += std::to_string(f.bytes_down);
    out += ' ';
    out += fixed(f.min_rtt_ms);
    out += ' ';
    out += std::to_string(f.min_ttl);
    out += ' ';
    out += fixed(f.ttfb_ms);
    out += ' ';
    out += f.fqdn ? *f.fqdn : "-";
    return out;
}

std::variant<FlowRecord, std::string> parse_flow_line(std::string_view line) {
    const auto t = detail::split_ws(line);
    if (t.size() != 10 && t.size() != 11)
        return "expected 10 or 11 fields, got " + std::to_string(t.size());
    FlowRecord f;
    auto ts_start = parse_number<double>(t[0]);
    auto ts_end = parse_number<double>(t[1]);
    if (!ts_start || !ts_end) return std::string("invalid timestamp");
    if (*ts_end < *ts_start) return std::string("ts_end before ts_start");
    f.ts_start = *ts_start;
    f.ts_end = *ts_end;
    if (auto err = check_client_id(t[2])) return *err;
    f.client_id = std::string(t[2]);
    auto ip = Ipv4Addr::parse(t[3]);
    if (!ip) return "invalid server_ip '" + std::string(t[3]) + "'";
    f.server_ip = *ip;
    auto port = parse_number<std::uint16_t>(t[4]);
    if (!port) return std::string("invalid server_port");
    f.server_port = *port;
    auto l7 = l7_from_string(t[5]);
    if (!l7) return "unknown l7 label '" + std::string(t[5]) + "'";
    f.l7 = *l7;
    auto bytes = parse_number<std::uint64_t>(t[6]);
    if (!bytes) return std::string("invalid bytes_down");
    f.bytes_down = *bytes;
    auto rtt = parse_number<double>(t[7]);
    if (!rtt || *rtt < 0.0) return std::string("invalid min_rtt_ms");
    f.min_rtt_ms = *rtt;
    auto ttl = parse_number<int>(t[8]);
    if (!ttl || *ttl < 1 || *ttl > 255) return std::string("min_ttl outside 1..255");
    f.min_ttl = *ttl;
    auto ttfb = parse_number<double>(t[9]);
    if (!ttfb || *ttfb < 0.0) return std::string("invalid ttfb_ms");
    f.ttfb_ms = *ttfb;
    if (t.size() == 11 && t[10] != "-") f.fqdn = std::string(t[10]);
    return f;
}

FlowLogReader::FlowLogReader(std::istream& in, double reorder_window_s)
    : in_(in), reorder_window_s_(reorder_window_s) {
    if (!in_) throw DataError("flow log stream is not readable");
}

std::optional<FlowItem> FlowLogReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_no_;
        if (detail::skippable_line(line)) continue;
        auto parsed = parse_flow_line(line);
        if (auto* msg = std::get_if<std::string>(&parsed)) return ParseError{line_no_, *msg, line};
        auto& f = std::get<FlowRecord>(parsed);
        if (latest_start_ && f.ts_start < *latest_start_ - reorder_window_s_)
            return ParseError{line_no_, "flow starts outside the reordering window", line};
        latest_start_ = latest_start_ ? std::max(*latest_start_, f.ts_start) : f.ts_start;
        return std::move(f);
    }
    if (in_.bad()) throw DataError("read error on flow log");
    return std::nullopt;
}

ParsedFlows parse_flow_log(std::istream& in, double reorder_window_s) {
    ParsedFlows out;
    FlowLogReader reader(in, reorder_window_s);
    while (auto item = reader.next()) {
        if (auto* f = std::get_if<FlowRecord>(&*item))
            out.flows.push_back(std::move(*f));
        else
            out.errors.push_back(std::get<ParseError>(std::move(*item)));
    }
    return out;
}

std::string format_dns_line(const DnsObservation& obs) {
    std::string out = fixed(obs.ts) + ' ' + obs.client_id + ' ' + obs.fqdn + ' ';
    for (std::size_t i = 0; i < obs.answers.size(); ++i) {
        if (i) out += ',';
        out += obs.answers[i].to_string();
    }
    return out;
}

std::variant<DnsObservation, std::string> parse_dns_line(std::string_view line) {
    const auto t = detail::split_ws(line);
    if (t.size() != 4) return "expected 4 fields, got " + std::to_string(t.size());
    DnsObservation obs;
    auto ts = parse_number<double>(t[0]);
    if (!ts) return std::string("invalid timestamp");
    obs.ts = *ts;
    if (auto err = check_client_id(t[1])) return *err;
    obs.client_id = std::string(t[1]);
    obs.fqdn = std::string(t[2]);
    for (auto a : detail::split(t[3], ',')) {
        auto ip = Ipv4Addr::parse(a);
        if (!ip) return "invalid answer '" + std::string(a) + "'";
        obs.answers.push_back(*ip);
    }
    return obs;
}

ParsedDns parse_dns_log(std::istream& in) {
    if (!in) throw DataError("DNS log stream is not readable");
    ParsedDns out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (detail::skippable_line(line)) continue;
        auto parsed = parse_dns_line(line);
        if (auto* msg = std::get_if<std::string>(&parsed))
            out.errors.push_back({no, *msg, line});
        else
            out.observations.push_back(std::get<DnsObservation>(std::move(parsed)));
    }
    if (in.bad()) throw DataError("read error on DNS log");
    return out;
}

std::size_t DnsCache::KeyHash::operator()(const std::pair<std::string, Ipv4Addr>& k) const noexcept {
    return std::hash<std::string>{}(k.first) * 31u ^ std::hash<Ipv4Addr>{}(k.second);
}

DnsCache::DnsCache(std::size_t capacity, double ttl_s) : capacity_(capacity), ttl_s_(ttl_s) {
    if (capacity_ == 0) throw std::invalid_argument("DnsCache capacity must be positive");
    if (!(ttl_s_ > 0.0)) throw std::invalid_argument("DnsCache ttl must be positive");
}

void DnsCache::observe(const DnsObservation& obs) {
    for (Ipv4Addr ip : obs.answers) {
        auto key = std::make_pair(obs.client_id, ip);
        if (auto it = index_.find(key); it != index_.end()) {
            if (obs.ts < it->second->observed_ts) continue;  // stale replay
            it->second->fqdn = obs.fqdn;
            it->second->observed_ts = obs.ts;
            lru_.splice(lru_.begin(), lru_, it->second);
            continue;
        }
        if (index_.size() >= capacity_) {
            const Entry& victim = lru_.back();
            index_.erase({victim.client_id, victim.server});
            lru_.pop_back();
        }
        lru_.push_front({obs.client_id, ip, obs.fqdn, obs.ts});
        index_.emplace(std::move(key), lru_.begin());
    }
}

std::optional<std::string> DnsCache::lookup(const std::string& client_id, Ipv4Addr server, double at_ts) {
    auto it = index_.find({client_id, server});
    if (it == index_.end()) return std::nullopt;
    const Entry& e = *it->second;
    if (e.observed_ts > at_ts || at_ts - e.observed_ts > ttl_s_) return std::nullopt;
    lru_.splice(lru_.begin(), lru_, it->second);
    return e.fqdn;
}

FlowRecord annotate_flow(DnsCache& cache, FlowRecord f) {
    if (f.fqdn) return f;
    f.fqdn = cache.lookup(f.client_id, f.server_ip, f.ts_start);
    return f;
}

std::vector<FlowRecord> annotate_stream(std::span<const FlowRecord> flows,
                                        std::span<const DnsObservation> observations, DnsCache& cache) {
    std::vector<std::size_t> obs_order(observations.size());
    for (std::size_t i = 0; i < obs_order.size(); ++i) obs_order[i] = i;
    std::stable_sort(obs_order.begin(), obs_order.end(),
                     [&](std::size_t a, std::size_t b) { return observations[a].ts < observations[b].ts; });
    std::vector<std::size_t> flow_order(flows.size());
    for (std::size_t i = 0; i < flow_order.size(); ++i) flow_order[i] = i;
    std::stable_sort(flow_order.begin(), flow_order.end(),
                     [&](std::size_t a, std::size_t b) { return flows[a].ts_start < flows[b].ts_start; });

    std::vector<FlowRecord> out(flows.begin(), flows.end());
    std::size_t o = 0;
    for (std::size_t idx : flow_order) {
        while (o < obs_order.size() && observations[obs_order[o]].ts <= flows[idx].ts_start)
            cache.observe(observations[obs_order[o++]]);
        out[idx] = annotate_flow(cache, std::move(out[idx]));
    }
    return out;
}

std::vector<FlowRecord> filter_anycast_flows(std::span<const FlowRecord> flows, const std::set<Slash24>& anycast) {
    if (anycast.empty()) throw std::invalid_argument("anycast /24 set is empty");
    std::vector<FlowRecord> out;
    for (const auto& f : flows)
        if (anycast.count(slash24_of(f.server_ip))) out.push_back(f);
    return out;
}

}  // namespace acdn
