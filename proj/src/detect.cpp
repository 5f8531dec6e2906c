#include "acdn/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "acdn/detail/parallel.hpp"
#include "acdn/error.hpp"

namespace acdn {

const char* to_string(Verdict v) { return v == Verdict::anycast ? "anycast" : "unicast"; }

namespace {

struct Sample {
    const PingMeasurement* m;
    LatencyDisk disk;
};

// Validates one target group and returns its samples sorted by vp_id, so
// every later step is independent of input order.
std::vector<Sample> canonical_samples(std::span<const PingMeasurement> ms, const DetectConfig& cfg) {
    if (ms.empty()) throw DataError("no measurements for target");
    const Ipv4Addr target = ms.front().target;
    std::vector<Sample> samples;
    samples.reserve(ms.size());
    for (const auto& m : ms) {
        if (m.target != target)
            throw DataError("mixed targets in one group: " + target.to_string() + " and " +
                            m.target.to_string());
        if (!std::isfinite(m.rtt_ms) || m.rtt_ms < 0.0)
            throw DataError("invalid RTT from vantage point '" + m.vp_id + "'");
        samples.push_back({&m, LatencyDisk(m.vp_location, rtt_to_radius_km(m.rtt_ms, cfg.speed_km_per_ms))});
    }
    std::sort(samples.begin(), samples.end(),
              [](const Sample& a, const Sample& b) { return a.m->vp_id < b.m->vp_id; });
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].m->vp_id == samples[i - 1].m->vp_id)
            throw DataError("duplicate measurement from vantage point '" + samples[i].m->vp_id + "' for " +
                            target.to_string());
    }
    return samples;
}

// First violating pair by (combined radius, vp ids); indices into samples.
std::optional<std::pair<std::size_t, std::size_t>> find_witness(const std::vector<Sample>& samples) {
    std::optional<std::pair<std::size_t, std::size_t>> best;
    double best_sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].disk.covers_sphere()) continue;
        for (std::size_t j = i + 1; j < samples.size(); ++j) {
            const double sum = samples[i].disk.radius_km() + samples[j].disk.radius_km();
            // Pairs are visited in vp_id order, so a strict comparison keeps
            // the lexicographically first pair among equal sums.
            if (best && sum >= best_sum) continue;
            if (disks_disjoint(samples[i].disk, samples[j].disk)) {
                best = {i, j};
                best_sum = sum;
            }
        }
    }
    return best;
}

std::vector<std::size_t> greedy_order(const std::vector<Sample>& samples, GreedyOrder order) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (!samples[i].disk.covers_sphere()) idx.push_back(i);
    if (order == GreedyOrder::smallest_radius) {
        // samples are already in vp_id order; stable sort keeps it as tie-break
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return samples[a].disk.radius_km() < samples[b].disk.radius_km();
        });
    }
    return idx;
}

std::vector<std::size_t> greedy_select(const std::vector<Sample>& samples, GreedyOrder order,
                                       std::vector<std::size_t> selected = {}) {
    for (std::size_t cand : greedy_order(samples, order)) {
        if (std::find(selected.begin(), selected.end(), cand) != selected.end()) continue;
        bool independent = std::all_of(selected.begin(), selected.end(), [&](std::size_t s) {
            return disks_disjoint(samples[s].disk, samples[cand].disk);
        });
        if (independent) selected.push_back(cand);
    }
    return selected;
}

std::vector<AnycastInstance> to_instances(const std::vector<Sample>& samples,
                                          const std::vector<std::size_t>& selected, const DetectConfig& cfg) {
    std::vector<AnycastInstance> out;
    out.reserve(selected.size());
    for (std::size_t s : selected) {
        AnycastInstance inst;
        inst.disk = samples[s].disk;
        inst.witness_vp = samples[s].m->vp_id;
        inst.high_confidence = inst.disk.radius_km() <= cfg.high_confidence_radius_km;
        out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace

DetectionResult detect_anycast(std::span<const PingMeasurement> ms, const DetectConfig& cfg) {
    const auto samples = canonical_samples(ms, cfg);
    DetectionResult r;
    r.target = ms.front().target;
    if (auto w = find_witness(samples)) {
        r.verdict = Verdict::anycast;
        r.witness_pair = std::make_pair(samples[w->first].m->vp_id, samples[w->second].m->vp_id);
        r.num_locations = 2;
    } else {
        r.num_locations = 1;
    }
    return r;
}

std::vector<AnycastInstance> enumerate_instances(std::span<const PingMeasurement> ms, const DetectConfig& cfg) {
    const auto samples = canonical_samples(ms, cfg);
    return to_instances(samples, greedy_select(samples, cfg.order), cfg);
}

AnycastInstance geolocate_instance(AnycastInstance inst, const CityDb& cities, const DetectConfig& cfg) {
    const City* best = nullptr;
    for (const auto& c : cities.entries()) {
        if (!point_in_disk(c.location, inst.disk)) continue;
        if (!best || std::tie(c.population, best->name, best->country) >
                         std::tie(best->population, c.name, c.country))
            best = &c;
    }
    inst.location = best ? std::optional<City>(*best) : std::nullopt;
    inst.high_confidence = inst.disk.radius_km() <= cfg.high_confidence_radius_km;
    return inst;
}

DetectionResult classify_target(std::span<const PingMeasurement> ms, const CityDb* cities,
                                const DetectConfig& cfg) {
    const auto samples = canonical_samples(ms, cfg);
    DetectionResult r;
    r.target = ms.front().target;

    const auto witness = find_witness(samples);
    auto selected = greedy_select(samples, cfg.order);
    if (witness) {
        r.verdict = Verdict::anycast;
        r.witness_pair = std::make_pair(samples[witness->first].m->vp_id, samples[witness->second].m->vp_id);
        // A small disk overlapping both witnesses can leave the plain greedy
        // with a single instance; restart it from the witness pair so the
        // count reflects the proven lower bound of two.
        if (selected.size() < 2) selected = greedy_select(samples, cfg.order, {witness->first, witness->second});
    }
    r.instances = to_instances(samples, selected, cfg);
    if (cities && !cities->empty()) {
        for (auto& inst : r.instances) inst = geolocate_instance(std::move(inst), *cities, cfg);
    }
    r.num_locations = r.instances.size();
    if ((r.verdict == Verdict::anycast) != (r.num_locations >= 2))
        throw InvariantError("verdict and location count disagree for " + r.target.to_string());
    return r;
}

Campaign group_by_target(std::span<const PingMeasurement> ms) {
    Campaign out;
    for (const auto& m : ms) out[m.target].push_back(m);
    return out;
}

BatchOutcome classify_batch(const Campaign& campaign, const CityDb* cities, const DetectConfig& cfg) {
    std::vector<const Campaign::value_type*> groups;
    groups.reserve(campaign.size());
    for (const auto& g : campaign) groups.push_back(&g);

    std::vector<std::optional<DetectionResult>> results(groups.size());
    std::vector<std::string> errors(groups.size());
    detail::parallel_for(groups.size(), cfg.threads, [&](std::size_t i) {
        const auto& [target, ms] = *groups[i];
        try {
            if (!ms.empty() && ms.front().target != target)
                throw DataError("group key does not match measurement target");
            results[i] = classify_target(ms, cities, cfg);
        } catch (const DataError& e) {
            errors[i] = e.what();
        }
    });

    BatchOutcome out;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (results[i])
            out.results.push_back(std::move(*results[i]));
        else
            out.failures.push_back({groups[i]->first, std::move(errors[i])});
    }
    return out;
}

}  // namespace acdn
