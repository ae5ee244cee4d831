#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hagsim/trace.hpp"

namespace hagsim {

// Every metric here is a pure function of the trace, so a summary can
// always be recomputed from trace.csv alone.

inline bool is_access_link(const std::string& link, const std::string& access) {
    return link.size() == access.size() + 3 && link.compare(0, access.size(), access) == 0;
}

inline std::string access_of_link(const std::string& link) {
    const auto pos = link.rfind('_');
    return pos == std::string::npos ? link : link.substr(0, pos);
}

// Session setup time for one access: first send of a bulk-data packet on
// either direction of that access, minus the workload trigger. nullopt =
// the link never carried data.
inline std::optional<SimTime> measure_setup_time(const std::vector<TraceRecord>& trace,
                                                 const std::string& access,
                                                 std::uint64_t flow, SimTime start_at) {
    for (const auto& r : trace) {
        if (r.event != TraceEvent::send || r.kind != PacketKind::data) continue;
        if (r.flow != flow) continue;
        if (access_of_link(r.link) != access) continue;
        return r.time - start_at;
    }
    return std::nullopt;
}

struct MetricSeries {
    SimTime interval = SimTime::sec(1);
    std::vector<std::string> accesses;
    // rate_bps[access][i] = delivered payload bits in interval i / interval
    std::map<std::string, std::vector<double>> rate_bps;
    std::vector<double> aggregate_bps;
};

// Per-access delivered payload rate per interval (tcpdump/ifstat style view
// of the wire: retransmissions count, headers do not).
inline MetricSeries sample_link_rate(const std::vector<TraceRecord>& trace,
                                     SimTime interval) {
    MetricSeries series;
    series.interval = interval;
    std::map<std::string, std::map<std::uint64_t, std::uint64_t>> bytes; // access -> bin
    std::uint64_t last_bin = 0;
    for (const auto& r : trace) {
        const std::string access = access_of_link(r.link);
        if (std::find(series.accesses.begin(), series.accesses.end(), access) ==
            series.accesses.end())
            series.accesses.push_back(access);
        if (r.event != TraceEvent::deliver) continue;
        const std::uint64_t payload = record_payload_bytes(r);
        if (payload == 0) continue;
        const std::uint64_t bin = r.time.micros / interval.micros;
        bytes[access][bin] += payload;
        last_bin = std::max(last_bin, bin);
    }
    for (const auto& a : series.accesses) {
        auto& v = series.rate_bps[a];
        v.assign(last_bin + 1, 0.0);
        auto it = bytes.find(a);
        if (it == bytes.end()) continue;
        for (const auto& [bin, b] : it->second)
            v[bin] = static_cast<double>(b) * 8.0 * 1e6 / static_cast<double>(interval.micros);
    }
    series.aggregate_bps.assign(last_bin + 1, 0.0);
    for (const auto& a : series.accesses)
        for (std::size_t i = 0; i < series.aggregate_bps.size(); ++i)
            series.aggregate_bps[i] += series.rate_bps[a][i];
    return series;
}

// Ratio of an access's mean rate under aggregation to the same access's
// standalone mean rate.
inline double utilization_ratio(double fmc_mean_rate, double standalone_mean_rate) {
    return fmc_mean_rate / standalone_mean_rate;
}

// In-order bulk-data progress of one flow direction, reconstructed from
// deliver records exactly the way the receiver reassembles: duplicates do
// not advance the prefix.
class PrefixTracker {
public:
    void add(std::uint64_t lo, std::uint64_t hi) {
        if (hi <= delivered_) return;
        lo = std::max(lo, delivered_);
        auto it = ranges_.upper_bound(lo);
        if (it != ranges_.begin()) {
            auto prev = std::prev(it);
            if (prev->second >= lo) {
                lo = prev->first;
                hi = std::max(hi, prev->second);
                it = ranges_.erase(prev);
            }
        }
        while (it != ranges_.end() && it->first <= hi) {
            hi = std::max(hi, it->second);
            it = ranges_.erase(it);
        }
        ranges_.emplace(lo, hi);
        auto first = ranges_.begin();
        if (first != ranges_.end() && first->first <= delivered_) {
            delivered_ = std::max(delivered_, first->second);
            ranges_.erase(first);
        }
    }
    std::uint64_t delivered() const { return delivered_; }

private:
    std::uint64_t delivered_ = 0;
    std::map<std::uint64_t, std::uint64_t> ranges_;
};

struct SteadyStateRates {
    SimTime t_first_data = SimTime::zero();
    SimTime t_95 = SimTime::zero();
    bool valid = false;
    std::map<std::string, double> per_access_bps;
    double aggregate_bps = 0.0;
};

// Mean rates over the steady-state region: from the first bulk-data packet
// to the instant the in-order prefix reaches 95% of the data stream (setup
// and the final tail are excluded, as the testbed averages would be).
inline std::uint64_t data_stream_base(const std::vector<TraceRecord>& trace,
                                      std::uint64_t flow) {
    std::uint64_t base = ~0ull;
    for (const auto& r : trace)
        if (r.flow == flow && r.kind == PacketKind::data)
            base = std::min(base, r.conn_seq);
    return base;
}

inline SteadyStateRates steady_state_rates(const std::vector<TraceRecord>& trace,
                                           std::uint64_t flow,
                                           std::uint64_t data_stream_bytes) {
    SteadyStateRates out;
    std::optional<SimTime> first;
    std::optional<SimTime> t95;
    const std::uint64_t data_base = data_stream_base(trace, flow);

    // Deliveries of kind=data packets at the receiving endpoint carry the
    // conn-level byte range; the prefix tracker mirrors reassembly.
    PrefixTracker prefix;
    const std::uint64_t target = data_stream_bytes - data_stream_bytes / 20; // 95%
    for (const auto& r : trace) {
        if (r.flow != flow || r.kind != PacketKind::data) continue;
        if (r.event == TraceEvent::send && !first) first = r.time;
        if (r.event != TraceEvent::deliver) continue;
        const std::uint64_t payload = record_payload_bytes(r);
        if (payload == 0) continue;
        prefix.add(r.conn_seq - data_base, r.conn_seq - data_base + payload);
        if (!t95 && prefix.delivered() >= target) t95 = r.time;
    }
    if (!first || !t95 || t95->micros <= first->micros) return out;

    out.t_first_data = *first;
    out.t_95 = *t95;
    out.valid = true;
    const double dur_s = (t95->micros - first->micros) * 1e-6;
    std::map<std::string, std::uint64_t> bytes;
    for (const auto& r : trace) {
        if (r.flow != flow || r.kind != PacketKind::data) continue;
        if (r.event != TraceEvent::deliver) continue;
        if (r.time < *first || r.time > *t95) continue;
        bytes[access_of_link(r.link)] += record_payload_bytes(r);
    }
    for (const auto& [access, b] : bytes) {
        const double bps = static_cast<double>(b) * 8.0 / dur_s;
        out.per_access_bps[access] = bps;
        out.aggregate_bps += bps;
    }
    return out;
}

// Completion reconstructed from the trace: the time at which the in-order
// data prefix first covers the transfer. nullopt = incomplete at t_end.
inline std::optional<SimTime> completion_from_trace(const std::vector<TraceRecord>& trace,
                                                    std::uint64_t flow,
                                                    std::uint64_t transfer_bytes) {
    PrefixTracker prefix;
    const std::uint64_t data_base = data_stream_base(trace, flow);
    for (const auto& r : trace) {
        if (r.flow != flow || r.kind != PacketKind::data) continue;
        if (r.event != TraceEvent::deliver) continue;
        const std::uint64_t payload = record_payload_bytes(r);
        if (payload == 0) continue;
        prefix.add(r.conn_seq - data_base, r.conn_seq - data_base + payload);
        if (prefix.delivered() >= transfer_bytes) return r.time;
    }
    return std::nullopt;
}

struct DropCounts {
    std::map<std::string, std::uint64_t> per_link;
    std::uint64_t total = 0;
};

inline DropCounts count_drops(const std::vector<TraceRecord>& trace) {
    DropCounts d;
    for (const auto& r : trace) {
        if (r.event != TraceEvent::drop) continue;
        d.per_link[r.link]++;
        d.total++;
    }
    return d;
}

} // namespace hagsim
