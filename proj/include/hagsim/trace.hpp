#pragma once

#include <cassert>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hagsim/packet.hpp"
#include "hagsim/sim_time.hpp"

namespace hagsim {

enum class TraceEvent : std::uint8_t { send, deliver, drop };

inline const char* to_string(TraceEvent e) {
    switch (e) {
        case TraceEvent::send: return "send";
        case TraceEvent::deliver: return "deliver";
        case TraceEvent::drop: return "drop";
    }
    return "?";
}

// One packet-level event. The trace is the authoritative record of a run:
// every summary metric is recomputable from it.
struct TraceRecord {
    SimTime time;
    std::string link; // e.g. "fbb_dl"
    TraceEvent event;
    PacketKind kind;
    std::uint32_t size_bytes;
    std::uint64_t flow;
    int subflow;
    std::uint64_t conn_seq;
};

// Wire payload carried by a record; ACK/handshake/control frames are
// headers only.
inline std::uint64_t record_payload_bytes(const TraceRecord& r) {
    if (r.kind == PacketKind::data || r.kind == PacketKind::setup)
        return r.size_bytes > kHeaderBytes ? r.size_bytes - kHeaderBytes : 0;
    return 0;
}

class TraceLog {
public:
    void append(TraceRecord r) {
        assert(records_.empty() || records_.back().time <= r.time);
        records_.push_back(std::move(r));
    }

    void log(SimTime t, const std::string& link, TraceEvent ev, const Packet& p) {
        append(TraceRecord{t, link, ev, p.kind, p.size_bytes, p.flow_id, p.subflow_id,
                           p.conn_seq});
    }

    const std::vector<TraceRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    void clear() { records_.clear(); }

    static constexpr const char* kCsvHeader =
        "time_us,link,event,kind,size_bytes,flow,subflow,conn_seq";

    void write_csv(std::ostream& os) const {
        os << kCsvHeader << '\n';
        for (const auto& r : records_) {
            os << r.time.micros << ',' << r.link << ',' << to_string(r.event) << ','
               << to_string(r.kind) << ',' << r.size_bytes << ',' << r.flow << ','
               << r.subflow << ',' << r.conn_seq << '\n';
        }
    }

    void write_csv_file(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open trace file: " + path);
        write_csv(f);
    }

    static TraceLog parse_csv(std::istream& is) {
        TraceLog log;
        std::string line;
        if (!std::getline(is, line) || line != kCsvHeader)
            throw std::runtime_error("trace csv: bad header");
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            log.records_.push_back(parse_line(line));
        }
        return log;
    }

    static TraceLog parse_csv_file(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open trace file: " + path);
        return parse_csv(f);
    }

private:
    static TraceRecord parse_line(const std::string& line) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
        if (cols.size() != 8) throw std::runtime_error("trace csv: bad row: " + line);
        TraceRecord r;
        r.time = SimTime::us(std::stoull(cols[0]));
        r.link = cols[1];
        r.event = parse_event(cols[2]);
        r.kind = parse_kind(cols[3]);
        r.size_bytes = static_cast<std::uint32_t>(std::stoul(cols[4]));
        r.flow = std::stoull(cols[5]);
        r.subflow = std::stoi(cols[6]);
        r.conn_seq = std::stoull(cols[7]);
        return r;
    }

    static TraceEvent parse_event(const std::string& s) {
        if (s == "send") return TraceEvent::send;
        if (s == "deliver") return TraceEvent::deliver;
        if (s == "drop") return TraceEvent::drop;
        throw std::runtime_error("trace csv: unknown event: " + s);
    }

    static PacketKind parse_kind(const std::string& s) {
        if (s == "handshake") return PacketKind::handshake;
        if (s == "setup") return PacketKind::setup;
        if (s == "data") return PacketKind::data;
        if (s == "ack") return PacketKind::ack;
        if (s == "control") return PacketKind::control;
        throw std::runtime_error("trace csv: unknown kind: " + s);
    }

    std::vector<TraceRecord> records_;
};

} // namespace hagsim
