#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hagsim/event_queue.hpp"
#include "hagsim/lia.hpp"
#include "hagsim/packet.hpp"
#include "hagsim/topology.hpp"

namespace hagsim {

enum class SubflowPhase : std::uint8_t { slow_start, congestion_avoidance, recovery };
enum class SubflowPriority : std::uint8_t { normal, backup };
enum class AdvertiseMode : std::uint8_t { standard, fast };
enum class LossKind : std::uint8_t { triple_dupack, rto };

struct TransportOptions {
    std::uint32_t mss = 1440;               // payload bytes per 1500-byte frame
    std::uint32_t initial_cwnd_mss = 10;
    SimTime rto_floor = SimTime::ms(200);
    SimTime handshake_retry = SimTime::sec(1);
};

struct SubflowSnapshot {
    int id = -1;
    std::string access_id;
    SubflowPriority priority = SubflowPriority::normal;
    bool established = false;
    double cwnd = 0;
    double ssthresh = 0;
    SimTime srtt;
    SimTime rto;
    std::uint64_t inflight = 0;
    SubflowPhase phase = SubflowPhase::slow_start;
};

// Multipath reliable transport: per-subflow Reno-style AIMD coupled across
// subflows with the linked-increases factor, connection-level sequencing
// with in-order delivery, a minRTT scheduler, and subflow establishment
// with standard or fast address advertisement.
//
// One Connection object models both endpoints of the flow; packets still
// traverse the real link models, so capacity, queueing, loss and failure
// all apply. Each byte-stream direction has its own congestion state.
class Connection {
public:
    // (dir, newly delivered prefix length) whenever in-order bytes reach the app
    using DeliverCb = std::function<void(StreamDir, std::uint64_t)>;
    using EstablishedCb = std::function<void(int subflow_id)>;
    // (dir, subflow, event, acked_bytes, cwnd_after, phase_after):
    // "ack" | "dupack" | "rto"
    using CwndObserver = std::function<void(StreamDir, int, const char*, std::uint64_t,
                                            double, SubflowPhase)>;
    // monitoring tap: (access_id, acked_payload, rtt_sample_us (0 = none), losses)
    using AckObserver =
        std::function<void(const std::string&, std::uint64_t, std::uint64_t, std::uint32_t)>;

    Connection(EventQueue& ev, Topology& topo, std::uint64_t flow_id,
               TransportOptions opt, AdvertiseMode adv)
        : ev_(ev), topo_(topo), flow_id_(flow_id), opt_(opt), advertise_(adv) {
        if (adv == AdvertiseMode::fast && !topo.has_atsss())
            throw std::invalid_argument(
                "fast address advertisement requires the converged-core topology");
    }

    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;

    // Subflow order matters: the first added subflow is the primary used for
    // the initial handshake and address advertisement.
    int add_subflow(const std::string& access_id) {
        const int id = static_cast<int>(subflows_.size());
        auto sf = std::make_unique<Subflow>();
        sf->id = id;
        sf->access_id = access_id;
        for (auto& cc : sf->cc) {
            cc.cwnd = static_cast<double>(opt_.initial_cwnd_mss) * opt_.mss;
            cc.ssthresh = kInfiniteWindow;
            cc.rto = opt_.rto_floor;
        }
        subflows_.push_back(std::move(sf));
        return id;
    }

    std::uint64_t flow_id() const { return flow_id_; }
    std::size_t subflow_count() const { return subflows_.size(); }
    AdvertiseMode advertise_mode() const { return advertise_; }

    // ------------------------------------------------------------------
    // Establishment
    // ------------------------------------------------------------------

    // Standard mode: primary runs a 1-RTT handshake; the second address is
    // advertised on the primary afterwards, then each secondary runs its own
    // 1-RTT join. Fast mode: every handshake starts immediately in parallel
    // (the converged core already knows the available accesses).
    void establish() {
        if (subflows_.empty()) throw std::logic_error("no subflows to establish");
        if (advertise_ == AdvertiseMode::fast) {
            for (auto& sf : subflows_) send_syn(*sf);
        } else {
            send_syn(*subflows_[0]);
        }
        arm_handshake_retry();
    }

    bool subflow_established(int id) const { return subflows_.at(id)->established; }
    int established_count() const {
        int n = 0;
        for (const auto& sf : subflows_)
            if (sf->established) ++n;
        return n;
    }

    void set_on_established(EstablishedCb cb) { on_established_ = std::move(cb); }
    void set_on_delivered(DeliverCb cb) { on_delivered_ = std::move(cb); }
    void set_cwnd_observer(CwndObserver cb) { cwnd_observer_ = std::move(cb); }
    void set_ack_observer(AckObserver cb) { ack_observer_ = std::move(cb); }

    // ------------------------------------------------------------------
    // Application surface
    // ------------------------------------------------------------------

    // Submits bytes to one direction of the stream. Segments never span
    // submissions, so the packet kind flag stays accurate per message.
    void submit(StreamDir dir, PacketKind kind, std::uint64_t bytes) {
        if (bytes == 0) return;
        auto& d = dirs_[idx(dir)];
        d.chunks.push_back(Chunk{kind, bytes});
        d.submitted += bytes;
        try_send(dir);
    }

    std::uint64_t delivered(StreamDir dir) const { return dirs_[idx(dir)].delivered; }
    std::uint64_t submitted(StreamDir dir) const { return dirs_[idx(dir)].submitted; }

    SubflowPriority set_subflow_priority(int id, SubflowPriority p) {
        auto& sf = *subflows_.at(id);
        const SubflowPriority prev = sf.priority;
        sf.priority = p;
        if (p == SubflowPriority::normal) {
            try_send(StreamDir::client_to_server);
            try_send(StreamDir::server_to_client);
        }
        return prev;
    }
    SubflowPriority subflow_priority(int id) const { return subflows_.at(id)->priority; }

    const std::string& subflow_access(int id) const { return subflows_.at(id)->access_id; }

    SubflowSnapshot snapshot(StreamDir dir, int id) const {
        const auto& sf = *subflows_.at(id);
        const auto& cc = sf.cc[idx(dir)];
        return SubflowSnapshot{sf.id,     sf.access_id, sf.priority, sf.established,
                               cc.cwnd,   cc.ssthresh,  cc.srtt,     cc.rto,
                               cc.inflight, cc.phase};
    }

    // minRTT scheduler: among normal-priority, established subflows on a
    // live access with window space, the smallest srtt wins; backups are
    // considered only when no normal subflow qualifies. -1 = sender blocked.
    int pick_subflow(StreamDir dir) const {
        int best = pick_among(dir, SubflowPriority::normal);
        if (best < 0) best = pick_among(dir, SubflowPriority::backup);
        return best;
    }

    // Called by the wiring layer for every packet delivered by a link.
    void on_packet(const Packet& pkt) {
        switch (pkt.kind) {
            case PacketKind::handshake: on_handshake(pkt); break;
            case PacketKind::control: on_control(pkt); break;
            case PacketKind::ack: on_ack_packet(pkt); break;
            case PacketKind::data:
            case PacketKind::setup: on_receive(pkt); break;
        }
    }

    // Coupled increase factor over the qualifying subflow set of one
    // direction (normal priority, not in recovery, srtt established); the
    // probing subflow always participates so the cap stays meaningful.
    double coupled_alpha(StreamDir dir, int self) const {
        std::vector<LiaTerm> terms = qualifying_terms(dir, self);
        return lia_alpha(terms);
    }

    double coupled_total_cwnd(StreamDir dir, int self) const {
        double total = 0;
        for (const auto& t : qualifying_terms(dir, self)) total += t.cwnd_bytes;
        return total;
    }

private:
    static constexpr double kInfiniteWindow = 1e18;

    struct SegmentMeta {
        std::uint64_t conn_seq;
        std::uint32_t payload;
        PacketKind kind;
        SimTime sent_at;
        bool retransmit;
        int later_acks = 0;
    };

    struct RtxRange {
        std::uint64_t conn_seq;
        std::uint32_t payload;
        PacketKind kind;
    };

    struct Chunk {
        PacketKind kind;
        std::uint64_t remaining;
    };

    // Per-(direction, subflow) congestion and sequencing state.
    struct CcState {
        double cwnd = 0;
        double ssthresh = kInfiniteWindow;
        SimTime srtt = SimTime::zero();
        SimTime rttvar = SimTime::zero();
        SimTime rto = SimTime::ms(200);
        std::uint64_t inflight = 0;
        SubflowPhase phase = SubflowPhase::slow_start;
        std::uint64_t next_sf_seq = 0;
        std::uint64_t recovery_exit = 0;
        std::uint64_t last_conn_ack = 0; // connection-level ack seen on this subflow
        std::map<std::uint64_t, SegmentMeta> outstanding; // by sf_seq
        std::deque<RtxRange> rtx_queue;                   // fast retransmits, same subflow
        EventId rto_timer = 0;
    };

    struct Subflow {
        int id = -1;
        std::string access_id;
        SubflowPriority priority = SubflowPriority::normal;
        bool established = false;
        bool join_pending = false;
        SimTime syn_sent_at = SimTime::zero();
        CcState cc[2];
    };

    struct Direction {
        std::deque<Chunk> chunks;
        std::uint64_t next_conn_seq = 0;
        std::uint64_t submitted = 0;
        std::deque<RtxRange> reinject; // eligible on ANY subflow after an RTO

        // receiver side
        std::uint64_t delivered = 0;
        std::map<std::uint64_t, std::uint64_t> ooo; // start -> end, disjoint
    };

    static std::size_t idx(StreamDir d) { return static_cast<std::size_t>(d); }

    Link& wire_link(const Subflow& sf, StreamDir wire_dir) {
        return topo_.access(sf.access_id).link(wire_dir);
    }

    // --- establishment -------------------------------------------------

    enum Ctrl : std::uint8_t { kSyn = 1, kSynAck = 2, kAddAddr = 3, kJoinSyn = 4, kJoinSynAck = 5 };

    Packet make_ctrl(const Subflow& sf, PacketKind kind, std::uint8_t ctrl) {
        Packet p;
        p.flow_id = flow_id_;
        p.subflow_id = sf.id;
        p.kind = kind;
        p.ctrl = ctrl;
        p.size_bytes = kHeaderBytes;
        p.sent_at = ev_.now();
        return p;
    }

    void send_syn(Subflow& sf) {
        if (sf.established) return;
        sf.syn_sent_at = ev_.now();
        Packet p = make_ctrl(sf, PacketKind::handshake, kSyn);
        p.dir = StreamDir::client_to_server;
        wire_link(sf, StreamDir::client_to_server).enqueue(p, ev_.now());
    }

    void send_join_syn(Subflow& sf) {
        if (sf.established) return;
        sf.join_pending = true;
        sf.syn_sent_at = ev_.now();
        Packet p = make_ctrl(sf, PacketKind::handshake, kJoinSyn);
        p.dir = StreamDir::server_to_client;
        wire_link(sf, StreamDir::server_to_client).enqueue(p, ev_.now());
    }

    void send_add_addr() {
        Subflow& primary = *subflows_[0];
        if (!primary.established) return;
        Packet p = make_ctrl(primary, PacketKind::control, kAddAddr);
        p.dir = StreamDir::client_to_server;
        wire_link(primary, StreamDir::client_to_server).enqueue(p, ev_.now());
    }

    void on_handshake(const Packet& pkt) {
        Subflow& sf = *subflows_.at(pkt.subflow_id);
        switch (pkt.ctrl) {
            case kSyn: {
                Packet r = make_ctrl(sf, PacketKind::handshake, kSynAck);
                r.dir = StreamDir::server_to_client;
                r.echo_sent_at = pkt.sent_at;
                wire_link(sf, StreamDir::server_to_client).enqueue(r, ev_.now());
                break;
            }
            case kJoinSyn: {
                Packet r = make_ctrl(sf, PacketKind::handshake, kJoinSynAck);
                r.dir = StreamDir::client_to_server;
                r.echo_sent_at = pkt.sent_at;
                wire_link(sf, StreamDir::client_to_server).enqueue(r, ev_.now());
                break;
            }
            case kSynAck:
            case kJoinSynAck: mark_established(sf, pkt.echo_sent_at); break;
            default: break;
        }
    }

    void on_control(const Packet& pkt) {
        if (pkt.ctrl != kAddAddr) return;
        // Peer learned the remaining addresses; joins run on their own paths.
        for (std::size_t i = 1; i < subflows_.size(); ++i) {
            Subflow& sf = *subflows_[i];
            if (!sf.established && !sf.join_pending) send_join_syn(sf);
        }
    }

    void mark_established(Subflow& sf, SimTime syn_sent) {
        if (sf.established) return;
        sf.established = true;
        sf.join_pending = false;
        const SimTime sample = ev_.now() - syn_sent;
        for (auto& cc : sf.cc) seed_rtt(cc, sample);
        if (advertise_ == AdvertiseMode::standard && sf.id == 0 && subflows_.size() > 1)
            send_add_addr();
        if (on_established_) on_established_(sf.id);
        try_send(StreamDir::client_to_server);
        try_send(StreamDir::server_to_client);
    }

    void arm_handshake_retry() {
        ev_.schedule(ev_.now() + opt_.handshake_retry, [this] {
            bool any_missing = false;
            for (auto& sf : subflows_)
                if (!sf->established) any_missing = true;
            if (!any_missing) return;
            if (advertise_ == AdvertiseMode::fast) {
                for (auto& sf : subflows_) send_syn(*sf);
            } else if (!subflows_[0]->established) {
                send_syn(*subflows_[0]);
            } else {
                send_add_addr();
                for (std::size_t i = 1; i < subflows_.size(); ++i)
                    subflows_[i]->join_pending = false; // allow join re-issue
            }
            arm_handshake_retry();
        });
    }

    // --- RTT estimation (RFC 6298 smoothing, gains 1/8 and 1/4) --------

    void seed_rtt(CcState& cc, SimTime sample) {
        cc.srtt = sample;
        cc.rttvar = SimTime::us(sample.micros / 2);
        update_rto(cc);
    }

    void rtt_sample(CcState& cc, SimTime sample) {
        if (cc.srtt == SimTime::zero()) {
            seed_rtt(cc, sample);
            return;
        }
        const std::int64_t err = static_cast<std::int64_t>(sample.micros) -
                                 static_cast<std::int64_t>(cc.srtt.micros);
        const std::int64_t abs_err = err < 0 ? -err : err;
        cc.rttvar = SimTime::us(cc.rttvar.micros - cc.rttvar.micros / 4 +
                                static_cast<std::uint64_t>(abs_err) / 4);
        cc.srtt = SimTime::us(static_cast<std::uint64_t>(
            static_cast<std::int64_t>(cc.srtt.micros) + err / 8));
        update_rto(cc);
    }

    void update_rto(CcState& cc) {
        cc.rto = std::max(opt_.rto_floor, cc.srtt + SimTime::us(4 * cc.rttvar.micros));
    }

    // --- sending --------------------------------------------------------

    int pick_among(StreamDir dir, SubflowPriority want) const {
        int best = -1;
        SimTime best_srtt = SimTime::zero();
        for (const auto& sf : subflows_) {
            if (sf->priority != want || !sf->established) continue;
            if (!topo_.access_up(sf->access_id)) continue;
            const CcState& cc = sf->cc[idx(dir)];
            if (static_cast<double>(cc.inflight + opt_.mss) > cc.cwnd) continue;
            if (best < 0 || cc.srtt < best_srtt) {
                best = sf->id;
                best_srtt = cc.srtt;
            }
        }
        return best;
    }

    void try_send(StreamDir dir) {
        if (in_try_send_[idx(dir)]) return; // re-entry via synchronous delivery
        in_try_send_[idx(dir)] = true;
        while (true) {
            const int id = pick_subflow(dir);
            if (id < 0) break;
            if (!send_one(dir, *subflows_[id])) break;
        }
        in_try_send_[idx(dir)] = false;
    }

    bool send_one(StreamDir dir, Subflow& sf) {
        Direction& d = dirs_[idx(dir)];
        CcState& cc = sf.cc[idx(dir)];

        RtxRange seg;
        bool retransmit = true;
        if (!cc.rtx_queue.empty()) {
            seg = cc.rtx_queue.front();
            cc.rtx_queue.pop_front();
        } else if (!d.reinject.empty()) {
            seg = d.reinject.front();
            d.reinject.pop_front();
        } else if (!d.chunks.empty()) {
            Chunk& c = d.chunks.front();
            const std::uint32_t n =
                static_cast<std::uint32_t>(std::min<std::uint64_t>(opt_.mss, c.remaining));
            seg = RtxRange{d.next_conn_seq, n, c.kind};
            d.next_conn_seq += n;
            c.remaining -= n;
            if (c.remaining == 0) d.chunks.pop_front();
            retransmit = false;
        } else {
            return false;
        }

        Packet p;
        p.flow_id = flow_id_;
        p.subflow_id = sf.id;
        p.dir = dir;
        p.kind = seg.kind;
        p.conn_seq = seg.conn_seq;
        p.sf_seq = cc.next_sf_seq;
        p.payload_bytes = seg.payload;
        p.size_bytes = seg.payload + kHeaderBytes;
        p.retransmit = retransmit;
        p.sent_at = ev_.now();

        cc.outstanding.emplace(
            p.sf_seq, SegmentMeta{seg.conn_seq, seg.payload, seg.kind, ev_.now(), retransmit});
        cc.next_sf_seq += seg.payload;
        cc.inflight += seg.payload;
        ensure_rto(sf, dir);

        // A rejected enqueue (down link or full local queue) is an ordinary
        // loss: the segment stays outstanding and recovery retransmits it.
        wire_link(sf, dir).enqueue(p, ev_.now());
        return true;
    }

    // RFC 6298 style: a send starts the timer if it is not running; an ack
    // restarts it (or stops it once nothing is outstanding).
    void ensure_rto(Subflow& sf, StreamDir dir) {
        CcState& cc = sf.cc[idx(dir)];
        if (cc.rto_timer) return;
        const int id = sf.id;
        cc.rto_timer =
            ev_.schedule(ev_.now() + cc.rto, [this, id, dir] { on_rto(dir, id); });
    }

    void restart_rto(Subflow& sf, StreamDir dir) {
        CcState& cc = sf.cc[idx(dir)];
        if (cc.rto_timer) {
            ev_.cancel(cc.rto_timer);
            cc.rto_timer = 0;
        }
        if (cc.outstanding.empty() && cc.rtx_queue.empty()) return;
        ensure_rto(sf, dir);
    }

    // --- receiving -------------------------------------------------------

    void on_receive(const Packet& pkt) {
        Direction& d = dirs_[idx(pkt.dir)];
        const std::uint64_t lo = pkt.conn_seq;
        const std::uint64_t hi = pkt.conn_seq + pkt.payload_bytes;
        insert_range(d, lo, hi);
        const std::uint64_t before = d.delivered;
        advance_prefix(d);
        if (d.delivered > before && on_delivered_) on_delivered_(pkt.dir, d.delivered);

        // cumulative connection ack rides every per-segment ack
        Subflow& sf = *subflows_.at(pkt.subflow_id);
        Packet ack;
        ack.flow_id = flow_id_;
        ack.subflow_id = sf.id;
        ack.dir = pkt.dir;
        ack.kind = PacketKind::ack;
        ack.size_bytes = kAckBytes;
        ack.ack_sf_seq = pkt.sf_seq;
        ack.ack_payload = pkt.payload_bytes;
        ack.conn_cum_ack = d.delivered;
        ack.echo_sent_at = pkt.sent_at;
        ack.ack_of_retransmit = pkt.retransmit;
        ack.sent_at = ev_.now();
        wire_link(sf, reverse(pkt.dir)).enqueue(ack, ev_.now());
    }

    void insert_range(Direction& d, std::uint64_t lo, std::uint64_t hi) {
        if (hi <= d.delivered) return; // duplicate, discarded
        lo = std::max(lo, d.delivered);
        // merge [lo, hi) into the disjoint out-of-order set
        auto it = d.ooo.upper_bound(lo);
        if (it != d.ooo.begin()) {
            auto prev = std::prev(it);
            if (prev->second >= lo) {
                lo = prev->first;
                hi = std::max(hi, prev->second);
                it = d.ooo.erase(prev);
            }
        }
        while (it != d.ooo.end() && it->first <= hi) {
            hi = std::max(hi, it->second);
            it = d.ooo.erase(it);
        }
        d.ooo.emplace(lo, hi);
    }

    void advance_prefix(Direction& d) {
        auto it = d.ooo.begin();
        if (it != d.ooo.end() && it->first <= d.delivered) {
            d.delivered = std::max(d.delivered, it->second);
            d.ooo.erase(it);
        }
    }

    // --- ACK processing and loss response -------------------------------

    void on_ack_packet(const Packet& ack) {
        Subflow& sf = *subflows_.at(ack.subflow_id);
        const StreamDir dir = ack.dir;
        CcState& cc = sf.cc[idx(dir)];

        auto it = cc.outstanding.find(ack.ack_sf_seq);
        if (it == cc.outstanding.end()) return; // stale or already declared lost

        const std::uint64_t acked = it->second.payload;
        cc.inflight -= std::min<std::uint64_t>(cc.inflight, acked);
        const bool was_retransmit = it->second.retransmit;
        cc.outstanding.erase(it);

        std::uint64_t rtt_us = 0;
        if (!ack.ack_of_retransmit && !was_retransmit) {
            const SimTime sample = ev_.now() - ack.echo_sent_at;
            rtt_sample(cc, sample);
            rtt_us = sample.micros;
        }

        // Recovery ends only once every pre-halving hole is repaired
        // (nothing below the recovery point outstanding or awaiting
        // retransmission); a straggler loss from the same overflow episode
        // must not halve the window a second time.
        if (cc.phase == SubflowPhase::recovery) {
            const bool pre_loss_pending =
                (!cc.outstanding.empty() &&
                 cc.outstanding.begin()->first < cc.recovery_exit) ||
                !cc.rtx_queue.empty();
            if (!pre_loss_pending && ack.ack_sf_seq >= cc.recovery_exit)
                cc.phase = SubflowPhase::congestion_avoidance;
        }

        // The window grows only on acks that advance the connection-level
        // acknowledgement this subflow has seen. On a single subflow this is
        // the standard rule (only acks moving the cumulative ack count);
        // across subflows it couples each window to the whole connection:
        // while an acknowledgement is missing on another path, the in-order
        // prefix freezes and this subflow's growth stalls with it.
        const bool conn_advanced = ack.conn_cum_ack > cc.last_conn_ack;
        if (conn_advanced) cc.last_conn_ack = ack.conn_cum_ack;
        const std::uint64_t effective_acked = conn_advanced ? acked : 0;

        grow_window(dir, sf, cc, effective_acked);
        if (cwnd_observer_)
            cwnd_observer_(dir, sf.id, "ack", effective_acked, cc.cwnd, cc.phase);

        const std::uint32_t losses = detect_losses(dir, sf, cc, ack.ack_sf_seq);
        if (ack_observer_) ack_observer_(sf.access_id, acked, rtt_us, losses);

        restart_rto(sf, dir);
        try_send(dir);
    }

    void grow_window(StreamDir dir, Subflow& sf, CcState& cc, std::uint64_t acked) {
        if (cc.phase == SubflowPhase::recovery) return;
        if (cc.phase == SubflowPhase::slow_start) {
            cc.cwnd += static_cast<double>(acked);
            if (cc.cwnd >= cc.ssthresh) cc.phase = SubflowPhase::congestion_avoidance;
        } else {
            // coupled congestion avoidance: the increase never exceeds what a
            // standalone connection on this path would take for the same ack
            const double alpha = coupled_alpha(dir, sf.id);
            const double total = coupled_total_cwnd(dir, sf.id);
            const double a = static_cast<double>(acked);
            const double m = static_cast<double>(opt_.mss);
            const double coupled = alpha * a * m / total;
            const double solo = a * m / cc.cwnd;
            cc.cwnd += std::min(coupled, solo);
        }
    }

    std::uint32_t detect_losses(StreamDir dir, Subflow& sf, CcState& cc,
                                std::uint64_t acked_sf_seq) {
        // Every segment older than the acked one has been overtaken once
        // more; three overtakes mark it lost (triple-dupack analogue).
        std::vector<std::uint64_t> lost;
        for (auto& [seq, meta] : cc.outstanding) {
            if (seq >= acked_sf_seq) break;
            if (++meta.later_acks >= 3) lost.push_back(seq);
        }
        if (lost.empty()) return 0;

        for (std::uint64_t seq : lost) {
            auto it = cc.outstanding.find(seq);
            cc.inflight -= std::min<std::uint64_t>(cc.inflight, it->second.payload);
            cc.rtx_queue.push_back(
                RtxRange{it->second.conn_seq, it->second.payload, it->second.kind});
            cc.outstanding.erase(it);
        }
        if (cc.phase != SubflowPhase::recovery) on_loss(dir, sf.id, LossKind::triple_dupack);
        return static_cast<std::uint32_t>(lost.size());
    }

public:
    // Loss response. Triple-dupack halves into recovery; an RTO collapses
    // the window to two segments and re-marks every unacked byte range as
    // sendable on ANY available subflow (reinjection enables failover).
    void on_loss(StreamDir dir, int subflow_id, LossKind kind) {
        Subflow& sf = *subflows_.at(subflow_id);
        CcState& cc = sf.cc[idx(dir)];
        const double floor = 2.0 * opt_.mss;
        cc.ssthresh = std::max(cc.cwnd / 2.0, floor);
        if (kind == LossKind::triple_dupack) {
            cc.cwnd = cc.ssthresh;
            cc.phase = SubflowPhase::recovery;
            cc.recovery_exit = cc.next_sf_seq;
            if (cwnd_observer_) cwnd_observer_(dir, sf.id, "dupack", 0, cc.cwnd, cc.phase);
        } else {
            cc.cwnd = floor;
            cc.phase = SubflowPhase::slow_start;
            Direction& d = dirs_[idx(dir)];
            for (auto& [seq, meta] : cc.outstanding)
                d.reinject.push_back(RtxRange{meta.conn_seq, meta.payload, meta.kind});
            for (auto& r : cc.rtx_queue) d.reinject.push_back(r);
            cc.outstanding.clear();
            cc.rtx_queue.clear();
            cc.inflight = 0;
            if (ack_observer_) ack_observer_(sf.access_id, 0, 0, 1);
            if (cwnd_observer_) cwnd_observer_(dir, sf.id, "rto", 0, cc.cwnd, cc.phase);
        }
    }

private:
    void on_rto(StreamDir dir, int subflow_id) {
        subflows_.at(subflow_id)->cc[idx(dir)].rto_timer = 0;
        on_loss(dir, subflow_id, LossKind::rto);
        try_send(dir);
    }

    std::vector<LiaTerm> qualifying_terms(StreamDir dir, int self) const {
        std::vector<LiaTerm> terms;
        bool self_included = false;
        for (const auto& sf : subflows_) {
            const CcState& cc = sf->cc[idx(dir)];
            if (!sf->established || cc.srtt == SimTime::zero()) continue;
            if (sf->priority != SubflowPriority::normal) continue;
            if (cc.phase == SubflowPhase::recovery) continue;
            terms.push_back(LiaTerm{cc.cwnd, cc.srtt.micros});
            if (sf->id == self) self_included = true;
        }
        if (!self_included && self >= 0) {
            const CcState& cc = subflows_.at(self)->cc[idx(dir)];
            if (cc.srtt != SimTime::zero())
                terms.push_back(LiaTerm{cc.cwnd, cc.srtt.micros});
        }
        return terms;
    }

    EventQueue& ev_;
    Topology& topo_;
    std::uint64_t flow_id_;
    TransportOptions opt_;
    AdvertiseMode advertise_;

    std::vector<std::unique_ptr<Subflow>> subflows_;
    Direction dirs_[2];
    bool in_try_send_[2] = {false, false};

    EstablishedCb on_established_;
    DeliverCb on_delivered_;
    CwndObserver cwnd_observer_;
    AckObserver ack_observer_;
};

} // namespace hagsim
