#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>

#include "hagsim/event_queue.hpp"
#include "hagsim/packet.hpp"
#include "hagsim/rng.hpp"
#include "hagsim/trace.hpp"

namespace hagsim {

struct LinkSpec {
    std::uint64_t rate_bps = 0;
    SimTime owd = SimTime::zero(); // one-way propagation delay
    std::uint64_t queue_cap_bytes = 0;
    double loss_prob = 0.0;
    bool up = true;
};

struct QueueState {
    std::uint64_t occupied_bytes = 0;
    SimTime busy_until = SimTime::zero(); // transmitter free time
};

// ceil(size_bytes * 8 / rate_bps) in microseconds (store-and-forward).
inline SimTime serialization_delay(std::uint64_t size_bytes, std::uint64_t rate_bps) {
    const std::uint64_t bit_us = size_bytes * 8u * 1000000u;
    return SimTime::us((bit_us + rate_bps - 1) / rate_bps);
}

// One unidirectional access-network path segment: drop-tail queue in front
// of a fixed-rate transmitter, propagation delay, optional random loss, and
// a fixed pass-through delay for the core nodes behind it (BNG/PGW/HAG/UPF).
class Link {
public:
    using DeliverFn = std::function<void(const Packet&)>;

    Link(EventQueue& ev, TraceLog& trace, std::string id, LinkSpec spec,
         SimTime node_delay, RngStream loss_rng)
        : ev_(ev),
          trace_(trace),
          id_(std::move(id)),
          spec_(spec),
          node_delay_(node_delay),
          loss_rng_(std::move(loss_rng)) {}

    Link(const Link&) = delete;
    Link& operator=(const Link&) = delete;

    const std::string& id() const { return id_; }
    const LinkSpec& spec() const { return spec_; }
    const QueueState& queue() const { return queue_; }
    bool is_up() const { return spec_.up; }
    void set_deliver(DeliverFn fn) { deliver_ = std::move(fn); }

    // Accepts the packet into the drop-tail queue and schedules its
    // delivery at max(now, busy_until) + serialization + owd + node delay.
    // Random loss is drawn at acceptance and takes effect after
    // serialization (wire loss, not queue loss). Returns false on rejection
    // (link down or queue full); every outcome is logged to the trace.
    bool enqueue(const Packet& pkt, SimTime now) {
        if (!spec_.up) {
            trace_.log(now, id_, TraceEvent::drop, pkt);
            rejected_packets_++;
            return false;
        }
        if (queue_.occupied_bytes + pkt.size_bytes > spec_.queue_cap_bytes) {
            trace_.log(now, id_, TraceEvent::drop, pkt);
            rejected_packets_++;
            return false;
        }

        trace_.log(now, id_, TraceEvent::send, pkt);
        queue_.occupied_bytes += pkt.size_bytes;
        accepted_bytes_ += pkt.size_bytes;
        accepted_packets_++;

        const SimTime start = std::max(now, queue_.busy_until);
        const SimTime ser_end = start + serialization_delay(pkt.size_bytes, spec_.rate_bps);
        queue_.busy_until = ser_end;

        const bool lost = spec_.loss_prob > 0.0 && loss_rng_.uniform() < spec_.loss_prob;

        const std::uint64_t key = next_key_++;
        Pending& slot = pending_[key];
        slot.pkt = pkt;
        slot.departure = ev_.schedule(ser_end, [this, key] { on_departure(key); });
        if (!lost) {
            slot.arrival = ev_.schedule(ser_end + spec_.owd + node_delay_,
                                        [this, key] { on_arrival(key); });
        }
        return true;
    }

    // Down drops everything queued or in flight on this link and rejects new
    // enqueues; up restores service with an empty queue. Returns the
    // previous state.
    bool set_state(bool up, SimTime now) {
        const bool prev = spec_.up;
        spec_.up = up;
        if (!up && prev) {
            for (auto& [key, slot] : pending_) {
                ev_.cancel(slot.departure);
                if (slot.arrival) ev_.cancel(slot.arrival);
                trace_.log(now, id_, TraceEvent::drop, slot.pkt);
                dropped_bytes_ += slot.pkt.size_bytes;
                dropped_packets_++;
            }
            pending_.clear();
            queue_.occupied_bytes = 0;
            queue_.busy_until = now;
        }
        return prev;
    }

    // Conservation counters: accepted == delivered + dropped + in_flight.
    std::uint64_t accepted_bytes() const { return accepted_bytes_; }
    std::uint64_t delivered_bytes() const { return delivered_bytes_; }
    std::uint64_t dropped_bytes() const { return dropped_bytes_; }
    std::uint64_t in_flight_bytes() const {
        return accepted_bytes_ - delivered_bytes_ - dropped_bytes_;
    }
    std::uint64_t accepted_packets() const { return accepted_packets_; }
    std::uint64_t dropped_packets() const { return dropped_packets_; }
    std::uint64_t rejected_packets() const { return rejected_packets_; }

private:
    struct Pending {
        Packet pkt;
        EventId departure = 0;
        EventId arrival = 0; // 0 when the loss draw consumed the packet
    };

    void on_departure(std::uint64_t key) {
        auto it = pending_.find(key);
        if (it == pending_.end()) return;
        Pending& slot = it->second;
        queue_.occupied_bytes -= slot.pkt.size_bytes;
        slot.departure = 0;
        if (slot.arrival == 0) {
            // lost on the wire after consuming transmitter time
            trace_.log(ev_.now(), id_, TraceEvent::drop, slot.pkt);
            dropped_bytes_ += slot.pkt.size_bytes;
            dropped_packets_++;
            pending_.erase(it);
        }
    }

    void on_arrival(std::uint64_t key) {
        auto it = pending_.find(key);
        if (it == pending_.end()) return;
        Packet pkt = it->second.pkt;
        pending_.erase(it);
        trace_.log(ev_.now(), id_, TraceEvent::deliver, pkt);
        delivered_bytes_ += pkt.size_bytes;
        if (deliver_) deliver_(pkt);
    }

    EventQueue& ev_;
    TraceLog& trace_;
    std::string id_;
    LinkSpec spec_;
    SimTime node_delay_;
    RngStream loss_rng_;
    DeliverFn deliver_;
    QueueState queue_;

    std::map<std::uint64_t, Pending> pending_; // ordered: flush order = accept order
    std::uint64_t next_key_ = 0;

    std::uint64_t accepted_bytes_ = 0;
    std::uint64_t delivered_bytes_ = 0;
    std::uint64_t dropped_bytes_ = 0;
    std::uint64_t accepted_packets_ = 0;
    std::uint64_t dropped_packets_ = 0;
    std::uint64_t rejected_packets_ = 0;
};

} // namespace hagsim
