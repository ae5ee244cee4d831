#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hagsim/sim_time.hpp"

namespace hagsim {

using EventId = std::uint64_t;

// Deterministic discrete-event engine. Events are totally ordered by
// (fire_at, insertion counter); ties at equal fire_at run strictly FIFO so
// a run never depends on queue internals.
class EventQueue {
public:
    EventQueue() = default;
    EventQueue(const EventQueue&) = delete;
    EventQueue& operator=(const EventQueue&) = delete;

    SimTime now() const { return now_; }

    EventId schedule(SimTime at, std::function<void()> action) {
        if (at < now_)
            throw std::logic_error("EventQueue::schedule: fire time is in the past");
        EventId id = next_id_++;
        pending_.insert(id);
        heap_.push(Entry{at, next_seq_++, id, std::move(action)});
        return id;
    }

    // True iff the event existed and had not fired. Unknown or already
    // fired ids return false.
    bool cancel(EventId id) { return pending_.erase(id) > 0; }

    bool is_pending(EventId id) const { return pending_.count(id) > 0; }

    // Processes every event with fire_at <= t_end in order, then leaves the
    // clock at t_end. Handlers may schedule events at the current time;
    // those fire within the same call.
    std::size_t run_until(SimTime t_end) {
        if (t_end < now_)
            throw std::logic_error("EventQueue::run_until: t_end is in the past");
        std::size_t fired = 0;
        while (!heap_.empty() && heap_.top().at <= t_end) {
            Entry e = pop_top();
            if (pending_.erase(e.id) == 0)
                continue; // cancelled
            now_ = e.at;
            e.action();
            ++fired;
        }
        now_ = t_end;
        return fired;
    }

    std::size_t pending_count() const { return pending_.size(); }

private:
    struct Entry {
        SimTime at;
        std::uint64_t seq;
        EventId id;
        std::function<void()> action;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.at != b.at) return b.at < a.at;
            return b.seq < a.seq;
        }
    };

    Entry pop_top() {
        // priority_queue::top() is const; moving out through const_cast is
        // safe here because pop() immediately removes the slot.
        Entry e = std::move(const_cast<Entry&>(heap_.top()));
        heap_.pop();
        return e;
    }

    SimTime now_ = SimTime::zero();
    EventId next_id_ = 1;
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    std::unordered_set<EventId> pending_;
};

} // namespace hagsim
