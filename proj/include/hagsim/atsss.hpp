#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hagsim/event_queue.hpp"
#include "hagsim/sim_time.hpp"

namespace hagsim {

enum class PolicyMode : std::uint8_t { steer, switch_, split };

inline const char* to_string(PolicyMode m) {
    switch (m) {
        case PolicyMode::steer: return "steer";
        case PolicyMode::switch_: return "switch";
        case PolicyMode::split: return "split";
    }
    return "?";
}

struct AtsssThresholds {
    std::optional<double> min_throughput_bps;
    std::optional<SimTime> max_rtt;
    std::optional<double> max_loss_rate;
};

// Service-class policy: mode, prioritized access list, and the criteria
// that drive switching or splitting.
struct AtsssPolicy {
    std::string service_class;
    PolicyMode mode = PolicyMode::steer;
    std::vector<std::string> access_priority;
    AtsssThresholds thresholds;
    double hysteresis = 0.1;

    void validate() const {
        if (access_priority.empty())
            throw std::invalid_argument("policy '" + service_class +
                                        "': access_priority must be non-empty");
        if (hysteresis < 0.0 || hysteresis >= 1.0)
            throw std::invalid_argument("policy '" + service_class +
                                        "': hysteresis must be in [0,1)");
        if (thresholds.min_throughput_bps && *thresholds.min_throughput_bps < 0)
            throw std::invalid_argument("policy '" + service_class +
                                        "': min_throughput_bps must be nonnegative");
        if (thresholds.max_loss_rate && *thresholds.max_loss_rate < 0)
            throw std::invalid_argument("policy '" + service_class +
                                        "': max_loss_rate must be nonnegative");
    }
};

// Measured per-access conditions over the monitoring window. Metrics with
// no sample yet stay unset and never disqualify an access on their own.
struct AccessState {
    std::string access_id;
    bool up = true;
    std::optional<SimTime> measured_rtt;
    std::optional<double> measured_throughput_bps;
    std::optional<double> measured_loss_rate;
};

inline bool violates_thresholds(const AtsssThresholds& th, const AccessState& st) {
    if (th.max_rtt && st.measured_rtt && *st.measured_rtt > *th.max_rtt) return true;
    if (th.min_throughput_bps && st.measured_throughput_bps &&
        *st.measured_throughput_bps < *th.min_throughput_bps)
        return true;
    if (th.max_loss_rate && st.measured_loss_rate &&
        *st.measured_loss_rate > *th.max_loss_rate)
        return true;
    return false;
}

// Does the access satisfy every threshold with the given relative margin?
// Used for the switch target so decisions have a deadband.
inline bool satisfies_with_margin(const AtsssThresholds& th, const AccessState& st,
                                  double margin) {
    if (!st.up) return false;
    if (th.max_rtt) {
        if (!st.measured_rtt) return true; // unknown metric does not block
        const double limit = static_cast<double>(th.max_rtt->micros) * (1.0 - margin);
        if (static_cast<double>(st.measured_rtt->micros) > limit) return false;
    }
    if (th.min_throughput_bps && st.measured_throughput_bps) {
        if (*st.measured_throughput_bps < *th.min_throughput_bps * (1.0 + margin))
            return false;
    }
    if (th.max_loss_rate && st.measured_loss_rate) {
        if (*st.measured_loss_rate > *th.max_loss_rate * (1.0 - margin)) return false;
    }
    return true;
}

// Access selection for a new flow: the prioritized accesses that are up and
// violate no threshold, best first. Steer/switch callers take the front;
// split mode uses the whole set. Empty result = steering failure.
inline std::vector<std::string> select_access(const AtsssPolicy& policy,
                                              const std::vector<AccessState>& accesses) {
    std::vector<std::string> picked;
    for (const auto& want : policy.access_priority) {
        for (const auto& st : accesses) {
            if (st.access_id != want) continue;
            if (!st.up) break;
            if (violates_thresholds(policy.thresholds, st)) break;
            picked.push_back(want);
            break;
        }
    }
    if (policy.mode != PolicyMode::split && picked.size() > 1) picked.resize(1);
    return picked;
}

// Per-flow sliding-window measurements (bytes acked, rtt samples, losses)
// per access, covering exactly the last W of simulated time.
class FlowMonitor {
public:
    explicit FlowMonitor(SimTime window = SimTime::sec(1)) : window_(window) {}

    SimTime window() const { return window_; }

    void update(const std::string& access_id, SimTime now, std::uint64_t acked_bytes,
                std::uint64_t rtt_sample_us, std::uint32_t losses) {
        auto& w = per_access_[access_id];
        w.samples.push_back(Sample{now, acked_bytes, rtt_sample_us, losses});
        if (first_sample_at_ == SimTime::zero() && !started_) {
            first_sample_at_ = now;
            started_ = true;
        }
        prune(w, now);
    }

    bool has_full_window(SimTime now) const {
        return started_ && now.micros >= first_sample_at_.micros + window_.micros;
    }

    // Window throughput is acked bytes / W; rtt and loss-rate are EWMAs over
    // the windowed samples (gain 1/8).
    AccessState state(const std::string& access_id, bool up, SimTime now) const {
        AccessState st;
        st.access_id = access_id;
        st.up = up;
        auto it = per_access_.find(access_id);
        if (it == per_access_.end()) {
            st.measured_throughput_bps = 0.0;
            return st;
        }
        Window w = it->second; // copy; pruning is by value here
        prune(w, now);
        std::uint64_t bytes = 0;
        double rtt_ewma = 0;
        bool have_rtt = false;
        double loss_ewma = 0;
        bool have_loss_basis = false;
        for (const auto& s : w.samples) {
            bytes += s.acked_bytes;
            if (s.rtt_us > 0) {
                rtt_ewma = have_rtt ? rtt_ewma + (static_cast<double>(s.rtt_us) - rtt_ewma) / 8.0
                                    : static_cast<double>(s.rtt_us);
                have_rtt = true;
            }
            if (s.acked_bytes > 0 || s.losses > 0) {
                const double v = s.losses > 0 ? 1.0 : 0.0;
                loss_ewma = have_loss_basis ? loss_ewma + (v - loss_ewma) / 8.0 : v;
                have_loss_basis = true;
            }
        }
        st.measured_throughput_bps =
            static_cast<double>(bytes) * 8.0 * 1e6 / static_cast<double>(window_.micros);
        if (have_rtt)
            st.measured_rtt = SimTime::us(static_cast<std::uint64_t>(rtt_ewma));
        if (have_loss_basis) st.measured_loss_rate = loss_ewma;
        return st;
    }

private:
    struct Sample {
        SimTime at;
        std::uint64_t acked_bytes;
        std::uint64_t rtt_us;
        std::uint32_t losses;
    };
    struct Window {
        std::deque<Sample> samples;
    };

    void prune(Window& w, SimTime now) const {
        const std::uint64_t horizon =
            now.micros > window_.micros ? now.micros - window_.micros : 0;
        while (!w.samples.empty() && w.samples.front().at.micros < horizon)
            w.samples.pop_front();
    }

    SimTime window_;
    SimTime first_sample_at_ = SimTime::zero();
    bool started_ = false;
    std::map<std::string, Window> per_access_;
};

struct Decision {
    enum class Kind : std::uint8_t { stay, switch_to, start_split, stop_split };
    Kind kind = Kind::stay;
    std::string to;      // switch target
    std::string reason;
};

inline const char* to_string(Decision::Kind k) {
    switch (k) {
        case Decision::Kind::stay: return "stay";
        case Decision::Kind::switch_to: return "switch";
        case Decision::Kind::start_split: return "start_split";
        case Decision::Kind::stop_split: return "stop_split";
    }
    return "?";
}

// Steer/switch/split decision logic for one ongoing flow. Owns the
// violation bookkeeping that turns windowed measurements into decisions:
// a switch needs the current access out of contract for a full window and
// an alternative inside it with margin >= hysteresis; an access loss
// switches immediately. Decisions are rate-limited to one per window.
class FlowPolicyController {
public:
    FlowPolicyController(AtsssPolicy policy, SimTime window)
        : policy_(std::move(policy)), window_(window) {}

    const AtsssPolicy& policy() const { return policy_; }
    const std::string& current_access() const { return current_; }
    bool split_active() const { return split_active_; }

    void activate(const std::string& primary, bool split) {
        current_ = primary;
        split_active_ = split;
    }

    Decision evaluate(const std::vector<AccessState>& accesses, SimTime now) {
        const AccessState* cur = find(accesses, current_);
        if (cur == nullptr) return {};

        // Availability overrides thresholds and the rate limit: failover.
        if (!cur->up) {
            for (const auto& want : policy_.access_priority) {
                const AccessState* alt = find(accesses, want);
                if (alt && alt->up && want != current_ &&
                    !violates_thresholds(policy_.thresholds, *alt)) {
                    return commit_switch(want, now, "access down");
                }
            }
            return {};
        }

        const bool violated = violates_thresholds(policy_.thresholds, *cur);
        if (violated) {
            if (!violating_since_) violating_since_ = now;
        } else {
            violating_since_.reset();
        }

        if (rate_limited(now)) return {};

        if (violated && now.micros >= violating_since_->micros + window_.micros) {
            for (const auto& want : policy_.access_priority) {
                if (want == current_) continue;
                const AccessState* alt = find(accesses, want);
                if (alt && satisfies_with_margin(policy_.thresholds, *alt,
                                                 policy_.hysteresis)) {
                    return commit_switch(want, now, "threshold violation");
                }
            }
        }

        if (policy_.mode == PolicyMode::split) {
            if (!split_active_) {
                for (const auto& want : policy_.access_priority) {
                    if (want == current_) continue;
                    const AccessState* alt = find(accesses, want);
                    if (alt && alt->up &&
                        !violates_thresholds(policy_.thresholds, *alt)) {
                        split_active_ = true;
                        last_decision_at_ = now;
                        return Decision{Decision::Kind::start_split, want,
                                        "second access qualifies"};
                    }
                }
            } else {
                for (const auto& st : accesses) {
                    if (st.access_id == current_) continue;
                    if (!st.up || violates_thresholds(policy_.thresholds, st)) {
                        split_active_ = false;
                        last_decision_at_ = now;
                        return Decision{Decision::Kind::stop_split, st.access_id,
                                        "secondary out of contract"};
                    }
                }
            }
        }
        return {};
    }

private:
    static const AccessState* find(const std::vector<AccessState>& v,
                                   const std::string& id) {
        for (const auto& st : v)
            if (st.access_id == id) return &st;
        return nullptr;
    }

    bool rate_limited(SimTime now) const {
        return has_decided_ && now.micros < last_decision_at_.micros + window_.micros;
    }

    Decision commit_switch(const std::string& to, SimTime now, const char* why) {
        current_ = to;
        violating_since_.reset();
        last_decision_at_ = now;
        has_decided_ = true;
        return Decision{Decision::Kind::switch_to, to, why};
    }

    AtsssPolicy policy_;
    SimTime window_;
    std::string current_;
    bool split_active_ = false;
    std::optional<SimTime> violating_since_;
    SimTime last_decision_at_ = SimTime::zero();
    bool has_decided_ = false;
};

enum class TableLocation : std::uint8_t { smf, ue, upf };

inline const char* to_string(TableLocation l) {
    switch (l) {
        case TableLocation::smf: return "smf";
        case TableLocation::ue: return "ue";
        case TableLocation::upf: return "upf";
    }
    return "?";
}

struct PolicyTable {
    TableLocation location = TableLocation::smf;
    std::map<std::string, AtsssPolicy> entries; // service_class -> policy
    std::uint64_t version = 0;
};

// Policy store and conveyance: the SMF holds the authoritative table; the
// UE and UPF enforcement copies converge to it after the control-plane
// delay. UE-initiated (uplink) flows read the UE table, network-initiated
// (downlink) flows the UPF table.
class PolicyDistribution {
public:
    explicit PolicyDistribution(EventQueue& ev) : ev_(ev) {
        smf_.location = TableLocation::smf;
        ue_.location = TableLocation::ue;
        upf_.location = TableLocation::upf;
    }

    void install(std::vector<AtsssPolicy> policies) {
        for (auto& p : policies) p.validate();
        smf_.entries.clear();
        for (auto& p : policies) smf_.entries[p.service_class] = std::move(p);
        smf_.version++;
    }

    const PolicyTable& table(TableLocation loc) const {
        switch (loc) {
            case TableLocation::smf: return smf_;
            case TableLocation::ue: return ue_;
            case TableLocation::upf: return upf_;
        }
        return smf_;
    }

    // Schedules delivery of the SMF table to one enforcement point; until
    // the delivery event fires the target keeps enforcing its old version.
    // Redelivery of an already-held version is a no-op.
    void convey_policy(TableLocation target, SimTime cp_delay) {
        if (target == TableLocation::smf) return;
        const std::uint64_t version = smf_.version;
        auto snapshot = smf_.entries;
        ev_.schedule(ev_.now() + cp_delay, [this, target, version, snapshot] {
            PolicyTable& t = target == TableLocation::ue ? ue_ : upf_;
            if (t.version >= version) return;
            t.entries = snapshot;
            t.version = version;
        });
    }

    // Exact-match classification with mandatory "default" fallback.
    const AtsssPolicy& lookup(TableLocation loc, const std::string& service_class) const {
        const PolicyTable& t = table(loc);
        auto it = t.entries.find(service_class);
        if (it == t.entries.end()) it = t.entries.find("default");
        if (it == t.entries.end())
            throw std::runtime_error("policy table at " + std::string(to_string(loc)) +
                                     " has no entry for '" + service_class +
                                     "' and no default");
        return it->second;
    }

    // Enforcement point selection by flow origin.
    const AtsssPolicy& enforce(bool ue_initiated, const std::string& service_class) const {
        return lookup(ue_initiated ? TableLocation::ue : TableLocation::upf, service_class);
    }

private:
    EventQueue& ev_;
    PolicyTable smf_, ue_, upf_;
};

} // namespace hagsim
