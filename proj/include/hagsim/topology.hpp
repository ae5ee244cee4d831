#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hagsim/link.hpp"

namespace hagsim {

enum class TopologyMode { endpoint_mptcp, hag, converged_core };

inline const char* to_string(TopologyMode m) {
    switch (m) {
        case TopologyMode::endpoint_mptcp: return "endpoint-mptcp";
        case TopologyMode::hag: return "hag";
        case TopologyMode::converged_core: return "converged-core";
    }
    return "?";
}

struct AccessSpec {
    std::string id; // "fbb", "mbb"
    LinkSpec downlink;
    LinkSpec uplink;
};

// One access path: uplink/downlink link pair plus the chain of core nodes
// the traffic passes through before the anchor.
struct AccessPath {
    std::string id;
    std::vector<std::string> core_nodes; // pass-through delay nodes (BNG/PGW)
    std::unique_ptr<Link> down;
    std::unique_ptr<Link> up;

    Link& link(StreamDir dir) const {
        // client->server bytes ride the uplink, server->client the downlink
        return dir == StreamDir::client_to_server ? *up : *down;
    }
};

// The three convergence architectures as compositions of path segments.
// Every access terminates at exactly one anchor: the remote server
// (endpoint aggregation), the HAG behind BNG/PGW pass-through nodes, or
// the UPF of the converged core.
class Topology {
public:
    TopologyMode mode = TopologyMode::endpoint_mptcp;
    std::string anchor; // "server" | "hag" | "upf"
    SimTime anchor_proc_delay = SimTime::us(500);
    SimTime node_proc_delay = SimTime::us(500);
    std::vector<AccessPath> accesses;

    bool has_atsss() const { return mode == TopologyMode::converged_core; }

    AccessPath& access(const std::string& id) {
        for (auto& a : accesses)
            if (a.id == id) return a;
        throw std::out_of_range("unknown access: " + id);
    }
    const AccessPath& access(const std::string& id) const {
        return const_cast<Topology*>(this)->access(id);
    }
    int access_index(const std::string& id) const {
        for (std::size_t i = 0; i < accesses.size(); ++i)
            if (accesses[i].id == id) return static_cast<int>(i);
        return -1;
    }

    bool access_up(const std::string& id) const {
        const auto& a = access(id);
        return a.down->is_up() && a.up->is_up();
    }

    // Brings both directions of an access up or down; notifies observers
    // (ATSSS, transport) of the change.
    void set_access_state(const std::string& id, bool up, SimTime now) {
        auto& a = access(id);
        a.down->set_state(up, now);
        a.up->set_state(up, now);
        for (auto& fn : state_observers_) fn(id, up);
    }

    void observe_state_changes(std::function<void(const std::string&, bool)> fn) {
        state_observers_.push_back(std::move(fn));
    }

private:
    std::vector<std::function<void(const std::string&, bool)>> state_observers_;
};

inline Topology build_topology(EventQueue& ev, TraceLog& trace, TopologyMode mode,
                               const std::vector<AccessSpec>& specs,
                               std::uint64_t seed,
                               SimTime node_proc_delay = SimTime::us(500)) {
    if (specs.empty()) throw std::invalid_argument("topology needs at least one access");

    Topology topo;
    topo.mode = mode;
    topo.node_proc_delay = node_proc_delay;
    topo.anchor_proc_delay = node_proc_delay;
    switch (mode) {
        case TopologyMode::endpoint_mptcp: topo.anchor = "server"; break;
        case TopologyMode::hag: topo.anchor = "hag"; break;
        case TopologyMode::converged_core: topo.anchor = "upf"; break;
    }

    for (const auto& s : specs) {
        AccessPath p;
        p.id = s.id;
        if (mode == TopologyMode::hag)
            p.core_nodes.push_back(s.id == "fbb" ? "bng" : "pgw");
        // Fixed per-packet pass-through delay for every node on the path,
        // anchor included.
        const SimTime extra =
            SimTime::us(node_proc_delay.micros * (1 + p.core_nodes.size()));
        p.down = std::make_unique<Link>(ev, trace, s.id + "_dl", s.downlink, extra,
                                        RngStream(seed, "link." + s.id + "_dl.loss"));
        p.up = std::make_unique<Link>(ev, trace, s.id + "_ul", s.uplink, extra,
                                      RngStream(seed, "link." + s.id + "_ul.loss"));
        topo.accesses.push_back(std::move(p));
    }
    return topo;
}

} // namespace hagsim
