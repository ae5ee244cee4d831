#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hagsim/event_queue.hpp"
#include "hagsim/transport.hpp"

namespace hagsim {

enum class AppKind : std::uint8_t { scp, wget, iperf };

inline const char* to_string(AppKind a) {
    switch (a) {
        case AppKind::scp: return "scp";
        case AppKind::wget: return "wget";
        case AppKind::iperf: return "iperf";
    }
    return "?";
}

inline AppKind app_from_string(const std::string& s) {
    if (s == "scp") return AppKind::scp;
    if (s == "wget") return AppKind::wget;
    if (s == "iperf") return AppKind::iperf;
    throw std::invalid_argument("unknown app: " + s);
}

// Shape of an application's session-setup phase. The per-app constants are
// calibration values sized so handshake + N*RTT + processing reproduces the
// measured setup times; all of them can be overridden from the config.
struct ExchangeProfile {
    int exchanges = 2;
    int parallel_group = 0; // trailing exchanges that may run concurrently
    SimTime total_processing = SimTime::ms(10);
    std::uint32_t request_bytes = 128;
    std::uint32_t response_bytes = 256;
};

inline ExchangeProfile default_profile(AppKind app) {
    switch (app) {
        case AppKind::scp:
            // key exchange + auth: long handshake chain, of which the last
            // four exchanges can run in parallel when a second path exists
            return ExchangeProfile{12, 4, SimTime::ms(240), 128, 256};
        case AppKind::wget: return ExchangeProfile{2, 0, SimTime::ms(10), 256, 512};
        case AppKind::iperf: return ExchangeProfile{2, 0, SimTime::ms(5), 128, 128};
    }
    return ExchangeProfile{};
}

struct ExchangeSpec {
    std::uint32_t request_bytes;
    std::uint32_t response_bytes;
    SimTime processing;
};

// Setup-exchange dependency graph: an exchange starts only after its
// predecessors' responses arrive. Stages group exchanges that may run in
// parallel; a multi-exchange stage actually parallelizes only when the
// connection spans at least two established subflows.
struct ExchangeGraph {
    std::vector<ExchangeSpec> nodes;
    std::vector<std::pair<int, int>> edges; // prerequisite -> dependent
    std::vector<std::vector<int>> stages;

    bool is_acyclic() const { return !topological_order().empty() || nodes.empty(); }

    // Kahn's algorithm; empty result for a cyclic graph.
    std::vector<int> topological_order() const {
        const int n = static_cast<int>(nodes.size());
        std::vector<int> indeg(n, 0);
        for (auto& [u, v] : edges) indeg[v]++;
        std::deque<int> ready;
        for (int i = 0; i < n; ++i)
            if (indeg[i] == 0) ready.push_back(i);
        std::vector<int> order;
        while (!ready.empty()) {
            int u = ready.front();
            ready.pop_front();
            order.push_back(u);
            for (auto& [a, b] : edges)
                if (a == u && --indeg[b] == 0) ready.push_back(b);
        }
        if (static_cast<int>(order.size()) != n) return {};
        return order;
    }
};

inline ExchangeGraph build_exchange_graph(const ExchangeProfile& p) {
    if (p.exchanges <= 0) throw std::invalid_argument("profile needs >= 1 exchange");
    if (p.parallel_group < 0 || p.parallel_group > p.exchanges)
        throw std::invalid_argument("parallel group larger than exchange count");
    if (p.parallel_group == 1)
        throw std::invalid_argument("parallel group of one is just a chain step");

    ExchangeGraph g;
    const SimTime per = SimTime::us(p.total_processing.micros /
                                    static_cast<std::uint64_t>(p.exchanges));
    for (int i = 0; i < p.exchanges; ++i)
        g.nodes.push_back(ExchangeSpec{p.request_bytes, p.response_bytes, per});

    const int chain = p.exchanges - p.parallel_group;
    for (int i = 0; i + 1 < chain; ++i) g.edges.emplace_back(i, i + 1);
    for (int i = 0; i < chain; ++i) g.stages.push_back({i});
    if (p.parallel_group > 0) {
        std::vector<int> group;
        for (int i = chain; i < p.exchanges; ++i) {
            if (chain > 0) g.edges.emplace_back(chain - 1, i);
            group.push_back(i);
        }
        g.stages.push_back(group);
    }
    return g;
}

inline ExchangeGraph setup_exchanges(AppKind app) {
    return build_exchange_graph(default_profile(app));
}

struct WorkloadSpec {
    AppKind app = AppKind::scp;
    StreamDir bulk_dir = StreamDir::server_to_client; // downlink default
    std::uint64_t transfer_bytes = 100'000'000;       // the 100 MB file
    std::string service_class = "bulk";
    SimTime start_at = SimTime::zero();
    std::optional<ExchangeProfile> profile_override;

    ExchangeProfile profile() const {
        return profile_override ? *profile_override : default_profile(app);
    }
    bool ue_initiated() const { return bulk_dir == StreamDir::client_to_server; }
};

// Drives one workload over one multipath connection: session setup as a
// staged request/response exchange, then the bulk transfer. Setup messages
// are flagged kind=setup and bulk bytes kind=data, so the measurement layer
// keys on the flag rather than a size heuristic.
class Application {
public:
    using CompletionCb = std::function<void()>;

    Application(EventQueue& ev, Connection& conn, WorkloadSpec spec)
        : ev_(ev), conn_(conn), spec_(std::move(spec)),
          graph_(build_exchange_graph(spec_.profile())) {
        conn_.set_on_delivered([this](StreamDir dir, std::uint64_t prefix) {
            on_delivered(dir, prefix);
        });
    }

    const ExchangeGraph& graph() const { return graph_; }
    const WorkloadSpec& spec() const { return spec_; }

    // Establishes the connection and queues the first request; bytes start
    // flowing when the handshake completes.
    void start() {
        conn_.establish();
        dispatch_stage(0);
    }

    bool setup_complete() const { return setup_complete_; }
    bool bulk_complete() const { return bulk_complete_; }
    SimTime setup_completed_at() const { return setup_completed_at_; }
    SimTime completed_at() const { return completed_at_; }
    std::uint64_t bulk_delivered() const {
        const std::uint64_t prefix = conn_.delivered(spec_.bulk_dir);
        return prefix > bulk_offset_ ? std::min(prefix - bulk_offset_, spec_.transfer_bytes)
                                     : 0;
    }
    void set_on_complete(CompletionCb cb) { on_complete_ = std::move(cb); }

private:
    struct PendingExchange {
        int id;
        std::uint64_t request_end = 0;  // c2s offset after which request is full
        std::uint64_t response_end = 0; // s2c offset after which response is full
        bool request_done = false;
        bool responded = false;
        bool complete = false;
    };

    void dispatch_stage(std::size_t stage) {
        if (stage >= graph_.stages.size()) {
            begin_bulk();
            return;
        }
        stage_ = stage;
        const auto& members = graph_.stages[stage];
        // A parallel group is usable only when the session actually spans
        // multiple established subflows; otherwise it degrades to a chain.
        parallel_ = members.size() > 1 && conn_.established_count() >= 2;
        stage_members_ = members;
        stage_next_ = 0;
        stage_remaining_ = static_cast<int>(members.size());
        if (parallel_) {
            while (stage_next_ < stage_members_.size()) dispatch_request();
        } else {
            dispatch_request();
        }
    }

    void dispatch_request() {
        const int id = stage_members_[stage_next_++];
        const auto& node = graph_.nodes[id];
        PendingExchange ex;
        ex.id = id;
        ex.request_end = c2s_expected_ + node.request_bytes;
        c2s_expected_ = ex.request_end;
        pending_.push_back(ex);
        conn_.submit(StreamDir::client_to_server, PacketKind::setup, node.request_bytes);
    }

    void on_delivered(StreamDir dir, std::uint64_t prefix) {
        if (dir == StreamDir::client_to_server) {
            for (auto& ex : pending_) {
                if (!ex.request_done && prefix >= ex.request_end) {
                    ex.request_done = true;
                    schedule_response(ex.id);
                }
            }
            if (bulk_started_ && spec_.bulk_dir == StreamDir::client_to_server)
                check_bulk(prefix);
        } else {
            for (auto& ex : pending_) {
                if (ex.responded && !ex.complete && prefix >= ex.response_end) {
                    ex.complete = true;
                    exchange_completed();
                }
            }
            if (bulk_started_ && spec_.bulk_dir == StreamDir::server_to_client)
                check_bulk(prefix);
        }
    }

    void schedule_response(int id) {
        const auto& node = graph_.nodes[id];
        ev_.schedule(ev_.now() + node.processing, [this, id] {
            const auto& n = graph_.nodes[id];
            for (auto& ex : pending_) {
                if (ex.id == id) {
                    ex.response_end = s2c_expected_ + n.response_bytes;
                    ex.responded = true;
                    break;
                }
            }
            s2c_expected_ += n.response_bytes;
            conn_.submit(StreamDir::server_to_client, PacketKind::setup,
                         n.response_bytes);
        });
    }

    void exchange_completed() {
        stage_remaining_--;
        if (stage_remaining_ > 0) {
            if (!parallel_ && stage_next_ < stage_members_.size()) dispatch_request();
            return;
        }
        dispatch_stage(stage_ + 1);
    }

    void begin_bulk() {
        setup_complete_ = true;
        setup_completed_at_ = ev_.now();
        bulk_started_ = true;
        bulk_offset_ = spec_.bulk_dir == StreamDir::client_to_server ? c2s_expected_
                                                                     : s2c_expected_;
        conn_.submit(spec_.bulk_dir, PacketKind::data, spec_.transfer_bytes);
    }

    void check_bulk(std::uint64_t prefix) {
        if (!bulk_complete_ && prefix >= bulk_offset_ + spec_.transfer_bytes) {
            bulk_complete_ = true;
            completed_at_ = ev_.now();
            if (on_complete_) on_complete_();
        }
    }

    EventQueue& ev_;
    Connection& conn_;
    WorkloadSpec spec_;
    ExchangeGraph graph_;

    std::vector<PendingExchange> pending_;
    std::uint64_t c2s_expected_ = 0;
    std::uint64_t s2c_expected_ = 0;

    std::size_t stage_ = 0;
    std::vector<int> stage_members_;
    std::size_t stage_next_ = 0;
    int stage_remaining_ = 0;
    bool parallel_ = false;

    bool setup_complete_ = false;
    bool bulk_started_ = false;
    bool bulk_complete_ = false;
    std::uint64_t bulk_offset_ = 0;
    SimTime setup_completed_at_;
    SimTime completed_at_;
    CompletionCb on_complete_;
};

} // namespace hagsim
