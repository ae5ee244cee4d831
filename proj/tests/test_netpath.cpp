#include <catch2/catch_amalgamated.hpp>

#include "hagsim/config.hpp"
#include "hagsim/link.hpp"
#include "hagsim/topology.hpp"

using namespace hagsim;

namespace {

Packet data_packet(std::uint32_t size, std::uint64_t seq = 0) {
    Packet p;
    p.flow_id = 1;
    p.subflow_id = 0;
    p.kind = PacketKind::data;
    p.size_bytes = size;
    p.payload_bytes = size > kHeaderBytes ? size - kHeaderBytes : 0;
    p.conn_seq = seq;
    return p;
}

LinkSpec spec_mbps(double mbps, std::uint64_t owd_us, std::uint64_t cap = 100000) {
    return LinkSpec{static_cast<std::uint64_t>(mbps * 1e6), SimTime::us(owd_us), cap, 0.0,
                    true};
}

} // namespace

TEST_CASE("serialization delay") {
    CHECK(serialization_delay(1500, 20'000'000) == SimTime::us(600));
    CHECK(serialization_delay(1500, 76'000'000) == SimTime::us(158)); // ceil(157.89)
    CHECK(serialization_delay(0, 20'000'000) == SimTime::us(0));
}

TEST_CASE("enqueue composes serialization, propagation and node delay") {
    EventQueue ev;
    TraceLog trace;
    Link link(ev, trace, "fbb_dl", spec_mbps(20, 26500), SimTime::zero(), RngStream(1, "l"));
    SimTime delivered_at;
    link.set_deliver([&](const Packet&) { delivered_at = ev.now(); });

    REQUIRE(link.enqueue(data_packet(1500), ev.now()));
    ev.run_until(SimTime::sec(1));
    CHECK(delivered_at == SimTime::us(600 + 26500));
}

TEST_CASE("queue full -> tail drop") {
    EventQueue ev;
    TraceLog trace;
    Link link(ev, trace, "l", spec_mbps(10, 1000, 3000), SimTime::zero(), RngStream(1, "l"));
    int delivered = 0;
    link.set_deliver([&](const Packet&) { delivered++; });

    REQUIRE(link.enqueue(data_packet(1500), ev.now()));
    REQUIRE(link.enqueue(data_packet(1500), ev.now()));
    REQUIRE_FALSE(link.enqueue(data_packet(1500), ev.now())); // 4500 > 3000
    ev.run_until(SimTime::sec(1));
    CHECK(delivered == 2);
    CHECK(trace.records().back().time <= SimTime::sec(1));
    int drops = 0;
    for (const auto& r : trace.records())
        if (r.event == TraceEvent::drop) drops++;
    CHECK(drops == 1);
}

TEST_CASE("loss_prob=1 never delivers, drop after serialization") {
    EventQueue ev;
    TraceLog trace;
    LinkSpec s = spec_mbps(10, 1000);
    s.loss_prob = 1.0;
    Link link(ev, trace, "l", s, SimTime::zero(), RngStream(1, "l"));
    int delivered = 0;
    link.set_deliver([&](const Packet&) { delivered++; });

    for (int i = 0; i < 5; ++i) REQUIRE(link.enqueue(data_packet(1500), ev.now()));
    ev.run_until(SimTime::sec(1));
    CHECK(delivered == 0);
    CHECK(link.dropped_packets() == 5);
    // busy time was still consumed: drops logged at serialization end
    bool found_late_drop = false;
    for (const auto& r : trace.records())
        if (r.event == TraceEvent::drop && r.time > SimTime::zero()) found_late_drop = true;
    CHECK(found_late_drop);
}

TEST_CASE("link down drops queued and in-flight packets, up restores") {
    EventQueue ev;
    TraceLog trace;
    Link link(ev, trace, "l", spec_mbps(10, 5000, 100000), SimTime::zero(),
              RngStream(1, "l"));
    int delivered = 0;
    link.set_deliver([&](const Packet&) { delivered++; });

    for (int i = 0; i < 5; ++i) REQUIRE(link.enqueue(data_packet(1500), ev.now()));
    ev.run_until(SimTime::us(100));
    REQUIRE(link.set_state(false, ev.now()) == true);
    CHECK(link.dropped_packets() == 5);

    // rejected while down
    REQUIRE_FALSE(link.enqueue(data_packet(1500), ev.now()));

    // up -> normal delivery again
    link.set_state(true, ev.now());
    REQUIRE(link.enqueue(data_packet(1500), ev.now()));
    ev.run_until(SimTime::sec(1));
    CHECK(delivered == 1);
    CHECK(link.in_flight_bytes() == 0);
}

TEST_CASE("conservation: accepted = delivered + dropped + in flight") {
    EventQueue ev;
    TraceLog trace;
    LinkSpec s = spec_mbps(5, 3000, 6000);
    s.loss_prob = 0.2;
    Link link(ev, trace, "l", s, SimTime::zero(), RngStream(7, "loss"));
    link.set_deliver([](const Packet&) {});

    RngStream arrivals(3, "arrivals");
    SimTime t = SimTime::zero();
    for (int i = 0; i < 400; ++i) {
        t = t + SimTime::us(arrivals.uniform_int(0, 4000));
        ev.run_until(t);
        link.enqueue(data_packet(1500), ev.now());
        CHECK(link.accepted_bytes() ==
              link.delivered_bytes() + link.dropped_bytes() + link.in_flight_bytes());
    }
    ev.run_until(t + SimTime::sec(1));
    CHECK(link.in_flight_bytes() == 0);
    CHECK(link.accepted_bytes() == link.delivered_bytes() + link.dropped_bytes());
}

TEST_CASE("delivery is FIFO and never exceeds link rate") {
    EventQueue ev;
    TraceLog trace;
    Link link(ev, trace, "l", spec_mbps(10, 2000, 40000), SimTime::zero(),
              RngStream(1, "l"));
    std::vector<std::uint64_t> order;
    link.set_deliver([&](const Packet& p) { order.push_back(p.conn_seq); });

    RngStream arrivals(9, "a");
    SimTime t = SimTime::zero();
    for (int i = 0; i < 200; ++i) {
        t = t + SimTime::us(arrivals.uniform_int(0, 2500));
        ev.run_until(t);
        link.enqueue(data_packet(1500, i), ev.now());
    }
    ev.run_until(t + SimTime::sec(1));

    REQUIRE(std::is_sorted(order.begin(), order.end()));
    // lossless and up forever: every accepted packet delivered exactly once
    REQUIRE(order.size() == link.accepted_packets());
    REQUIRE(std::adjacent_find(order.begin(), order.end()) == order.end());

    // <= rate * dt bits in any 100 ms window of deliver events
    const std::uint64_t window = 100'000;
    const auto& recs = trace.records();
    for (std::uint64_t w0 = 0; w0 <= t.micros; w0 += window) {
        std::uint64_t bits = 0;
        for (const auto& r : recs)
            if (r.event == TraceEvent::deliver && r.time.micros >= w0 &&
                r.time.micros < w0 + window)
                bits += static_cast<std::uint64_t>(r.size_bytes) * 8;
        // one frame of slack for window boundary effects
        CHECK(bits <= 10'000'000 / 10 + 1500 * 8);
    }
}

TEST_CASE("build_topology wires the three modes") {
    std::vector<AccessSpec> specs;
    specs.push_back(AccessSpec{"fbb", spec_mbps(70, 6500), spec_mbps(19, 6500)});
    specs.push_back(AccessSpec{"mbb", spec_mbps(20, 26500), spec_mbps(5, 26500)});

    EventQueue ev;
    TraceLog trace;

    SECTION("hag adds one core-node delay hop per path") {
        Topology t = build_topology(ev, trace, TopologyMode::hag, specs, 1);
        REQUIRE(t.anchor == "hag");
        REQUIRE(t.accesses.size() == 2);
        for (const auto& a : t.accesses) CHECK(a.core_nodes.size() == 1);
        CHECK(t.accesses[0].core_nodes[0] == "bng");
        CHECK(t.accesses[1].core_nodes[0] == "pgw");
        CHECK_FALSE(t.has_atsss());
    }
    SECTION("endpoint aggregation has no HAG hop") {
        Topology t = build_topology(ev, trace, TopologyMode::endpoint_mptcp, specs, 1);
        REQUIRE(t.anchor == "server");
        for (const auto& a : t.accesses) CHECK(a.core_nodes.empty());
        CHECK_FALSE(t.has_atsss());
    }
    SECTION("converged core anchors at the UPF with policy hooks") {
        Topology t = build_topology(ev, trace, TopologyMode::converged_core, specs, 1);
        REQUIRE(t.anchor == "upf");
        for (const auto& a : t.accesses) CHECK(a.core_nodes.empty());
        CHECK(t.has_atsss());
    }
}

TEST_CASE("default queue capacity is one bdp rounded to whole frames") {
    // 70 Mbps x 6.5 ms = 56875 B -> 38 frames = 57000 B
    CHECK(default_queue_cap(70'000'000, SimTime::us(6500)) == 38 * 1500);
    // 5 Mbps x 26.5 ms = 16562.5 B -> 12 frames
    CHECK(default_queue_cap(5'000'000, SimTime::us(26500)) == 12 * 1500);
    // tiny link still holds one frame
    CHECK(default_queue_cap(100'000, SimTime::us(100)) == 1500);
}
