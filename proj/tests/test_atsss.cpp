#include <catch2/catch_amalgamated.hpp>

#include "hagsim/atsss.hpp"
#include "hagsim/rng.hpp"

using namespace hagsim;

namespace {

AtsssPolicy split_policy() {
    AtsssPolicy p;
    p.service_class = "bulk";
    p.mode = PolicyMode::split;
    p.access_priority = {"fbb", "mbb"};
    return p;
}

AccessState up_state(const std::string& id, std::uint64_t rtt_us = 0) {
    AccessState st;
    st.access_id = id;
    st.up = true;
    if (rtt_us) st.measured_rtt = SimTime::us(rtt_us);
    return st;
}

} // namespace

TEST_CASE("select_access follows the priority list") {
    AtsssPolicy p = split_policy();
    p.mode = PolicyMode::steer;

    SECTION("both up, no thresholds -> list head") {
        const auto picked = select_access(p, {up_state("fbb"), up_state("mbb")});
        REQUIRE(picked == std::vector<std::string>{"fbb"});
    }
    SECTION("head down -> next") {
        auto fbb = up_state("fbb");
        fbb.up = false;
        const auto picked = select_access(p, {fbb, up_state("mbb")});
        REQUIRE(picked == std::vector<std::string>{"mbb"});
    }
    SECTION("rtt threshold excludes the slow access even in split mode") {
        AtsssPolicy sp = split_policy();
        sp.thresholds.max_rtt = SimTime::ms(20);
        const auto picked =
            select_access(sp, {up_state("fbb", 13'000), up_state("mbb", 53'000)});
        REQUIRE(picked == std::vector<std::string>{"fbb"});
    }
    SECTION("no qualifying access -> steering failure") {
        auto fbb = up_state("fbb");
        auto mbb = up_state("mbb");
        fbb.up = mbb.up = false;
        REQUIRE(select_access(p, {fbb, mbb}).empty());
    }
    SECTION("split returns the full qualifying set, primary first") {
        const auto picked = select_access(split_policy(), {up_state("fbb"), up_state("mbb")});
        REQUIRE(picked == std::vector<std::string>{"fbb", "mbb"});
    }
}

TEST_CASE("thresholds never admit a violating access") {
    RngStream rng(99, "fuzz");
    for (int i = 0; i < 1000; ++i) {
        AtsssPolicy p;
        p.service_class = "fuzz";
        p.mode = static_cast<PolicyMode>(rng.uniform_int(0, 2));
        p.access_priority = {"a", "b", "c"};
        if (rng.uniform() < 0.7) p.thresholds.max_rtt = SimTime::us(rng.uniform_int(1, 100'000));
        if (rng.uniform() < 0.7)
            p.thresholds.min_throughput_bps = static_cast<double>(rng.uniform_int(0, 50'000'000));
        if (rng.uniform() < 0.5) p.thresholds.max_loss_rate = rng.uniform() * 0.2;

        std::vector<AccessState> states;
        for (const auto* id : {"a", "b", "c"}) {
            AccessState st;
            st.access_id = id;
            st.up = rng.uniform() < 0.8;
            if (rng.uniform() < 0.8) st.measured_rtt = SimTime::us(rng.uniform_int(1, 120'000));
            if (rng.uniform() < 0.8)
                st.measured_throughput_bps = static_cast<double>(rng.uniform_int(0, 80'000'000));
            if (rng.uniform() < 0.5) st.measured_loss_rate = rng.uniform() * 0.3;
            states.push_back(st);
        }

        for (const auto& id : select_access(p, states)) {
            const AccessState* st = nullptr;
            for (const auto& s : states)
                if (s.access_id == id) st = &s;
            REQUIRE(st != nullptr);
            REQUIRE(st->up);
            REQUIRE_FALSE(violates_thresholds(p.thresholds, *st));
        }
    }
}

TEST_CASE("monitor window arithmetic") {
    FlowMonitor m(SimTime::sec(1));

    SECTION("1 MB acked over 1 s -> 8 Mbps") {
        // spread over the window
        for (int i = 0; i < 100; ++i)
            m.update("fbb", SimTime::ms(10 * i), 10'000, 13'000, 0);
        const auto st = m.state("fbb", true, SimTime::ms(999));
        REQUIRE(st.measured_throughput_bps);
        CHECK(*st.measured_throughput_bps == Catch::Approx(8e6).epsilon(0.01));
    }
    SECTION("empty window -> throughput 0, rtt unknown") {
        const auto st = m.state("fbb", true, SimTime::sec(5));
        REQUIRE(st.measured_throughput_bps);
        CHECK(*st.measured_throughput_bps == 0.0);
        CHECK_FALSE(st.measured_rtt.has_value());
        // an access without samples is not disqualified by an rtt threshold
        AtsssThresholds th;
        th.max_rtt = SimTime::ms(20);
        CHECK_FALSE(violates_thresholds(th, st));
    }
    SECTION("constant samples -> ewma converges to the constant") {
        for (int i = 0; i < 200; ++i)
            m.update("fbb", SimTime::ms(5 * i), 1440, 13'000, 0);
        const auto st = m.state("fbb", true, SimTime::ms(999));
        REQUIRE(st.measured_rtt);
        CHECK(st.measured_rtt->micros == 13'000);
    }
    SECTION("samples age out of the sliding window") {
        m.update("fbb", SimTime::ms(100), 500'000, 13'000, 0);
        auto st = m.state("fbb", true, SimTime::ms(500));
        CHECK(*st.measured_throughput_bps == Catch::Approx(4e6).epsilon(0.01));
        st = m.state("fbb", true, SimTime::sec(3));
        CHECK(*st.measured_throughput_bps == 0.0);
    }
}

TEST_CASE("evaluate: threshold switch requires a full violating window plus margin") {
    AtsssPolicy p;
    p.service_class = "bulk";
    p.mode = PolicyMode::switch_;
    p.access_priority = {"fbb", "mbb"};
    p.thresholds.min_throughput_bps = 10e6;
    p.hysteresis = 0.1;
    const SimTime W = SimTime::sec(1);

    FlowPolicyController ctl(p, W);
    ctl.activate("fbb", false);

    auto states = [&](double fbb_bps, double mbb_bps) {
        AccessState f = up_state("fbb");
        f.measured_throughput_bps = fbb_bps;
        AccessState m = up_state("mbb");
        m.measured_throughput_bps = mbb_bps;
        return std::vector<AccessState>{f, m};
    };

    // violation begins; no switch before a full window
    auto d = ctl.evaluate(states(5e6, 20e6), SimTime::sec(2));
    CHECK(d.kind == Decision::Kind::stay);
    // still violating after a full window and the alternative has margin
    d = ctl.evaluate(states(5e6, 20e6), SimTime::sec(3));
    CHECK(d.kind == Decision::Kind::switch_to);
    CHECK(d.to == "mbb");
    CHECK(ctl.current_access() == "mbb");
}

TEST_CASE("evaluate: violation within the hysteresis band stays put") {
    AtsssPolicy p;
    p.service_class = "bulk";
    p.mode = PolicyMode::switch_;
    p.access_priority = {"fbb", "mbb"};
    p.thresholds.min_throughput_bps = 10e6;
    p.hysteresis = 0.1;
    FlowPolicyController ctl(p, SimTime::sec(1));
    ctl.activate("fbb", false);

    auto states = [&](double fbb_bps, double mbb_bps) {
        AccessState f = up_state("fbb");
        f.measured_throughput_bps = fbb_bps;
        AccessState m = up_state("mbb");
        m.measured_throughput_bps = mbb_bps;
        return std::vector<AccessState>{f, m};
    };

    // alternative at 10.5 Mbps lacks the 11 Mbps (10% margin) needed
    for (int s = 1; s <= 10; ++s) {
        const auto d = ctl.evaluate(states(9.5e6, 10.5e6), SimTime::sec(s));
        CHECK(d.kind == Decision::Kind::stay);
    }
}

TEST_CASE("evaluate: oscillation within the band causes at most one switch") {
    RngStream rng(31, "osc");
    for (int round = 0; round < 200; ++round) {
        AtsssPolicy p;
        p.service_class = "bulk";
        p.mode = PolicyMode::switch_;
        p.access_priority = {"fbb", "mbb"};
        const double threshold = 8e6 + rng.uniform() * 8e6;
        p.thresholds.min_throughput_bps = threshold;
        p.hysteresis = 0.05 + rng.uniform() * 0.3;
        FlowPolicyController ctl(p, SimTime::sec(1));
        ctl.activate("fbb", false);

        int switches = 0;
        for (int s = 1; s <= 40; ++s) {
            // both metrics wander inside (threshold*(1-h), threshold*(1+h))
            const double h = p.hysteresis;
            const double lo = threshold * (1.0 - h * 0.99);
            const double hi = threshold * (1.0 + h * 0.99);
            AccessState f = up_state("fbb");
            f.measured_throughput_bps = lo + rng.uniform() * (hi - lo);
            AccessState m = up_state("mbb");
            m.measured_throughput_bps = lo + rng.uniform() * (hi - lo);
            const auto d = ctl.evaluate({f, m}, SimTime::sec(s));
            if (d.kind == Decision::Kind::switch_to) switches++;
        }
        REQUIRE(switches <= 1);
    }
}

TEST_CASE("evaluate: access loss switches immediately") {
    AtsssPolicy p;
    p.service_class = "bulk";
    p.mode = PolicyMode::steer;
    p.access_priority = {"fbb", "mbb"};
    FlowPolicyController ctl(p, SimTime::sec(1));
    ctl.activate("fbb", false);

    AccessState f = up_state("fbb");
    f.up = false;
    const auto d = ctl.evaluate({f, up_state("mbb")}, SimTime::ms(137));
    CHECK(d.kind == Decision::Kind::switch_to);
    CHECK(d.to == "mbb");
}

TEST_CASE("split lifecycle: start when a second access qualifies, stop on violation") {
    AtsssPolicy p = split_policy();
    p.thresholds.max_rtt = SimTime::ms(80);
    FlowPolicyController ctl(p, SimTime::sec(1));
    ctl.activate("fbb", false);

    auto d = ctl.evaluate({up_state("fbb", 13'000), up_state("mbb", 53'000)},
                          SimTime::sec(2));
    CHECK(d.kind == Decision::Kind::start_split);
    CHECK(ctl.split_active());

    d = ctl.evaluate({up_state("fbb", 13'000), up_state("mbb", 95'000)}, SimTime::sec(4));
    CHECK(d.kind == Decision::Kind::stop_split);
    CHECK_FALSE(ctl.split_active());
}

TEST_CASE("policy conveyance: delayed, idempotent, eventually consistent") {
    EventQueue ev;
    PolicyDistribution dist(ev);

    AtsssPolicy def = split_policy();
    def.service_class = "default";
    dist.install({def});
    REQUIRE(dist.table(TableLocation::smf).version == 1);

    SECTION("a flow before delivery uses the old (empty) table") {
        dist.convey_policy(TableLocation::ue, SimTime::ms(50));
        ev.run_until(SimTime::ms(25));
        CHECK(dist.table(TableLocation::ue).version == 0);
        ev.run_until(SimTime::ms(50));
        CHECK(dist.table(TableLocation::ue).version == 1);
    }
    SECTION("redelivery of the same version is a no-op") {
        dist.convey_policy(TableLocation::ue, SimTime::ms(10));
        dist.convey_policy(TableLocation::ue, SimTime::ms(20));
        ev.run_until(SimTime::ms(100));
        CHECK(dist.table(TableLocation::ue).version == 1);
    }
    SECTION("ue and upf converge independently to the smf version") {
        dist.convey_policy(TableLocation::ue, SimTime::ms(10));
        dist.convey_policy(TableLocation::upf, SimTime::ms(90));
        ev.run_until(SimTime::ms(50));
        CHECK(dist.table(TableLocation::ue).version == 1);
        CHECK(dist.table(TableLocation::upf).version == 0); // briefly differ
        ev.run_until(SimTime::ms(200));
        CHECK(dist.table(TableLocation::upf).version == 1);
        CHECK(dist.table(TableLocation::ue).entries.size() ==
              dist.table(TableLocation::smf).entries.size());
    }
}

TEST_CASE("enforcement point locality and default-class fallback") {
    EventQueue ev;
    PolicyDistribution dist(ev);

    AtsssPolicy def = split_policy();
    def.service_class = "default";
    def.mode = PolicyMode::steer;
    AtsssPolicy bulk = split_policy();
    dist.install({def, bulk});
    dist.convey_policy(TableLocation::ue, SimTime::zero());
    dist.convey_policy(TableLocation::upf, SimTime::zero());
    ev.run_until(SimTime::ms(1));

    // ue-initiated (uplink) reads the UE table; network-initiated the UPF's
    CHECK(dist.enforce(true, "bulk").mode == PolicyMode::split);
    CHECK(dist.enforce(false, "bulk").mode == PolicyMode::split);
    // unknown class falls back to default
    CHECK(dist.enforce(true, "nonsuch").mode == PolicyMode::steer);

    // changing the UPF copy never alters UE-initiated decisions
    AtsssPolicy def2 = def;
    def2.mode = PolicyMode::split;
    AtsssPolicy bulk2 = bulk;
    bulk2.mode = PolicyMode::steer;
    dist.install({def2, bulk2});
    dist.convey_policy(TableLocation::upf, SimTime::zero());
    ev.run_until(SimTime::ms(2));
    CHECK(dist.enforce(false, "bulk").mode == PolicyMode::steer); // upf updated
    CHECK(dist.enforce(true, "bulk").mode == PolicyMode::split);  // ue unchanged
}

TEST_CASE("policy validation rejects malformed entries") {
    AtsssPolicy p;
    p.service_class = "x";
    SECTION("empty priority list") { REQUIRE_THROWS(p.validate()); }
    SECTION("hysteresis out of range") {
        p.access_priority = {"fbb"};
        p.hysteresis = 1.0;
        REQUIRE_THROWS(p.validate());
    }
    SECTION("negative threshold") {
        p.access_priority = {"fbb"};
        p.hysteresis = 0.1;
        p.thresholds.min_throughput_bps = -1.0;
        REQUIRE_THROWS(p.validate());
    }
}
