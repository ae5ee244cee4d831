#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <vector>

#include "hagsim/event_queue.hpp"
#include "hagsim/rng.hpp"

using namespace hagsim;

TEST_CASE("schedule at current clock fires first") {
    EventQueue ev;
    std::vector<int> order;
    ev.schedule(SimTime::us(0), [&] { order.push_back(1); });
    ev.schedule(SimTime::us(5), [&] { order.push_back(2); });
    ev.run_until(SimTime::sec(1));
    REQUIRE(order == std::vector<int>{1, 2});
}

TEST_CASE("ties at equal fire_at run in insertion order") {
    EventQueue ev;
    std::vector<int> order;
    for (int i = 0; i < 10; ++i)
        ev.schedule(SimTime::us(42), [&order, i] { order.push_back(i); });
    ev.run_until(SimTime::ms(1));
    for (int i = 0; i < 10; ++i) REQUIRE(order[i] == i);
}

TEST_CASE("cancelled events never fire") {
    EventQueue ev;
    bool fired = false;
    const EventId id = ev.schedule(SimTime::us(5), [&] { fired = true; });
    REQUIRE(ev.cancel(id));
    ev.run_until(SimTime::ms(1));
    REQUIRE_FALSE(fired);
}

TEST_CASE("cancel semantics") {
    EventQueue ev;
    REQUIRE_FALSE(ev.cancel(9999)); // unknown id

    const EventId id = ev.schedule(SimTime::us(1), [] {});
    REQUIRE(ev.cancel(id));
    REQUIRE_FALSE(ev.cancel(id)); // already cancelled

    const EventId fired = ev.schedule(SimTime::us(2), [] {});
    ev.run_until(SimTime::ms(1));
    REQUIRE_FALSE(ev.cancel(fired)); // already fired
}

TEST_CASE("run_until advances the clock on an empty queue") {
    EventQueue ev;
    REQUIRE(ev.run_until(SimTime::sec(10)) == 0);
    REQUIRE(ev.now() == SimTime::sec(10));
}

TEST_CASE("run_until processes only events at or before t_end") {
    EventQueue ev;
    int count = 0;
    ev.schedule(SimTime::us(1), [&] { count++; });
    ev.schedule(SimTime::us(2), [&] { count++; });
    ev.schedule(SimTime::us(3), [&] { count++; });
    REQUIRE(ev.run_until(SimTime::us(2)) == 2);
    REQUIRE(count == 2);
    REQUIRE(ev.run_until(SimTime::us(3)) == 1);
    REQUIRE(count == 3);
}

TEST_CASE("handler may schedule at the current time within the same run") {
    EventQueue ev;
    std::vector<int> order;
    ev.schedule(SimTime::us(7), [&] {
        order.push_back(1);
        ev.schedule(ev.now(), [&] { order.push_back(2); });
    });
    REQUIRE(ev.run_until(SimTime::us(7)) == 2);
    REQUIRE(order == std::vector<int>{1, 2});
}

TEST_CASE("scheduling in the past fails loudly") {
    EventQueue ev;
    ev.schedule(SimTime::us(3), [] {});
    ev.run_until(SimTime::us(5));
    REQUIRE_THROWS_AS(ev.schedule(SimTime::us(4), [] {}), std::logic_error);
}

TEST_CASE("fire order is independent of insertion order for distinct times") {
    std::mt19937_64 shuffler(7);
    for (int round = 0; round < 25; ++round) {
        std::vector<std::uint64_t> times;
        for (int i = 0; i < 50; ++i) times.push_back(1 + 10 * i);
        std::shuffle(times.begin(), times.end(), shuffler);

        EventQueue ev;
        std::vector<std::uint64_t> fired;
        for (const auto t : times)
            ev.schedule(SimTime::us(t), [&fired, &ev] { fired.push_back(ev.now().micros); });
        ev.run_until(SimTime::ms(10));

        REQUIRE(std::is_sorted(fired.begin(), fired.end()));
        REQUIRE(fired.size() == times.size());
    }
}

TEST_CASE("no event fires earlier than a previously fired event") {
    RngStream rng(11, "times");
    EventQueue ev;
    SimTime last = SimTime::zero();
    bool monotone = true;
    for (int i = 0; i < 500; ++i) {
        const SimTime at = SimTime::us(rng.uniform_int(0, 100000));
        ev.schedule(at, [&, at] {
            if (ev.now() < last) monotone = false;
            last = ev.now();
        });
    }
    ev.run_until(SimTime::sec(1));
    REQUIRE(monotone);
}

TEST_CASE("rng streams: identical (seed,label) yields identical draws") {
    RngStream a(42, "link.fbb_dl.loss");
    RngStream b(42, "link.fbb_dl.loss");
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("rng streams: different labels are independent") {
    RngStream a(42, "link.fbb_dl.loss");
    RngStream b(42, "link.mbb_dl.loss");
    bool differ = false;
    for (int i = 0; i < 10; ++i)
        if (a.next_u64() != b.next_u64()) differ = true;
    REQUIRE(differ);
}

TEST_CASE("rng uniform stays in [0,1)") {
    RngStream a(1, "u");
    for (int i = 0; i < 1000; ++i) {
        const double v = a.uniform();
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
    }
}
