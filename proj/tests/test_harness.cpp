#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hagsim/hagsim.hpp"

using namespace hagsim;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

nlohmann::json minimal_config() {
    nlohmann::json j;
    j["topology"] = "hag";
    j["accesses"] = nlohmann::json::array();
    j["accesses"].push_back({{"id", "fbb"},
                             {"downlink", {{"rate_bps", 70000000}, {"owd_us", 6500}}},
                             {"uplink", {{"rate_bps", 19000000}, {"owd_us", 6500}}}});
    j["workloads"] = nlohmann::json::array();
    j["workloads"].push_back(
        {{"app", "wget"}, {"direction", "downlink"}, {"transfer_bytes", 500000}});
    j["seed"] = 3;
    return j;
}

} // namespace

TEST_CASE("config parse: structured errors name field and reason") {
    SECTION("missing topology") {
        nlohmann::json j = minimal_config();
        j.erase("topology");
        try {
            parse_config(j);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.field == "topology");
        }
    }
    SECTION("unknown mode") {
        nlohmann::json j = minimal_config();
        j["topology"] = "mesh";
        REQUIRE_THROWS_AS(parse_config(j), ConfigError);
    }
    SECTION("fast advertise outside converged-core") {
        nlohmann::json j = minimal_config();
        j["transport"] = {{"advertise_mode", "fast"}};
        try {
            parse_config(j);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.field == "transport.advertise_mode");
        }
    }
    SECTION("converged-core requires a policy set") {
        nlohmann::json j = minimal_config();
        j["topology"] = "converged-core";
        try {
            parse_config(j);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.field == "policy");
        }
    }
    SECTION("duplicate access ids") {
        nlohmann::json j = minimal_config();
        j["accesses"].push_back(j["accesses"][0]);
        REQUIRE_THROWS_AS(parse_config(j), ConfigError);
    }
    SECTION("loss_prob out of range") {
        nlohmann::json j = minimal_config();
        j["accesses"][0]["downlink"]["loss_prob"] = 1.5;
        REQUIRE_THROWS_AS(parse_config(j), ConfigError);
    }
    SECTION("policy without default entry") {
        nlohmann::json j = minimal_config();
        j["topology"] = "converged-core";
        j["policies"] = nlohmann::json::array();
        j["policies"].push_back({{"service_class", "bulk"},
                                 {"mode", "split"},
                                 {"access_priority", {"fbb"}}});
        try {
            parse_config(j);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.field == "policy");
        }
    }
    SECTION("unknown app rejected at parse") {
        nlohmann::json j = minimal_config();
        j["workloads"][0]["app"] = "ftp";
        REQUIRE_THROWS(parse_config(j));
    }
}

TEST_CASE("identical config and seed yield byte-identical trace.csv") {
    ExperimentConfig cfg = default_testbed_config();
    cfg.workloads = {scenario_workload("dl", "iperf", 2'000'000)};
    cfg.seed = 17;

    const auto dir = std::filesystem::temp_directory_path() / "hagsim_det";
    std::filesystem::remove_all(dir);
    run_experiment(cfg, (dir / "a").string());
    run_experiment(cfg, (dir / "b").string());

    CHECK(slurp((dir / "a" / "trace.csv").string()) ==
          slurp((dir / "b" / "trace.csv").string()));
    CHECK(slurp((dir / "a" / "summary.json").string()) ==
          slurp((dir / "b" / "summary.json").string()));
    std::filesystem::remove_all(dir);
}

TEST_CASE("summary is recomputable from the emitted trace alone") {
    ExperimentConfig cfg = default_testbed_config();
    cfg.workloads = {scenario_workload("dl", "wget", 1'000'000)};

    const auto dir = std::filesystem::temp_directory_path() / "hagsim_recompute";
    std::filesystem::remove_all(dir);
    const RunSummary emitted = run_experiment(cfg, dir.string());

    const TraceLog parsed = TraceLog::parse_csv_file((dir / "trace.csv").string());
    REQUIRE(parsed.size() > 0);
    const RunSummary redone =
        summarize(cfg, parsed, emitted.decisions, {false}, emitted.label);

    CHECK(to_json(redone) == to_json(emitted));
    std::filesystem::remove_all(dir);
}

TEST_CASE("endpoint aggregation mode runs end to end") {
    ExperimentConfig cfg = default_testbed_config();
    cfg.mode = TopologyMode::endpoint_mptcp;
    cfg.policies.clear();
    cfg.advertise = AdvertiseMode::standard;
    cfg.workloads = {scenario_workload("dl", "wget", 3'000'000)};
    const RunSummary s = run_experiment(cfg);
    REQUIRE(s.all_completed());
    // both accesses carried data without any policy plane
    REQUIRE(s.flows[0].setup_time.at("fbb").has_value());
    REQUIRE(s.flows[0].setup_time.at("mbb").has_value());
    CHECK(s.decisions.empty());
}

TEST_CASE("t_end before completion marks the flow incomplete") {
    ExperimentConfig cfg = default_testbed_config();
    cfg.workloads = {scenario_workload("dl", "scp", 100'000'000)};
    cfg.t_end = SimTime::sec(1);
    const RunSummary s = run_experiment(cfg);
    REQUIRE(s.flows.size() == 1);
    CHECK_FALSE(s.flows[0].completed);
    CHECK_FALSE(s.flows[0].completion_time.has_value());
    CHECK_FALSE(s.all_completed());
}

TEST_CASE("scenario runs are pure compositions of run()") {
    // small transfers keep this quick; the full-scale comparisons live in
    // the acceptance suite
    const auto r = scenario_fig6("dl", "iperf", 5, "", 200'000);
    REQUIRE(r.fbb_only.flows.size() == 1);
    REQUIRE(r.mbb_only.flows.size() == 1);
    REQUIRE(r.fmc.flows.size() == 1);
    CHECK(r.fbb_only.flows[0].completed);
    CHECK(r.mbb_only.flows[0].completed);
    CHECK(r.fmc.flows[0].completed);

    // fmc setup never exceeds the standalone setup per link
    const auto fmc_fbb = r.fmc.flows[0].setup_time.at("fbb");
    const auto alone_fbb = r.fbb_only.flows[0].setup_time.at("fbb");
    REQUIRE(fmc_fbb);
    REQUIRE(alone_fbb);
    CHECK(fmc_fbb->micros <= alone_fbb->micros);
}

TEST_CASE("failover scenario completes on the survivor and logs the switch") {
    const auto r = scenario_failover(SimTime::ms(500), std::nullopt, 11, "", "fbb",
                                     3'000'000);
    REQUIRE(r.summary.flows.size() == 1);
    CHECK(r.summary.flows[0].completed);
    bool saw_switch = false;
    for (const auto& d : r.summary.decisions)
        if (d.kind == "switch") saw_switch = true;
    CHECK(saw_switch);
}

TEST_CASE("kill both accesses -> incomplete, flagged") {
    ExperimentConfig cfg = default_testbed_config();
    cfg.advertise = AdvertiseMode::fast;
    cfg.workloads = {scenario_workload("dl", "scp", 50'000'000)};
    cfg.link_events.push_back({"fbb", SimTime::ms(700), false});
    cfg.link_events.push_back({"mbb", SimTime::ms(700), false});
    cfg.t_end = SimTime::sec(10);
    const RunSummary s = run_experiment(cfg);
    CHECK_FALSE(s.all_completed());
}

TEST_CASE("kill and restore: split resumes after the access requalifies") {
    ExperimentConfig cfg = default_testbed_config();
    cfg.advertise = AdvertiseMode::fast;
    cfg.seed = 13;
    cfg.workloads = {scenario_workload("dl", "scp", 20'000'000)};
    cfg.link_events.push_back({"fbb", SimTime::ms(500), false});
    cfg.link_events.push_back({"fbb", SimTime::ms(1500), true});

    detail::SimRun sim(cfg);
    sim.run();
    REQUIRE(sim.flows()[0]->app->bulk_complete());

    // fbb carries bulk data again after restoration
    std::size_t fbb_data_after_restore = 0;
    for (const auto& rec : sim.trace().records())
        if (rec.link == "fbb_dl" && rec.event == TraceEvent::deliver &&
            rec.kind == PacketKind::data && rec.time > SimTime::ms(1500))
            fbb_data_after_restore++;
    CHECK(fbb_data_after_restore > 100);
}
