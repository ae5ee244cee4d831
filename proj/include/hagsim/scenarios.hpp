#pragma once

#include <future>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hagsim/runner.hpp"

namespace hagsim {

// The comparison experiments are compositions of run_experiment over
// derived configs: identical master seed and workload across the modes so
// runs differ only in topology/advertisement.

inline ExperimentConfig restrict_to_access(ExperimentConfig cfg, const std::string& id) {
    std::vector<AccessSpec> kept;
    for (auto& a : cfg.accesses)
        if (a.id == id) kept.push_back(a);
    cfg.accesses = kept;
    for (auto& p : cfg.policies) {
        std::vector<std::string> pr;
        for (auto& acc : p.access_priority)
            if (acc == id) pr.push_back(acc);
        p.access_priority = pr;
    }
    std::vector<ExperimentConfig::LinkEvent> ev;
    for (auto& e : cfg.link_events)
        if (e.access == id) ev.push_back(e);
    cfg.link_events = ev;
    return cfg;
}

inline WorkloadSpec scenario_workload(const std::string& direction, const std::string& app,
                                      std::uint64_t transfer_bytes) {
    WorkloadSpec w;
    w.app = app_from_string(app);
    if (direction == "dl" || direction == "downlink")
        w.bulk_dir = StreamDir::server_to_client;
    else if (direction == "ul" || direction == "uplink")
        w.bulk_dir = StreamDir::client_to_server;
    else
        throw ConfigError("direction", "must be dl|ul");
    w.transfer_bytes = transfer_bytes;
    w.service_class = "bulk";
    return w;
}

struct ComparisonResult {
    std::string scenario;
    std::string direction;
    std::string app;
    RunSummary fbb_only;
    RunSummary mbb_only;
    RunSummary fmc;
    // per-access utilization: fmc steady mean / standalone steady mean
    std::map<std::string, double> utilization;
};

namespace detail {

inline double steady_mean(const RunSummary& s, const std::string& access) {
    if (s.flows.empty() || !s.flows.front().steady.valid) return 0.0;
    auto it = s.flows.front().steady.per_access_bps.find(access);
    return it == s.flows.front().steady.per_access_bps.end() ? 0.0 : it->second;
}

inline double steady_aggregate(const RunSummary& s) {
    if (s.flows.empty() || !s.flows.front().steady.valid) return 0.0;
    return s.flows.front().steady.aggregate_bps;
}

inline std::optional<SimTime> setup_of(const RunSummary& s, const std::string& access) {
    if (s.flows.empty()) return std::nullopt;
    auto it = s.flows.front().setup_time.find(access);
    if (it == s.flows.front().setup_time.end()) return std::nullopt;
    return it->second;
}

// Earliest bulk-data transmission on any link: the session-level setup time.
inline std::optional<SimTime> setup_any(const RunSummary& s) {
    std::optional<SimTime> best;
    if (s.flows.empty()) return best;
    for (const auto& [access, t] : s.flows.front().setup_time)
        if (t && (!best || *t < *best)) best = *t;
    return best;
}

inline ComparisonResult run_three_modes(ExperimentConfig base, const std::string& scenario,
                                        const std::string& direction, const std::string& app,
                                        const std::string& out_dir) {
    ComparisonResult r;
    r.scenario = scenario;
    r.direction = direction;
    r.app = app;

    const ExperimentConfig fbb_cfg = restrict_to_access(base, "fbb");
    const ExperimentConfig mbb_cfg = restrict_to_access(base, "mbb");

    auto out = [&out_dir](const char* mode) {
        return out_dir.empty() ? std::string() : out_dir + "/" + mode;
    };
    // Independent runs; merge by mode label on completion.
    auto f1 = std::async(std::launch::async, [&] {
        return run_experiment(fbb_cfg, out("fbb-only"), "fbb-only");
    });
    auto f2 = std::async(std::launch::async, [&] {
        return run_experiment(mbb_cfg, out("mbb-only"), "mbb-only");
    });
    auto f3 = std::async(std::launch::async,
                         [&] { return run_experiment(base, out("fmc"), "fmc"); });
    r.fbb_only = f1.get();
    r.mbb_only = f2.get();
    r.fmc = f3.get();

    const double fbb_alone = steady_mean(r.fbb_only, "fbb");
    const double mbb_alone = steady_mean(r.mbb_only, "mbb");
    if (fbb_alone > 0) r.utilization["fbb"] = steady_mean(r.fmc, "fbb") / fbb_alone;
    if (mbb_alone > 0) r.utilization["mbb"] = steady_mean(r.fmc, "mbb") / mbb_alone;
    return r;
}

} // namespace detail

// Link-utilization comparison: the three modes (fbb-only, mbb-only, fmc)
// with identical seed and workload. FMC runs as HAG aggregation, the
// architecture the measurements came from.
inline ComparisonResult scenario_fig5(const std::string& direction, const std::string& app,
                                      std::uint64_t seed, const std::string& out_dir = "",
                                      std::uint64_t transfer_bytes = 100'000'000) {
    ExperimentConfig base = default_testbed_config();
    base.mode = TopologyMode::hag;
    base.policies.clear();
    base.advertise = AdvertiseMode::standard;
    base.seed = seed;
    base.workloads = {scenario_workload(direction, app, transfer_bytes)};
    return detail::run_three_modes(base, "fig5", direction, app, out_dir);
}

// Session-setup comparison: FMC runs on the converged core with fast
// address advertisement, so every subflow handshake starts in parallel.
inline ComparisonResult scenario_fig6(const std::string& direction, const std::string& app,
                                      std::uint64_t seed, const std::string& out_dir = "",
                                      std::uint64_t transfer_bytes = 100'000'000) {
    ExperimentConfig base = default_testbed_config();
    base.mode = TopologyMode::converged_core;
    base.advertise = AdvertiseMode::fast;
    base.seed = seed;
    base.workloads = {scenario_workload(direction, app, transfer_bytes)};
    return detail::run_three_modes(base, "fig6", direction, app, out_dir);
}

struct FailoverResult {
    RunSummary summary;
    SimTime kill_at;
    std::optional<SimTime> restore_at;
    std::optional<SimTime> switch_latency; // decision time - kill time
};

// Converged-core split session; one access dies mid-transfer and the run
// must complete on the survivor.
inline FailoverResult scenario_failover(SimTime kill_at,
                                        std::optional<SimTime> restore_at,
                                        std::uint64_t seed,
                                        const std::string& out_dir = "",
                                        const std::string& kill_access = "fbb",
                                        std::uint64_t transfer_bytes = 100'000'000,
                                        const std::string& direction = "dl",
                                        const std::string& app = "scp") {
    ExperimentConfig cfg = default_testbed_config();
    cfg.mode = TopologyMode::converged_core;
    cfg.advertise = AdvertiseMode::fast;
    cfg.seed = seed;
    cfg.workloads = {scenario_workload(direction, app, transfer_bytes)};
    cfg.link_events.push_back({kill_access, kill_at, false});
    if (restore_at) cfg.link_events.push_back({kill_access, *restore_at, true});

    FailoverResult r;
    r.kill_at = kill_at;
    r.restore_at = restore_at;
    r.summary = run_experiment(cfg, out_dir, "failover");
    for (const auto& d : r.summary.decisions) {
        if (d.kind == "switch" && d.time >= kill_at) {
            r.switch_latency = d.time - kill_at;
            break;
        }
    }
    return r;
}

// --- plain-text comparison tables ---------------------------------------

inline std::string fig5_table(const ComparisonResult& r) {
    auto mbps = [](double bps) {
        std::ostringstream o;
        o << std::fixed << std::setprecision(2) << bps / 1e6;
        return o.str();
    };
    std::ostringstream t;
    t << "fig5 " << r.direction << " " << r.app << " (seed " << r.fmc.seed << ")\n";
    t << std::left << std::setw(10) << "mode" << std::right << std::setw(12) << "fbb_mbps"
      << std::setw(12) << "mbb_mbps" << std::setw(12) << "agg_mbps" << std::setw(14)
      << "completion_s" << '\n';
    auto row = [&](const char* label, const RunSummary& s) {
        t << std::left << std::setw(10) << label;
        t << std::right << std::setw(12) << mbps(detail::steady_mean(s, "fbb"))
          << std::setw(12) << mbps(detail::steady_mean(s, "mbb")) << std::setw(12)
          << mbps(detail::steady_aggregate(s));
        std::ostringstream c;
        if (!s.flows.empty() && s.flows.front().completion_time)
            c << std::fixed << std::setprecision(2)
              << s.flows.front().completion_time->seconds();
        else
            c << "incomplete";
        t << std::setw(14) << c.str() << '\n';
        return 0;
    };
    row("fbb-only", r.fbb_only);
    row("mbb-only", r.mbb_only);
    row("fmc", r.fmc);
    t << "utilization:";
    for (const auto& [access, u] : r.utilization)
        t << " " << access << "=" << std::fixed << std::setprecision(3) << u;
    t << '\n';
    return t.str();
}

inline std::string fig6_table(const ComparisonResult& r) {
    auto ms = [](const std::optional<SimTime>& t) {
        if (!t) return std::string("never");
        std::ostringstream o;
        o << std::fixed << std::setprecision(1) << t->millis();
        return o.str();
    };
    std::ostringstream t;
    t << "fig6 " << r.direction << " " << r.app << " (seed " << r.fmc.seed << ")\n";
    t << std::left << std::setw(10) << "mode" << std::right << std::setw(14)
      << "fbb_setup_ms" << std::setw(14) << "mbb_setup_ms" << std::setw(16)
      << "session_setup" << '\n';
    auto row = [&](const char* label, const RunSummary& s) {
        t << std::left << std::setw(10) << label << std::right << std::setw(14)
          << ms(detail::setup_of(s, "fbb")) << std::setw(14)
          << ms(detail::setup_of(s, "mbb")) << std::setw(16) << ms(detail::setup_any(s))
          << '\n';
    };
    row("fbb-only", r.fbb_only);
    row("mbb-only", r.mbb_only);
    row("fmc", r.fmc);
    return t.str();
}

inline nlohmann::json comparison_json(const ComparisonResult& r) {
    nlohmann::json j;
    j["scenario"] = r.scenario;
    j["direction"] = r.direction;
    j["app"] = r.app;
    j["fbb_only"] = to_json(r.fbb_only);
    j["mbb_only"] = to_json(r.mbb_only);
    j["fmc"] = to_json(r.fmc);
    for (const auto& [access, u] : r.utilization) j["utilization"][access] = u;
    return j;
}

} // namespace hagsim
