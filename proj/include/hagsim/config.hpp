#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hagsim/atsss.hpp"
#include "hagsim/topology.hpp"
#include "hagsim/transport.hpp"
#include "hagsim/workload.hpp"

namespace hagsim {

// Config problems carry the offending field so the CLI can print a
// structured parse error and exit with code 2.
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& field, const std::string& reason)
        : std::runtime_error("config error: field '" + field + "': " + reason),
          field(field), reason(reason) {}
    std::string field;
    std::string reason;
};

// Defaults for the two-access testbed: MBB 20/5 Mbps with 26.5 ms one-way
// delay (53 ms RTT), FBB 70/17 Mbps with 6.5 ms one-way delay (13 ms RTT).
// The FBB figures are calibration constants (the measured fixed-line
// averages are not published); the uplink value is tuned so the aggregated
// uplink rate lands at the ~18 Mbps scale. Queue capacity defaults to one
// bandwidth-delay product per link (rate x that link's one-way delay),
// rounded up to whole frames.
inline constexpr std::uint64_t kFrameBytes = 1500;

inline std::uint64_t default_queue_cap(std::uint64_t rate_bps, SimTime owd) {
    const std::uint64_t bdp_bytes = rate_bps * owd.micros / 8 / 1000000;
    const std::uint64_t frames = (bdp_bytes + kFrameBytes - 1) / kFrameBytes;
    return std::max<std::uint64_t>(frames, 1) * kFrameBytes;
}

struct ExperimentConfig {
    TopologyMode mode = TopologyMode::converged_core;
    std::vector<AccessSpec> accesses;
    SimTime node_proc_delay = SimTime::us(500);

    TransportOptions transport;
    AdvertiseMode advertise = AdvertiseMode::standard;

    std::vector<AtsssPolicy> policies;
    SimTime monitor_window = SimTime::sec(1);
    SimTime cp_delay = SimTime::ms(53); // one MBB RTT

    std::vector<WorkloadSpec> workloads;

    std::uint64_t seed = 1;
    SimTime t_end = SimTime::sec(300);

    // scheduled access failures: (access, at, up/down)
    struct LinkEvent {
        std::string access;
        SimTime at;
        bool up;
    };
    std::vector<LinkEvent> link_events;

    void validate() const {
        if (accesses.empty()) throw ConfigError("accesses", "at least one access required");
        for (std::size_t i = 0; i < accesses.size(); ++i) {
            const auto& a = accesses[i];
            if (a.id.empty()) throw ConfigError("accesses[].id", "must be non-empty");
            for (std::size_t j = i + 1; j < accesses.size(); ++j)
                if (accesses[j].id == a.id)
                    throw ConfigError("accesses[].id", "duplicate access id '" + a.id + "'");
            check_link(a.id + ".downlink", a.downlink);
            check_link(a.id + ".uplink", a.uplink);
        }
        if (advertise == AdvertiseMode::fast && mode != TopologyMode::converged_core)
            throw ConfigError("transport.advertise_mode",
                              "fast advertisement requires converged-core topology");
        if (mode == TopologyMode::converged_core && policies.empty())
            throw ConfigError("policy", "converged-core topology requires ATSSS policies");
        if (!policies.empty()) {
            bool has_default = false;
            for (const auto& p : policies) {
                try {
                    p.validate();
                } catch (const std::invalid_argument& e) {
                    throw ConfigError("policy." + p.service_class, e.what());
                }
                if (p.service_class == "default") has_default = true;
                for (const auto& acc : p.access_priority) {
                    bool known = false;
                    for (const auto& a : accesses)
                        if (a.id == acc) known = true;
                    if (!known)
                        throw ConfigError("policy." + p.service_class,
                                          "references unknown access '" + acc + "'");
                }
            }
            if (!has_default)
                throw ConfigError("policy", "a 'default' service class entry is required");
        }
        if (workloads.empty()) throw ConfigError("workloads", "at least one workload required");
        for (const auto& w : workloads)
            if (w.transfer_bytes == 0)
                throw ConfigError("workloads[].transfer_bytes", "must be > 0");
        for (const auto& e : link_events) {
            bool known = false;
            for (const auto& a : accesses)
                if (a.id == e.access) known = true;
            if (!known)
                throw ConfigError("link_events[].access",
                                  "unknown access '" + e.access + "'");
        }
        if (transport.mss == 0 || transport.mss + kHeaderBytes > kFrameBytes)
            throw ConfigError("transport.mss_bytes", "mss must fit a 1500-byte frame");
    }

private:
    static void check_link(const std::string& which, const LinkSpec& l) {
        if (l.rate_bps == 0) throw ConfigError(which + ".rate_bps", "must be > 0");
        if (l.loss_prob < 0.0 || l.loss_prob > 1.0)
            throw ConfigError(which + ".loss_prob", "must be within [0,1]");
        if (l.queue_cap_bytes < kFrameBytes)
            throw ConfigError(which + ".queue_cap_bytes",
                              "must hold at least one 1500-byte frame");
    }
};

// The measured testbed parameters as a ready-to-run two-access configuration.
inline ExperimentConfig default_testbed_config() {
    ExperimentConfig cfg;
    cfg.mode = TopologyMode::converged_core;

    AccessSpec fbb;
    fbb.id = "fbb";
    fbb.downlink = LinkSpec{70'000'000, SimTime::us(6500), 0, 0.0, true};
    fbb.uplink = LinkSpec{17'000'000, SimTime::us(6500), 0, 0.0, true};
    AccessSpec mbb;
    mbb.id = "mbb";
    mbb.downlink = LinkSpec{20'000'000, SimTime::us(26500), 0, 0.0, true};
    mbb.uplink = LinkSpec{5'000'000, SimTime::us(26500), 0, 0.0, true};
    for (auto* a : {&fbb, &mbb}) {
        a->downlink.queue_cap_bytes = default_queue_cap(a->downlink.rate_bps, a->downlink.owd);
        a->uplink.queue_cap_bytes = default_queue_cap(a->uplink.rate_bps, a->uplink.owd);
    }
    cfg.accesses = {fbb, mbb};

    AtsssPolicy split;
    split.service_class = "default";
    split.mode = PolicyMode::split;
    split.access_priority = {"fbb", "mbb"};
    AtsssPolicy bulk = split;
    bulk.service_class = "bulk";
    cfg.policies = {split, bulk};

    cfg.workloads = {WorkloadSpec{}};
    return cfg;
}

// --- JSON (de)serialization -------------------------------------------

namespace detail {

inline const nlohmann::json& need(const nlohmann::json& j, const std::string& key,
                                  const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(path + key, "missing");
    return *it;
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    return it->get<T>();
}

inline LinkSpec parse_link(const nlohmann::json& j, const std::string& path) {
    LinkSpec l;
    l.rate_bps = need(j, "rate_bps", path).get<std::uint64_t>();
    l.owd = SimTime::us(need(j, "owd_us", path).get<std::uint64_t>());
    l.loss_prob = get_or(j, "loss_prob", 0.0);
    l.up = get_or(j, "state", std::string("up")) != "down";
    l.queue_cap_bytes = get_or<std::uint64_t>(j, "queue_cap_bytes", 0);
    if (l.queue_cap_bytes == 0) l.queue_cap_bytes = default_queue_cap(l.rate_bps, l.owd);
    return l;
}

inline TopologyMode parse_mode(const std::string& s) {
    if (s == "endpoint-mptcp") return TopologyMode::endpoint_mptcp;
    if (s == "hag") return TopologyMode::hag;
    if (s == "converged-core") return TopologyMode::converged_core;
    throw ConfigError("topology", "unknown mode '" + s + "'");
}

inline PolicyMode parse_policy_mode(const std::string& s) {
    if (s == "steer") return PolicyMode::steer;
    if (s == "switch") return PolicyMode::switch_;
    if (s == "split") return PolicyMode::split;
    throw ConfigError("policy.mode", "unknown mode '" + s + "'");
}

inline AtsssPolicy parse_policy(const nlohmann::json& j) {
    AtsssPolicy p;
    p.service_class = need(j, "service_class", "policy.").get<std::string>();
    p.mode = parse_policy_mode(need(j, "mode", "policy.").get<std::string>());
    p.access_priority =
        need(j, "access_priority", "policy.").get<std::vector<std::string>>();
    p.hysteresis = get_or(j, "hysteresis", 0.1);
    if (j.contains("thresholds")) {
        const auto& t = j["thresholds"];
        if (t.contains("min_throughput_bps"))
            p.thresholds.min_throughput_bps = t["min_throughput_bps"].get<double>();
        if (t.contains("max_rtt_ms"))
            p.thresholds.max_rtt =
                SimTime::us(static_cast<std::uint64_t>(t["max_rtt_ms"].get<double>() * 1000));
        if (t.contains("max_loss_rate"))
            p.thresholds.max_loss_rate = t["max_loss_rate"].get<double>();
    }
    return p;
}

inline WorkloadSpec parse_workload(const nlohmann::json& j) {
    WorkloadSpec w;
    w.app = app_from_string(need(j, "app", "workloads[].").get<std::string>());
    const std::string dir = need(j, "direction", "workloads[].").get<std::string>();
    if (dir == "downlink")
        w.bulk_dir = StreamDir::server_to_client;
    else if (dir == "uplink")
        w.bulk_dir = StreamDir::client_to_server;
    else
        throw ConfigError("workloads[].direction", "must be 'downlink' or 'uplink'");
    w.transfer_bytes = get_or<std::uint64_t>(j, "transfer_bytes", 100'000'000);
    w.service_class = get_or(j, "service_class", std::string("bulk"));
    w.start_at = SimTime::us(get_or<std::uint64_t>(j, "start_at_us", 0));
    if (j.contains("setup")) {
        const auto& s = j["setup"];
        ExchangeProfile prof = default_profile(w.app);
        prof.exchanges = get_or(s, "exchanges", prof.exchanges);
        prof.parallel_group = get_or(s, "parallel_group", prof.parallel_group);
        if (s.contains("total_processing_ms"))
            prof.total_processing = SimTime::us(static_cast<std::uint64_t>(
                s["total_processing_ms"].get<double>() * 1000));
        prof.request_bytes = get_or(s, "request_bytes", prof.request_bytes);
        prof.response_bytes = get_or(s, "response_bytes", prof.response_bytes);
        w.profile_override = prof;
    }
    return w;
}

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using namespace detail;
    ExperimentConfig cfg;
    try {
        cfg.mode = parse_mode(need(j, "topology", "").get<std::string>());
        cfg.node_proc_delay =
            SimTime::us(get_or<std::uint64_t>(j, "node_proc_delay_us", 500));

        for (const auto& a : need(j, "accesses", "")) {
            AccessSpec spec;
            spec.id = need(a, "id", "accesses[].").get<std::string>();
            spec.downlink = parse_link(need(a, "downlink", "accesses[]."),
                                       "accesses[" + spec.id + "].downlink.");
            spec.uplink = parse_link(need(a, "uplink", "accesses[]."),
                                     "accesses[" + spec.id + "].uplink.");
            cfg.accesses.push_back(std::move(spec));
        }

        if (j.contains("transport")) {
            const auto& t = j["transport"];
            cfg.transport.mss = get_or<std::uint32_t>(t, "mss_bytes", 1440);
            cfg.transport.initial_cwnd_mss = get_or<std::uint32_t>(t, "initial_cwnd_mss", 10);
            const std::string adv = get_or(t, "advertise_mode", std::string("standard"));
            if (adv == "fast")
                cfg.advertise = AdvertiseMode::fast;
            else if (adv == "standard")
                cfg.advertise = AdvertiseMode::standard;
            else
                throw ConfigError("transport.advertise_mode", "must be standard|fast");
        }

        if (j.contains("policies"))
            for (const auto& p : j["policies"]) cfg.policies.push_back(parse_policy(p));
        cfg.monitor_window =
            SimTime::us(get_or<std::uint64_t>(j, "monitor_window_us", 1'000'000));
        cfg.cp_delay = SimTime::us(get_or<std::uint64_t>(j, "cp_delay_us", 53'000));

        for (const auto& w : need(j, "workloads", ""))
            cfg.workloads.push_back(parse_workload(w));

        cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
        cfg.t_end = SimTime::us(get_or<std::uint64_t>(j, "t_end_us", 120'000'000));

        if (j.contains("link_events")) {
            for (const auto& e : j["link_events"]) {
                ExperimentConfig::LinkEvent ev;
                ev.access = need(e, "access", "link_events[].").get<std::string>();
                ev.at = SimTime::us(need(e, "at_us", "link_events[].").get<std::uint64_t>());
                ev.up = get_or(e, "state", std::string("down")) == "up";
                cfg.link_events.push_back(std::move(ev));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("(json)", e.what());
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("(file)", "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("(file)", std::string("invalid json: ") + e.what());
    }
    // policies may live in a separate document, referenced relative to the
    // config file's directory
    if (j.contains("policy_file")) {
        std::filesystem::path pf = j["policy_file"].get<std::string>();
        if (pf.is_relative()) pf = std::filesystem::path(path).parent_path() / pf;
        std::ifstream pfs(pf);
        if (!pfs) throw ConfigError("policy_file", "cannot open '" + pf.string() + "'");
        nlohmann::json pj;
        try {
            pfs >> pj;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("policy_file", std::string("invalid json: ") + e.what());
        }
        j["policies"] = pj.contains("policies") ? pj["policies"] : pj;
    }
    return parse_config(j);
}

} // namespace hagsim
