#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hagsim/config.hpp"
#include "hagsim/metrics.hpp"
#include "hagsim/workload.hpp"

namespace hagsim {

struct DecisionEntry {
    SimTime time;
    std::uint64_t flow;
    std::string kind;
    std::string detail;
};

struct FlowSummary {
    std::uint64_t flow = 0;
    std::string app;
    std::string direction;
    std::string service_class;
    std::uint64_t transfer_bytes = 0;
    SimTime start_at;
    bool rejected = false; // steering failure at flow start
    bool completed = false;
    std::optional<SimTime> completion_time; // relative to start_at
    std::map<std::string, std::optional<SimTime>> setup_time; // per access
    SteadyStateRates steady;
};

// Derived view of one run. Every field is recomputable from the trace (plus
// the config it was run with); the decision log is additionally emitted as
// its own artifact.
struct RunSummary {
    std::string label;
    std::uint64_t seed = 0;
    std::string mode;
    std::string advertise;
    std::vector<FlowSummary> flows;
    DropCounts drops;
    std::vector<DecisionEntry> decisions;

    bool all_completed() const {
        for (const auto& f : flows)
            if (!f.completed) return false;
        return !flows.empty();
    }
};

namespace detail {

// Full per-run state: engine, topology, transport, policy runtime and
// workloads for every configured flow. One SimRun per run; runs never share
// mutable state, so scenario runs can execute in parallel threads.
class SimRun {
public:
    explicit SimRun(const ExperimentConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        topo_ = build_topology(ev_, trace_, cfg_.mode, cfg_.accesses, cfg_.seed,
                               cfg_.node_proc_delay);
        if (topo_.has_atsss()) {
            dist_ = std::make_unique<PolicyDistribution>(ev_);
            dist_->install(cfg_.policies);
            // initial conveyance happens before any workload starts
            dist_->convey_policy(TableLocation::ue, SimTime::zero());
            dist_->convey_policy(TableLocation::upf, SimTime::zero());
        }
        for (auto& access : topo_.accesses) {
            auto dispatch = [this](const Packet& p) { route(p); };
            access.down->set_deliver(dispatch);
            access.up->set_deliver(dispatch);
        }
        topo_.observe_state_changes([this](const std::string& access, bool up) {
            on_access_state(access, up);
        });

        std::uint64_t next_flow = 1;
        for (const auto& w : cfg_.workloads) {
            auto fl = std::make_unique<FlowRuntime>();
            fl->id = next_flow++;
            fl->spec = w;
            flows_.push_back(std::move(fl));
        }
        for (auto& fl : flows_) {
            FlowRuntime* p = fl.get();
            ev_.schedule(p->spec.start_at, [this, p] { start_flow(*p); });
        }
        for (const auto& e : cfg_.link_events) {
            ev_.schedule(e.at, [this, e] {
                topo_.set_access_state(e.access, e.up, ev_.now());
            });
        }
    }

    void run() { ev_.run_until(cfg_.t_end); }

    const TraceLog& trace() const { return trace_; }
    Topology& topology() { return topo_; }
    EventQueue& events() { return ev_; }
    const std::vector<DecisionEntry>& decisions() const { return decisions_; }

    struct FlowRuntime {
        std::uint64_t id = 0;
        WorkloadSpec spec;
        bool rejected = false;
        std::unique_ptr<Connection> conn;
        std::unique_ptr<Application> app;
        std::unique_ptr<FlowMonitor> monitor;
        std::unique_ptr<FlowPolicyController> controller;
    };

    const std::vector<std::unique_ptr<FlowRuntime>>& flows() const { return flows_; }

private:
    void route(const Packet& p) {
        auto it = by_flow_.find(p.flow_id);
        if (it != by_flow_.end()) it->second->conn->on_packet(p);
    }

    void start_flow(FlowRuntime& fl) {
        std::vector<std::string> order;   // subflow creation order, primary first
        std::vector<std::string> active;  // normal-priority set
        bool split = false;

        if (topo_.has_atsss()) {
            const AtsssPolicy& policy =
                dist_->enforce(fl.spec.ue_initiated(), fl.spec.service_class);
            std::vector<AccessState> states;
            for (const auto& a : topo_.accesses)
                states.push_back(AccessState{a.id, topo_.access_up(a.id), {}, {}, {}});
            active = select_access(policy, states);
            if (active.empty()) {
                fl.rejected = true;
                decisions_.push_back(DecisionEntry{ev_.now(), fl.id, "steering_failure",
                                                   "no access satisfies policy '" +
                                                       policy.service_class + "'"});
                return;
            }
            split = policy.mode == PolicyMode::split && active.size() > 1;
            order = active;
            for (const auto& a : topo_.accesses) {
                bool used = false;
                for (const auto& id : order)
                    if (id == a.id) used = true;
                if (!used) order.push_back(a.id); // joinable later as backup
            }
            fl.monitor = std::make_unique<FlowMonitor>(cfg_.monitor_window);
            fl.controller = std::make_unique<FlowPolicyController>(policy, cfg_.monitor_window);
            fl.controller->activate(active.front(), split);
            decisions_.push_back(DecisionEntry{
                ev_.now(), fl.id, split ? "start_split" : "steer",
                "class '" + fl.spec.service_class + "' on '" + active.front() + "'"});
        } else {
            // HAG / endpoint aggregation: no policy plane, all paths split
            for (const auto& a : topo_.accesses) order.push_back(a.id);
            active = order;
            split = order.size() > 1;
        }

        fl.conn = std::make_unique<Connection>(ev_, topo_, fl.id, cfg_.transport,
                                               cfg_.advertise);
        for (const auto& id : order) fl.conn->add_subflow(id);
        for (std::size_t i = 0; i < order.size(); ++i) {
            const bool normal =
                std::find(active.begin(), active.end(), order[i]) != active.end();
            fl.conn->set_subflow_priority(static_cast<int>(i),
                                          normal ? SubflowPriority::normal
                                                 : SubflowPriority::backup);
        }
        by_flow_[fl.id] = &fl;

        if (fl.monitor) {
            FlowRuntime* p = &fl;
            fl.conn->set_ack_observer([this, p](const std::string& access,
                                                std::uint64_t acked, std::uint64_t rtt_us,
                                                std::uint32_t losses) {
                p->monitor->update(access, ev_.now(), acked, rtt_us, losses);
            });
            schedule_policy_tick(*p);
        }

        fl.app = std::make_unique<Application>(ev_, *fl.conn, fl.spec);
        fl.app->start();
    }

    void schedule_policy_tick(FlowRuntime& fl) {
        FlowRuntime* p = &fl;
        ev_.schedule(ev_.now() + cfg_.monitor_window, [this, p] {
            if (p->app && !p->app->bulk_complete()) {
                if (p->monitor->has_full_window(ev_.now())) evaluate_flow(*p);
                schedule_policy_tick(*p);
            }
        });
    }

    std::vector<AccessState> monitored_states(FlowRuntime& fl) {
        std::vector<AccessState> states;
        for (const auto& a : topo_.accesses)
            states.push_back(fl.monitor->state(a.id, topo_.access_up(a.id), ev_.now()));
        return states;
    }

    void evaluate_flow(FlowRuntime& fl) {
        const Decision d = fl.controller->evaluate(monitored_states(fl), ev_.now());
        apply_decision(fl, d);
    }

    void apply_decision(FlowRuntime& fl, const Decision& d) {
        if (d.kind == Decision::Kind::stay) return;
        decisions_.push_back(DecisionEntry{ev_.now(), fl.id,
                                           to_string(d.kind),
                                           d.to + " (" + d.reason + ")"});
        // The SMF decides; the command reaches the UP enforcement points one
        // control-plane delay later. Transport-level recovery keeps the flow
        // alive in the meantime.
        FlowRuntime* p = &fl;
        const Decision decision = d;
        const std::string primary = fl.controller->current_access();
        ev_.schedule(ev_.now() + cfg_.cp_delay, [this, p, decision, primary] {
            deliver_decision(*p, decision, primary);
        });
    }

    void deliver_decision(FlowRuntime& fl, const Decision& d, const std::string& primary) {
        Connection& conn = *fl.conn;
        switch (d.kind) {
            case Decision::Kind::switch_to:
                for (std::size_t i = 0; i < conn.subflow_count(); ++i)
                    conn.set_subflow_priority(
                        static_cast<int>(i),
                        conn.subflow_access(static_cast<int>(i)) == d.to
                            ? SubflowPriority::normal
                            : SubflowPriority::backup);
                break;
            case Decision::Kind::start_split:
                for (std::size_t i = 0; i < conn.subflow_count(); ++i) {
                    const std::string& acc = conn.subflow_access(static_cast<int>(i));
                    if (acc == primary || acc == d.to)
                        conn.set_subflow_priority(static_cast<int>(i),
                                                  SubflowPriority::normal);
                }
                break;
            case Decision::Kind::stop_split:
                for (std::size_t i = 0; i < conn.subflow_count(); ++i)
                    conn.set_subflow_priority(
                        static_cast<int>(i),
                        conn.subflow_access(static_cast<int>(i)) == primary
                            ? SubflowPriority::normal
                            : SubflowPriority::backup);
                break;
            case Decision::Kind::stay: break;
        }
    }

    void on_access_state(const std::string& access, bool up) {
        // Availability changes act immediately; threshold evaluation waits
        // for its window.
        if (up) return;
        for (auto& fl : flows_) {
            if (!fl->controller || !fl->conn || fl->rejected) continue;
            if (fl->app && fl->app->bulk_complete()) continue;
            if (fl->controller->current_access() != access &&
                !fl->controller->split_active())
                continue;
            const Decision d = fl->controller->evaluate(monitored_states(*fl), ev_.now());
            apply_decision(*fl, d);
        }
    }

    ExperimentConfig cfg_;
    EventQueue ev_;
    TraceLog trace_;
    Topology topo_;
    std::unique_ptr<PolicyDistribution> dist_;
    std::vector<std::unique_ptr<FlowRuntime>> flows_;
    std::map<std::uint64_t, FlowRuntime*> by_flow_;
    std::vector<DecisionEntry> decisions_;
};

} // namespace detail

// Builds the summary purely from the trace + config, so it can always be
// re-derived from the emitted artifacts.
inline RunSummary summarize(const ExperimentConfig& cfg, const TraceLog& trace,
                            const std::vector<DecisionEntry>& decisions,
                            const std::vector<bool>& rejected,
                            const std::string& label) {
    RunSummary s;
    s.label = label;
    s.seed = cfg.seed;
    s.mode = to_string(cfg.mode);
    s.advertise = cfg.advertise == AdvertiseMode::fast ? "fast" : "standard";
    s.decisions = decisions;
    s.drops = count_drops(trace.records());

    std::uint64_t flow_id = 1;
    for (std::size_t i = 0; i < cfg.workloads.size(); ++i, ++flow_id) {
        const auto& w = cfg.workloads[i];
        FlowSummary f;
        f.flow = flow_id;
        f.app = to_string(w.app);
        f.direction = w.bulk_dir == StreamDir::server_to_client ? "downlink" : "uplink";
        f.service_class = w.service_class;
        f.transfer_bytes = w.transfer_bytes;
        f.start_at = w.start_at;
        f.rejected = i < rejected.size() && rejected[i];
        for (const auto& a : cfg.accesses)
            f.setup_time[a.id] =
                measure_setup_time(trace.records(), a.id, flow_id, w.start_at);
        const auto done = completion_from_trace(trace.records(), flow_id, w.transfer_bytes);
        f.completed = done.has_value();
        if (done) f.completion_time = *done - w.start_at;
        f.steady = steady_state_rates(trace.records(), flow_id, w.transfer_bytes);
        s.flows.push_back(std::move(f));
    }
    return s;
}

inline nlohmann::json to_json(const RunSummary& s) {
    nlohmann::json j;
    j["label"] = s.label;
    j["seed"] = s.seed;
    j["mode"] = s.mode;
    j["advertise"] = s.advertise;
    j["flows"] = nlohmann::json::array();
    for (const auto& f : s.flows) {
        nlohmann::json jf;
        jf["flow"] = f.flow;
        jf["app"] = f.app;
        jf["direction"] = f.direction;
        jf["service_class"] = f.service_class;
        jf["transfer_bytes"] = f.transfer_bytes;
        jf["start_at_us"] = f.start_at.micros;
        jf["rejected"] = f.rejected;
        jf["completed"] = f.completed;
        if (f.completion_time)
            jf["completion_time_us"] = f.completion_time->micros;
        else
            jf["completion_time_us"] = nullptr;
        nlohmann::json setup = nlohmann::json::object();
        for (const auto& [access, t] : f.setup_time) {
            if (t)
                setup[access] = t->micros;
            else
                setup[access] = nullptr;
        }
        jf["setup_time_us"] = setup;
        nlohmann::json steady;
        steady["valid"] = f.steady.valid;
        if (f.steady.valid) {
            steady["t_first_data_us"] = f.steady.t_first_data.micros;
            steady["t_95_us"] = f.steady.t_95.micros;
            steady["aggregate_bps"] = f.steady.aggregate_bps;
            nlohmann::json per;
            for (const auto& [access, bps] : f.steady.per_access_bps) per[access] = bps;
            steady["per_access_bps"] = per;
        }
        jf["steady_state"] = steady;
        j["flows"].push_back(jf);
    }
    nlohmann::json drops;
    drops["total"] = s.drops.total;
    for (const auto& [link, n] : s.drops.per_link) drops[link] = n;
    j["drops"] = drops;
    j["decisions"] = nlohmann::json::array();
    for (const auto& d : s.decisions) {
        j["decisions"].push_back({{"time_us", d.time.micros},
                                  {"flow", d.flow},
                                  {"kind", d.kind},
                                  {"detail", d.detail}});
    }
    return j;
}

inline void write_rates_csv(const TraceLog& trace, const std::string& path,
                            SimTime interval = SimTime::sec(1)) {
    const MetricSeries series = sample_link_rate(trace.records(), interval);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open rates file: " + path);
    f << "interval_start_us,access,rate_bps\n";
    for (std::size_t i = 0; i < series.aggregate_bps.size(); ++i) {
        const std::uint64_t t0 = static_cast<std::uint64_t>(i) * interval.micros;
        for (const auto& a : series.accesses) {
            std::ostringstream v;
            v << series.rate_bps.at(a)[i];
            f << t0 << ',' << a << ',' << v.str() << '\n';
        }
        std::ostringstream v;
        v << series.aggregate_bps[i];
        f << t0 << ",aggregate," << v.str() << '\n';
    }
}

inline void write_decisions_csv(const std::vector<DecisionEntry>& decisions,
                                const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open decisions file: " + path);
    f << "time_us,flow,kind,detail\n";
    for (const auto& d : decisions)
        f << d.time.micros << ',' << d.flow << ',' << d.kind << ",\"" << d.detail
          << "\"\n";
}

// Runs one experiment. With a non-empty out_dir, writes trace.csv,
// rates.csv, decisions.csv and summary.json there. Deterministic given the
// config and seed.
inline RunSummary run_experiment(const ExperimentConfig& cfg,
                                 const std::string& out_dir = "",
                                 const std::string& label = "run") {
    detail::SimRun sim(cfg);
    sim.run();

    std::vector<bool> rejected;
    for (const auto& fl : sim.flows()) rejected.push_back(fl->rejected);
    RunSummary summary = summarize(cfg, sim.trace(), sim.decisions(), rejected, label);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        sim.trace().write_csv_file(out_dir + "/trace.csv");
        write_rates_csv(sim.trace(), out_dir + "/rates.csv");
        write_decisions_csv(sim.decisions(), out_dir + "/decisions.csv");
        std::ofstream f(out_dir + "/summary.json", std::ios::binary);
        f << to_json(summary).dump(2) << '\n';
    }
    return summary;
}

} // namespace hagsim
