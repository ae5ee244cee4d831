// hagsim: deterministic desk-scale simulator of fixed-mobile convergence.
//
// Subcommands:
//   run       execute one experiment from a JSON config
//   fig5      link-utilization comparison (fbb-only / mbb-only / fmc)
//   fig6      session-setup-time comparison
//   failover  kill one access mid-transfer, optionally restore it
//
// Exit codes: 0 success, 2 config error, 3 transfer incomplete at t_end.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hagsim/hagsim.hpp"

namespace {

int exit_incomplete(const hagsim::RunSummary& s) {
    for (const auto& f : s.flows) {
        if (f.rejected) {
            std::cerr << "flow " << f.flow << ": rejected by steering policy\n";
            return 3;
        }
        if (!f.completed) {
            std::cerr << "flow " << f.flow << ": incomplete at t_end\n";
            return 3;
        }
    }
    return 0;
}

void print_summary(const hagsim::RunSummary& s) {
    std::cout << hagsim::to_json(s).dump(2) << '\n';
}

void write_comparison(const hagsim::ComparisonResult& r, const std::string& out_dir,
                      const std::string& table) {
    if (out_dir.empty()) return;
    std::filesystem::create_directories(out_dir);
    std::ofstream j(out_dir + "/comparison.json", std::ios::binary);
    j << hagsim::comparison_json(r).dump(2) << '\n';
    std::ofstream t(out_dir + "/comparison.txt", std::ios::binary);
    t << table;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hagsim - fixed-mobile convergence simulator"};
    app.require_subcommand(1);

    // run
    std::string cfg_path;
    std::optional<std::uint64_t> seed_override;
    std::string out_dir = "out";
    auto* run = app.add_subcommand("run", "run one experiment config");
    run->add_option("--config", cfg_path, "experiment config (json)")->required();
    run->add_option("--seed", seed_override, "override the config seed");
    run->add_option("--out", out_dir, "output directory");

    // fig5 / fig6
    std::string direction = "dl";
    std::string app_name = "scp";
    std::uint64_t seed = 1;
    std::uint64_t transfer = 100'000'000;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--direction", direction, "dl|ul")
            ->check(CLI::IsMember({"dl", "ul"}));
        cmd->add_option("--app", app_name, "scp|wget|iperf")
            ->check(CLI::IsMember({"scp", "wget", "iperf"}));
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--transfer-bytes", transfer, "bulk transfer size");
    };
    auto* fig5 = app.add_subcommand("fig5", "link-utilization comparison");
    add_common(fig5);
    auto* fig6 = app.add_subcommand("fig6", "session-setup comparison");
    add_common(fig6);

    // failover
    double kill_at_ms = 2000;
    std::optional<double> restore_at_ms;
    std::string kill_access = "fbb";
    auto* failover = app.add_subcommand("failover", "kill one access mid-transfer");
    failover->add_option("--kill-at", kill_at_ms, "kill time (ms)");
    failover->add_option("--restore-at", restore_at_ms, "restore time (ms)");
    failover->add_option("--access", kill_access, "access to kill");
    failover->add_option("--seed", seed, "master seed");
    failover->add_option("--out", out_dir, "output directory");
    failover->add_option("--transfer-bytes", transfer, "bulk transfer size");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            hagsim::ExperimentConfig cfg = hagsim::load_config_file(cfg_path);
            if (seed_override) cfg.seed = *seed_override;
            const auto summary = hagsim::run_experiment(cfg, out_dir);
            print_summary(summary);
            return exit_incomplete(summary);
        }
        if (fig5->parsed()) {
            const auto r = hagsim::scenario_fig5(direction, app_name, seed,
                                                 out_dir.empty() ? "" : out_dir + "/fig5",
                                                 transfer);
            const std::string table = hagsim::fig5_table(r);
            std::cout << table;
            write_comparison(r, out_dir.empty() ? "" : out_dir + "/fig5", table);
            return 0;
        }
        if (fig6->parsed()) {
            const auto r = hagsim::scenario_fig6(direction, app_name, seed,
                                                 out_dir.empty() ? "" : out_dir + "/fig6",
                                                 transfer);
            const std::string table = hagsim::fig6_table(r);
            std::cout << table;
            write_comparison(r, out_dir.empty() ? "" : out_dir + "/fig6", table);
            return 0;
        }
        if (failover->parsed()) {
            std::optional<hagsim::SimTime> restore;
            if (restore_at_ms)
                restore = hagsim::SimTime::us(
                    static_cast<std::uint64_t>(*restore_at_ms * 1000));
            const auto r = hagsim::scenario_failover(
                hagsim::SimTime::us(static_cast<std::uint64_t>(kill_at_ms * 1000)),
                restore, seed, out_dir.empty() ? "" : out_dir + "/failover", kill_access,
                transfer);
            print_summary(r.summary);
            if (r.switch_latency)
                std::cout << "switch latency: " << r.switch_latency->millis() << " ms\n";
            return exit_incomplete(r.summary);
        }
    } catch (const hagsim::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
