// Command-line front end: wires the guidance solver, the voting mechanism,
// the fault campaign, the closed-loop demo, and the correlation benchmark
// into one binary with machine-readable outputs.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ftsim/commands.hpp"
#include "ftsim/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"desk-scale fault-tolerant flight computing suite"};
    app.set_version_flag("--version", std::string(ftsim::kToolVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int trials = 0;
    bool trials_set = false;

    auto* solve = app.add_subcommand("solve", "solve a guidance problem instance");
    solve->add_option("--config", config_path, "problem JSON")->required();
    solve->add_option("--out", out_path, "solution JSON path")->required();

    auto* campaign = app.add_subcommand("campaign", "run a bit-flip Monte Carlo campaign");
    campaign->add_option("--config", config_path, "campaign JSON")->required();
    campaign->add_option("--out", out_path, "output directory")->required();
    campaign->add_option("--seed", seed, "override base seed")
        ->each([&](const std::string&) { seed_set = true; });
    campaign->add_option("--trials", trials, "override trials per stage")
        ->each([&](const std::string&) { trials_set = true; });

    auto* acs = app.add_subcommand("acs", "run the replicated closed-loop demo");
    acs->add_option("--config", config_path, "scenario JSON")->required();
    acs->add_option("--out", out_path, "output directory")->required();
    acs->add_option("--seed", seed, "override scenario seed")
        ->each([&](const std::string&) { seed_set = true; });

    std::vector<int> sizes = {64, 128, 256, 512, 1024};
    int reps = 5;
    bool oracle = false;
    auto* lvs_bench = app.add_subcommand("lvs-bench", "time the correlation kernels");
    lvs_bench->add_option("--sizes", sizes, "power-of-two edge lengths")->delimiter(',');
    lvs_bench->add_option("--reps", reps, "repetitions per measurement");
    lvs_bench->add_option("--out", out_path, "timing CSV path")->required();
    lvs_bench->add_flag("--oracle", oracle, "append small-size direct-summation checks");

    std::vector<int> ladder = {10, 40, 110, 220};
    int scaling_reps = 3;
    auto* scaling = app.add_subcommand("scaling", "solve over a node ladder and time it");
    scaling->add_option("--ladder", ladder, "node counts")->delimiter(',');
    scaling->add_option("--reps", scaling_reps, "repetitions per node count");
    scaling->add_option("--out", out_path, "runtime CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    ftsim::cli::Overrides ov;
    if (seed_set) ov.seed = seed;
    if (trials_set) ov.trials = trials;

    if (solve->parsed()) return ftsim::cli::cmd_solve(config_path, out_path);
    if (campaign->parsed()) return ftsim::cli::cmd_campaign(config_path, out_path, ov);
    if (acs->parsed()) return ftsim::cli::cmd_acs(config_path, out_path, ov);
    if (lvs_bench->parsed()) return ftsim::cli::cmd_lvs_bench(sizes, reps, out_path, oracle);
    if (scaling->parsed()) return ftsim::cli::cmd_scaling(ladder, scaling_reps, out_path);
    return 1;
}
