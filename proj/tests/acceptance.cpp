// Acceptance suite: one line per criterion, nonzero exit if any fail.
//
//   1  decision-variable counts at N=40 and N=220
//   2  1-D reference solve vs switch-time enumeration, feasibility, and
//      initial-guess independence
//   3  fault-study structure: control baseline, stage ordering with margin,
//      silent-fault share of validation-stage upsets
//   4  vote masking under exhaustive fault subsets and tie handling
//   5  closed-loop demo: exact masking, dissent onset times, dissent rates
//   6  FFT and correlation against direct-summation oracles, Parseval at
//      1024x1024, shift-theorem peaks
//   7  runtime scaling over the node ladder
//   8  digest-identical reruns of the campaign and closed-loop commands

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ftsim/acs.hpp"
#include "ftsim/arbiter.hpp"
#include "ftsim/campaign.hpp"
#include "ftsim/commands.hpp"
#include "ftsim/guidance.hpp"
#include "ftsim/io.hpp"
#include "ftsim/lvs.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace ftsim;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& label, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion,
                label.c_str(), detail.c_str());
    if (!ok) ++g_failures;
}

guidance::GuidanceProblem reference_1d() {
    guidance::GuidanceProblem p;
    p.r0 = {0.0, 0.0, 100.0};
    p.g = {0.0, 0.0, -3.71};
    p.rho1 = 2.0;
    p.rho2 = 8.0;
    p.N = 20;
    p.dt = 0.75;
    return p;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// --- criterion 1 -------------------------------------------------------------

void criterion_variable_counts() {
    guidance::GuidanceProblem p = reference_1d();
    p.N = 40;
    int v40 = guidance::build_problem(p).decision_variables();
    p.N = 220;
    int v220 = guidance::build_problem(p).decision_variables();
    report(1, "decision-variable counts", v40 == 400 && v220 == 2200,
           fmt("N=40 -> %d, N=220 -> %d", v40, v220));
}

// --- criterion 2 -------------------------------------------------------------

void criterion_guidance_correctness() {
    guidance::GuidanceProblem p = reference_1d();

    guidance::GuidanceSolution sol = guidance::solve(p);
    bool converged = sol.status == guidance::SolveStatus::Converged;

    auto oracle_result = oracle::bang_off_bang_fuel(p);
    double rel = std::abs(sol.fuel_cost - oracle_result.fuel_cost) / oracle_result.fuel_cost;

    auto sim = oracle::forward_simulate(p, sol.thrust);
    double dev = 0.0;
    for (int k = 0; k < p.N; ++k) {
        auto uk = static_cast<std::size_t>(k);
        dev = std::max({dev, std::abs(sim[uk].rx - sol.trajectory[uk].r.x),
                        std::abs(sim[uk].ry - sol.trajectory[uk].r.y),
                        std::abs(sim[uk].rz - sol.trajectory[uk].r.z),
                        std::abs(sim[uk].vx - sol.trajectory[uk].v.x),
                        std::abs(sim[uk].vy - sol.trajectory[uk].v.y),
                        std::abs(sim[uk].vz - sol.trajectory[uk].v.z)});
    }

    guidance::SolveOptions zero_init;
    zero_init.init_mode = guidance::InitMode::Zero;
    guidance::GuidanceSolution alt = guidance::solve(p, zero_init);
    double init_gap = std::abs(sol.fuel_cost - alt.fuel_cost) /
                      std::max(sol.fuel_cost, alt.fuel_cost);

    bool ok = converged && oracle_result.found && rel <= 0.01 && dev <= 1e-9 &&
              alt.status == guidance::SolveStatus::Converged && init_gap <= 0.005;
    report(2, "guidance vs switch-time oracle",
           ok,
           fmt("fuel=%.4f oracle=%.4f rel=%.2e, resim-dev=%.2e, init-gap=%.2e", sol.fuel_cost,
               oracle_result.fuel_cost, rel, dev, init_gap));
}

// --- criterion 3 -------------------------------------------------------------

void criterion_fault_study() {
    fault::CampaignConfig cfg;
    cfg.problem = reference_1d();
    cfg.trials_per_stage = 100;

    fault::CampaignResult res = fault::run_campaign(cfg);

    double p_control = -1.0, p_init = -1.0, p_grad = -1.0, p_val = -1.0, silent_val = -1.0;
    for (const auto& s : res.stages) {
        switch (s.stage) {
            case fault::CampaignStage::Control: p_control = s.success_probability; break;
            case fault::CampaignStage::InitData: p_init = s.success_probability; break;
            case fault::CampaignStage::GradientIterate: p_grad = s.success_probability; break;
            case fault::CampaignStage::ValidationWorkset:
                p_val = s.success_probability;
                silent_val = s.silent_fault_rate;
                break;
        }
    }

    bool ok = p_control == 1.0 && p_init - p_grad >= 0.1 && p_val - p_grad >= 0.1 &&
              silent_val >= 0.5;
    report(3, "fault-study stage ordering", ok,
           fmt("P(control)=%.2f P(init)=%.2f P(gradient)=%.2f P(validation)=%.2f "
               "silent(validation)=%.2f",
               p_control, p_init, p_grad, p_val, silent_val));
}

// --- criterion 4 -------------------------------------------------------------

void criterion_vote_masking() {
    bool ok = true;
    std::string detail = "all subsets masked";
    std::vector<double> truth = {1.5, -2.0, 0.25, 8.0};

    for (int m = 1; m <= 3 && ok; ++m) {
        auto cfg = arbiter::make_config(m);
        const int replicas = cfg.replica_count;
        for (int mask = 1; mask < (1 << replicas) && ok; ++mask) {
            int corrupted = std::popcount(static_cast<unsigned>(mask));
            if (corrupted > m) continue;
            std::vector<arbiter::ReplicaOutput> outs;
            for (int r = 0; r < replicas; ++r) {
                arbiter::ReplicaOutput o;
                o.replica_id = r;
                o.payload = truth;
                if (mask & (1 << r)) {
                    o.payload[static_cast<std::size_t>(r % 4)] += 2.0 + r;
                }
                o.stage_label = "CHK";
                outs.push_back(std::move(o));
            }
            auto vr = arbiter::vote(outs, cfg);
            if (!vr.quorum_met || vr.arbitrated != truth) {
                ok = false;
                detail = fmt("masking failed for M=%d mask=%d", m, mask);
            }
            for (int r = 0; r < replicas && ok; ++r) {
                bool corrupt = (mask >> r) & 1;
                if (corrupt != (vr.dissenting.count(r) > 0)) {
                    ok = false;
                    detail = fmt("dissent set wrong for M=%d mask=%d", m, mask);
                }
            }
        }
    }

    // Over-capacity ties must fail quorum, never guess.
    for (int m = 1; m <= 3 && ok; ++m) {
        auto cfg = arbiter::make_config(m);
        const int replicas = cfg.replica_count;
        std::vector<arbiter::ReplicaOutput> outs;
        for (int r = 0; r < replicas; ++r) {
            arbiter::ReplicaOutput o;
            o.replica_id = r;
            o.payload = truth;
            // Two equal-size camps: replicas split between two corrupted
            // variants (and one singleton when the count is odd).
            if (r % 2 == 0) o.payload[0] += 100.0;
            if (r % 2 == 1) o.payload[0] -= 100.0;
            if (r == replicas - 1 && replicas % 2 == 1) o.payload[0] = 555.0;
            o.stage_label = "CHK";
            outs.push_back(std::move(o));
        }
        auto vr = arbiter::vote(outs, cfg);
        if (replicas % 2 == 0) {
            if (vr.quorum_met || !vr.fallback_used) {
                ok = false;
                detail = fmt("tie case not rejected for M=%d", m);
            }
        }
    }
    report(4, "vote masking (exhaustive, M in {1,2,3})", ok, detail);
}

// --- criterion 5 -------------------------------------------------------------

void criterion_acs_demo() {
    acs::Scenario sc = acs::default_demo_scenario();
    acs::ControllerConfig cfg;
    auto arb = arbiter::make_config(2, arbiter::Mode::Dynamic);
    acs::SimLog log = acs::simulate(sc, cfg, arb);

    bool identical = log.steps.size() == log.reference.size();
    for (std::size_t k = 0; identical && k < log.steps.size(); ++k) {
        identical = log.steps[k].arbitrated_u == log.reference[k].u &&
                    log.steps[k].theta == log.reference[k].theta &&
                    log.steps[k].omega == log.reference[k].omega;
    }

    double first1 = -1.0, first3 = -1.0;
    std::size_t post1 = 0, dis1 = 0, post3 = 0, dis3 = 0;
    for (const auto& st : log.steps) {
        bool d1 = (st.dissent_mask >> 1) & 1u;
        bool d3 = (st.dissent_mask >> 3) & 1u;
        if (d1 && first1 < 0) first1 = st.t;
        if (d3 && first3 < 0) first3 = st.t;
        if (st.t + 1e-12 >= 15.0) {
            ++post1;
            dis1 += d1;
        }
        if (st.t + 1e-12 >= 30.0) {
            ++post3;
            dis3 += d3;
        }
    }
    double rate1 = static_cast<double>(dis1) / static_cast<double>(post1);
    double rate3 = static_cast<double>(dis3) / static_cast<double>(post3);

    bool ok = identical && std::abs(first1 - 15.0) <= log.dt + 1e-12 &&
              std::abs(first3 - 30.0) <= log.dt + 1e-12 && rate1 >= 0.9 && rate3 >= 0.9;
    report(5, "closed-loop fault isolation", ok,
           fmt("masking=%s onset1=%.3fs onset3=%.3fs dissent1=%.0f%% dissent3=%.0f%%",
               identical ? "bit-identical" : "BROKEN", first1, first3, 100 * rate1,
               100 * rate3));
}

// --- criterion 6 -------------------------------------------------------------

void criterion_lvs_oracles() {
    double worst_fft = 0.0, worst_corr = 0.0;
    SplitMix64 rng(2718);
    for (int h : {1, 2, 4, 8, 16}) {
        for (int w : {1, 2, 4, 8, 16}) {
            lvs::Image a, b;
            a.width = b.width = w;
            a.height = b.height = h;
            a.samples.resize(static_cast<std::size_t>(w) * h);
            b.samples.resize(static_cast<std::size_t>(w) * h);
            for (auto& s : a.samples) s = rng.gaussian(0.0, 1.0);
            for (auto& s : b.samples) s = rng.gaussian(0.0, 1.0);

            auto spec = lvs::fft2_forward(a);
            auto ref = oracle::direct_dft2(a.samples, w, h);
            for (std::size_t i = 0; i < ref.size(); ++i) {
                worst_fft = std::max(worst_fft, std::abs(spec[i] - ref[i]));
            }

            auto corr = lvs::fft_correlate(a, b);
            auto sref = oracle::spatial_circular_correlation(a.samples, b.samples, w, h);
            for (std::size_t i = 0; i < sref.size(); ++i) {
                worst_corr = std::max(worst_corr, std::abs(corr.surface.samples[i] - sref[i]));
            }
        }
    }

    lvs::Image big = lvs::synthetic_image(1024, 31415);
    auto spec = lvs::fft2_forward(big);
    double space = 0.0;
    for (double s : big.samples) space += s * s;
    double freq = 0.0;
    for (const auto& v : spec) freq += std::norm(v);
    freq /= 1024.0 * 1024.0;
    double parseval_rel = std::abs(space - freq) / space;

    lvs::Image img = lvs::synthetic_image(64, 999);
    lvs::Image tpl = img;
    const int dr = 17, dc = 41;
    for (int r = 0; r < 64; ++r) {
        for (int c = 0; c < 64; ++c) {
            tpl.at(r, c) = img.at((r + dr) % 64, (c + dc) % 64);
        }
    }
    auto res = lvs::fft_correlate(img, tpl);
    bool shift_ok = res.peak_row == dr && res.peak_col == dc;

    bool ok = worst_fft <= 1e-9 && worst_corr <= 1e-9 && parseval_rel <= 1e-9 && shift_ok;
    report(6, "correlation kernel oracles", ok,
           fmt("dft-err=%.2e corr-err=%.2e parseval=%.2e peak=(%d,%d) want (17,41)",
               worst_fft, worst_corr, parseval_rel, res.peak_row, res.peak_col));
}

// --- criterion 7 -------------------------------------------------------------

void criterion_scaling() {
    auto rows = cli::run_scaling({10, 40, 110, 220}, 3);
    bool monotone = true;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].median_runtime_s < rows[i - 1].median_runtime_s) monotone = false;
    }
    bool converged = true;
    for (const auto& r : rows) {
        if (r.status != "CONVERGED") converged = false;
    }
    double t220 = rows.back().median_runtime_s;
    bool ok = monotone && converged && t220 < 60.0;
    report(7, "runtime scaling over the node ladder", ok,
           fmt("medians %.4fs / %.4fs / %.4fs / %.4fs, monotone=%s", rows[0].median_runtime_s,
               rows[1].median_runtime_s, rows[2].median_runtime_s, rows[3].median_runtime_s,
               monotone ? "yes" : "NO"));
}

// --- criterion 8 -------------------------------------------------------------

void criterion_determinism() {
    fs::path dir = fs::temp_directory_path() / "ftsim_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    io::json camp_cfg;
    camp_cfg["problem"] = io::to_json(reference_1d());
    camp_cfg["trials_per_stage"] = 100;
    camp_cfg["base_seed"] = 1;
    {
        std::ofstream f(dir / "campaign.json");
        f << camp_cfg.dump();
    }
    {
        std::ofstream f(dir / "scenario.json");
        f << io::to_json(acs::default_demo_scenario()).dump();
    }

    bool ok = true;
    std::string detail = "campaign and acs reruns digest-identical";
    if (cli::cmd_campaign((dir / "campaign.json").string(), (dir / "c1").string()) != 0 ||
        cli::cmd_campaign((dir / "campaign.json").string(), (dir / "c2").string()) != 0) {
        ok = false;
        detail = "campaign command failed";
    }
    if (ok) {
        for (const char* name : {"campaign_result.json", "trials.csv", "summary.csv"}) {
            if (io::digest_file(dir / "c1" / name) != io::digest_file(dir / "c2" / name)) {
                ok = false;
                detail = fmt("campaign %s digests differ", name);
            }
        }
    }
    if (ok && (cli::cmd_acs((dir / "scenario.json").string(), (dir / "a1").string()) != 0 ||
               cli::cmd_acs((dir / "scenario.json").string(), (dir / "a2").string()) != 0)) {
        ok = false;
        detail = "acs command failed";
    }
    if (ok) {
        for (const char* name : {"simlog.csv", "fault_report.jsonl"}) {
            if (io::digest_file(dir / "a1" / name) != io::digest_file(dir / "a2" / name)) {
                ok = false;
                detail = fmt("acs %s digests differ", name);
            }
        }
    }
    report(8, "seeded reruns reproduce data files", ok, detail);
}

}  // namespace

int main() {
    criterion_variable_counts();
    criterion_guidance_correctness();
    criterion_fault_study();
    criterion_vote_masking();
    criterion_acs_demo();
    criterion_lvs_oracles();
    criterion_scaling();
    criterion_determinism();

    if (g_failures == 0) {
        std::printf("acceptance: all 8 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria FAILED\n", g_failures);
    return 1;
}
