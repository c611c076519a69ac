#pragma once

// =============================================================================
// File formats: JSON configs and results, CSV tables, JSON-lines fault
// reports, and the run manifest. Every data-producing command records the
// files it wrote together with FNV-1a64 content digests so a re-run with
// the same config and seed can be checked for bit-identical data output.
// =============================================================================

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftsim/acs.hpp"
#include "ftsim/arbiter.hpp"
#include "ftsim/campaign.hpp"
#include "ftsim/common.hpp"
#include "ftsim/guidance.hpp"
#include "ftsim/lvs.hpp"
#include "ftsim/version.hpp"

namespace ftsim::io {

using nlohmann::json;

// Full-precision decimal form that parses back to the same double.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// -----------------------------------------------------------------------------
// Guidance problem and solution
// -----------------------------------------------------------------------------

inline json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 3) {
        throw ConfigError("config: field '" + field + "' must be a 3-element array");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json to_json(const guidance::GuidanceProblem& p) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["r0"] = to_json(p.r0);
    j["v0"] = to_json(p.v0);
    j["r_target"] = to_json(p.r_target);
    j["v_target"] = to_json(p.v_target);
    j["g"] = to_json(p.g);
    j["rho1"] = p.rho1;
    j["rho2"] = p.rho2;
    j["N"] = p.N;
    j["dt"] = p.dt;
    if (p.glide_slope_angle) j["glide_slope_angle"] = *p.glide_slope_angle;
    return j;
}

inline guidance::GuidanceProblem problem_from_json(const json& j) {
    guidance::GuidanceProblem p;
    try {
        p.r0 = vec3_from_json(j.at("r0"), "r0");
        p.v0 = vec3_from_json(j.at("v0"), "v0");
        p.r_target = vec3_from_json(j.at("r_target"), "r_target");
        p.v_target = vec3_from_json(j.at("v_target"), "v_target");
        p.g = vec3_from_json(j.at("g"), "g");
        p.rho1 = j.at("rho1").get<double>();
        p.rho2 = j.at("rho2").get<double>();
        p.N = j.at("N").get<int>();
        p.dt = j.at("dt").get<double>();
        if (j.contains("glide_slope_angle") && !j["glide_slope_angle"].is_null()) {
            p.glide_slope_angle = j["glide_slope_angle"].get<double>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: malformed guidance problem: ") + e.what());
    }
    return guidance::build_problem(p);
}

inline void solver_options_from_json(const json& j, guidance::SolveOptions& opts) {
    if (j.contains("eps_abs")) opts.eps_abs = j["eps_abs"].get<double>();
    if (j.contains("max_iters")) opts.max_iters = j["max_iters"].get<std::uint64_t>();
    if (j.contains("admm_rho")) opts.admm_rho = j["admm_rho"].get<double>();
    if (j.contains("excursion_guard")) opts.excursion_guard = j["excursion_guard"].get<double>();
    if (j.contains("equality_guard")) opts.equality_guard = j["equality_guard"].get<double>();
    if (j.contains("divergence_guard"))
        opts.divergence_guard = j["divergence_guard"].get<double>();
    if (j.contains("checkpoint_interval"))
        opts.checkpoint_interval = j["checkpoint_interval"].get<std::uint64_t>();
}

inline json to_json(const guidance::ValidationReport& r) {
    json j;
    j["dynamics_residual_inf"] = r.dynamics_residual_inf;
    j["boundary_error"] = r.boundary_error;
    j["thrust_bound_violation"] = r.thrust_bound_violation;
    j["cone_violation"] = r.cone_violation;
    j["glide_slope_violation"] =
        r.glide_slope_violation ? json(*r.glide_slope_violation) : json(nullptr);
    j["passed"] = r.passed;
    return j;
}

inline json to_json(const guidance::GuidanceSolution& s) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["status"] = guidance::to_string(s.status);
    j["decision_variables"] = s.decision_variables;
    j["iterations"] = s.iterations;
    j["runtime_seconds"] = s.runtime_seconds;
    j["fuel_cost"] = s.fuel_cost;
    j["dt"] = s.dt;
    j["primal_residual"] = s.primal_residual;
    j["dual_residual"] = s.dual_residual;
    j["validation"] = to_json(s.validation);

    json traj = json::array();
    for (const auto& node : s.trajectory) {
        traj.push_back({{"r", to_json(node.r)}, {"v", to_json(node.v)}});
    }
    j["trajectory"] = traj;
    json thrust = json::array();
    for (const auto& u : s.thrust) thrust.push_back(to_json(u));
    j["thrust"] = thrust;
    j["slack"] = s.slack;

    json cps = json::array();
    for (const auto& cp : s.checkpoints) {
        cps.push_back({{"label", cp.label}, {"data", cp.data}});
    }
    j["checkpoints"] = cps;
    return j;
}

// -----------------------------------------------------------------------------
// Fault campaign
// -----------------------------------------------------------------------------

inline fault::CampaignConfig campaign_config_from_json(const json& j) {
    fault::CampaignConfig cfg;
    try {
        cfg.problem = problem_from_json(j.at("problem"));
        if (j.contains("trials_per_stage")) {
            cfg.trials_per_stage = j["trials_per_stage"].get<int>();
        }
        if (j.contains("stages")) {
            cfg.stages.clear();
            for (const auto& s : j["stages"]) {
                cfg.stages.push_back(fault::campaign_stage_from_string(s.get<std::string>()));
            }
        }
        if (j.contains("base_seed")) cfg.base_seed = j["base_seed"].get<std::uint64_t>();
        if (j.contains("success_rel_cost")) {
            cfg.tolerances.success_rel_cost = j["success_rel_cost"].get<double>();
        }
        if (j.contains("solver")) solver_options_from_json(j["solver"], cfg.solver);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: malformed campaign config: ") + e.what());
    }
    return cfg;
}

inline json to_json(const fault::CampaignConfig& cfg) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["problem"] = to_json(cfg.problem);
    j["trials_per_stage"] = cfg.trials_per_stage;
    json stages = json::array();
    for (auto s : cfg.stages) stages.push_back(fault::to_string(s));
    j["stages"] = stages;
    j["base_seed"] = cfg.base_seed;
    j["success_rel_cost"] = cfg.tolerances.success_rel_cost;
    j["solver"] = {{"eps_abs", cfg.solver.eps_abs},
                   {"max_iters", cfg.solver.max_iters},
                   {"admm_rho", cfg.solver.admm_rho},
                   {"excursion_guard", cfg.solver.excursion_guard},
                   {"equality_guard", cfg.solver.equality_guard}};
    return j;
}

inline json to_json(const fault::CampaignResult& r) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["reference"] = {{"iterations", r.reference.iterations},
                      {"fuel_cost", r.reference.fuel_cost},
                      {"status", guidance::to_string(r.reference.status)},
                      {"iterate_size", r.reference.iterate_size},
                      {"workset_size", r.reference.workset_size}};
    json stages = json::array();
    for (const auto& s : r.stages) {
        stages.push_back({{"stage", fault::to_string(s.stage)},
                          {"trials", s.trials},
                          {"successes", s.successes},
                          {"detected", s.detected},
                          {"silent", s.silent},
                          {"success_probability", s.success_probability},
                          {"detected_fault_rate", s.detected_fault_rate},
                          {"silent_fault_rate", s.silent_fault_rate},
                          {"ci95", json::array({s.ci95_low, s.ci95_high})}});
    }
    j["stages"] = stages;

    json trials = json::array();
    for (const auto& t : r.trials) {
        json tj;
        tj["stage"] = fault::to_string(t.stage);
        tj["trial"] = t.trial_index;
        tj["seed"] = t.seed;
        tj["injected"] = t.injected;
        if (t.injected) {
            tj["scalar_index"] = t.spec.scalar_index;
            tj["bit_index"] = t.spec.bit_index;
            tj["bit_class"] = fault::to_string(t.bit_class);
            if (t.stage == fault::CampaignStage::GradientIterate) {
                tj["iteration"] = t.spec.iteration;
            }
            tj["pre_value"] = t.injection.pre_value;
            tj["post_value"] = t.injection.post_value;
        }
        tj["status"] = guidance::to_string(t.status);
        tj["fuel_cost"] = t.fuel_cost;
        tj["validation_passed"] = t.validation_passed;
        tj["outcome"] = fault::to_string(t.outcome);
        tj["detection"] = fault::to_string(t.detection);
        trials.push_back(std::move(tj));
    }
    j["trials"] = trials;
    return j;
}

inline void write_trials_csv(const fault::CampaignResult& r, std::ostream& out) {
    out << "stage,trial,seed,bit_index,scalar_index,bit_class,outcome,detection\n";
    for (const auto& t : r.trials) {
        out << fault::to_string(t.stage) << ',' << t.trial_index << ',' << t.seed << ',';
        if (t.injected) {
            out << t.spec.bit_index << ',' << t.spec.scalar_index << ','
                << fault::to_string(t.bit_class);
        } else {
            out << ",,";
        }
        out << ',' << fault::to_string(t.outcome) << ',' << fault::to_string(t.detection)
            << '\n';
    }
}

inline void write_stage_summary_csv(const fault::CampaignResult& r, std::ostream& out) {
    out << "stage,trials,successes,success_probability,detected_fault_rate,"
           "silent_fault_rate,ci95_low,ci95_high\n";
    for (const auto& s : r.stages) {
        out << fault::to_string(s.stage) << ',' << s.trials << ',' << s.successes << ','
            << fmt_double(s.success_probability) << ',' << fmt_double(s.detected_fault_rate)
            << ',' << fmt_double(s.silent_fault_rate) << ',' << fmt_double(s.ci95_low) << ','
            << fmt_double(s.ci95_high) << '\n';
    }
}

// -----------------------------------------------------------------------------
// Fault report (JSON lines) and closed-loop log
// -----------------------------------------------------------------------------

inline void write_fault_report_jsonl(const arbiter::FaultReport& report, std::ostream& out) {
    for (const auto& ev : report.events) {
        json j;
        j["step"] = ev.step;
        j["stage"] = ev.stage_label;
        j["dissenters"] = ev.dissenting;
        j["deviation"] = ev.max_deviation;
        j["action"] = ev.action;
        out << j.dump() << '\n';
    }
}

inline arbiter::FaultReport fault_report_from_jsonl(std::istream& in) {
    arbiter::FaultReport report;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        arbiter::FaultEvent ev;
        ev.step = j.at("step").get<std::uint64_t>();
        ev.stage_label = j.at("stage").get<std::string>();
        ev.dissenting = j.at("dissenters").get<std::vector<int>>();
        ev.max_deviation = j.at("deviation").get<double>();
        ev.action = j.at("action").get<std::string>();
        report.events.push_back(std::move(ev));
    }
    return report;
}

inline acs::Scenario scenario_from_json(const json& j) {
    acs::Scenario sc;
    try {
        if (j.contains("duration")) sc.duration = j["duration"].get<double>();
        if (j.contains("seed")) sc.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("command")) {
            sc.command.clear();
            for (const auto& c : j["command"]) {
                sc.command.push_back({c.at("t").get<double>(), c.at("angle").get<double>()});
            }
        }
        if (j.contains("fault_events")) {
            sc.fault_events.clear();
            for (const auto& e : j["fault_events"]) {
                acs::GainFaultEvent ev;
                ev.time = e.at("t").get<double>();
                ev.replica_id = e.at("replica").get<int>();
                std::string param = e.at("param").get<std::string>();
                if (param == "kp") {
                    ev.param = acs::GainParam::Kp;
                } else if (param == "kd") {
                    ev.param = acs::GainParam::Kd;
                } else {
                    throw ConfigError("config: fault param must be \"kp\" or \"kd\"");
                }
                ev.bit_index = e.at("bit").get<int>();
                sc.fault_events.push_back(ev);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: malformed scenario: ") + e.what());
    }
    return sc;
}

inline json to_json(const acs::Scenario& sc) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["duration"] = sc.duration;
    j["seed"] = sc.seed;
    json cmd = json::array();
    for (const auto& c : sc.command) cmd.push_back({{"t", c.time}, {"angle", c.angle}});
    j["command"] = cmd;
    json evs = json::array();
    for (const auto& e : sc.fault_events) {
        evs.push_back({{"t", e.time},
                       {"replica", e.replica_id},
                       {"param", acs::to_string(e.param)},
                       {"bit", e.bit_index}});
    }
    j["fault_events"] = evs;
    return j;
}

inline acs::ControllerConfig controller_from_json(const json& j) {
    acs::ControllerConfig cfg;
    if (j.contains("kp")) cfg.kp = j["kp"].get<double>();
    if (j.contains("kd")) cfg.kd = j["kd"].get<double>();
    if (j.contains("rate_hz")) cfg.rate_hz = j["rate_hz"].get<double>();
    if (j.contains("noise_sigma_theta")) {
        cfg.noise_sigma_theta = j["noise_sigma_theta"].get<double>();
    }
    if (j.contains("noise_sigma_omega")) {
        cfg.noise_sigma_omega = j["noise_sigma_omega"].get<double>();
    }
    return cfg;
}

// One row per control period, directly plottable.
inline void write_simlog_csv(const acs::SimLog& log, std::ostream& out) {
    out << "t,cmd,meas_theta,meas_omega";
    for (int r = 0; r < log.replica_count; ++r) out << ",u_replica_" << r;
    out << ",u_arbitrated,theta,omega,dissent_bitmap\n";
    for (const auto& st : log.steps) {
        out << fmt_double(st.t) << ',' << fmt_double(st.command) << ','
            << fmt_double(st.meas_theta) << ',' << fmt_double(st.meas_omega);
        for (double u : st.replica_u) out << ',' << fmt_double(u);
        out << ',' << fmt_double(st.arbitrated_u) << ',' << fmt_double(st.theta) << ','
            << fmt_double(st.omega) << ',' << st.dissent_mask << '\n';
    }
}

// -----------------------------------------------------------------------------
// Timing tables
// -----------------------------------------------------------------------------

inline void write_bench_csv(const std::vector<lvs::BenchRow>& rows, std::ostream& out,
                            const std::vector<std::pair<std::string, double>>& oracle_rows = {}) {
    out << "size,op,reps,median_ms,oracle_max_err\n";
    for (const auto& r : rows) {
        out << r.size << ',' << r.op << ',' << r.reps << ',' << fmt_double(r.median_ms)
            << ",\n";
    }
    for (const auto& [label, err] : oracle_rows) {
        out << "," << label << ",,," << fmt_double(err) << '\n';
    }
}

struct ScalingRow {
    int nodes = 0;
    int variables = 0;
    int reps = 0;
    double median_runtime_s = 0.0;
    std::uint64_t iterations = 0;
    std::string status;
};

inline void write_scaling_csv(const std::vector<ScalingRow>& rows, std::ostream& out) {
    out << "N,decision_variables,reps,median_runtime_s,iterations,status\n";
    for (const auto& r : rows) {
        out << r.nodes << ',' << r.variables << ',' << r.reps << ','
            << fmt_double(r.median_runtime_s) << ',' << r.iterations << ',' << r.status
            << '\n';
    }
}

// -----------------------------------------------------------------------------
// Run manifest
// -----------------------------------------------------------------------------

struct RunManifest {
    std::string command;
    json resolved_config;
    std::uint64_t base_seed = 0;
    std::string started_utc;
    std::string finished_utc;
    std::vector<std::filesystem::path> outputs;
};

inline std::string utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::uint64_t digest_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("manifest: cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

// Writes <dir-or-file-stem>.manifest.json / manifest.json listing every
// produced data file with size and digest. Timestamps are informational
// and excluded from reproducibility comparisons.
inline void write_manifest(const RunManifest& m, const std::filesystem::path& manifest_path) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["command"] = m.command;
    j["config"] = m.resolved_config;
    j["base_seed"] = m.base_seed;
    j["started_utc"] = m.started_utc;
    j["finished_utc"] = m.finished_utc;
    json outs = json::array();
    for (const auto& p : m.outputs) {
        outs.push_back({{"path", p.filename().string()},
                        {"bytes", std::filesystem::file_size(p)},
                        {"fnv1a64", hex64(digest_file(p))}});
    }
    j["outputs"] = outs;
    std::ofstream out(manifest_path);
    if (!out) throw ConfigError("manifest: cannot write " + manifest_path.string());
    out << j.dump(2) << '\n';
}

inline json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

}  // namespace ftsim::io
