#pragma once

// =============================================================================
// Closed-loop attitude-control demo: a single-axis double integrator driven
// by replicated PD controllers under per-step arbitration. Faults corrupt a
// persistent gain copy of one replica (stuck bit), which makes the faulted
// replica's command stream diverge from the majority while the arbitrated
// command tracks the fault-free loop.
// =============================================================================

#include <cstdint>
#include <string>
#include <vector>

#include "ftsim/arbiter.hpp"
#include "ftsim/common.hpp"
#include "ftsim/fault.hpp"
#include "ftsim/rng.hpp"

namespace ftsim::acs {

struct PlantState {
    double theta = 0.0;  // rad
    double omega = 0.0;  // rad/s
    double t = 0.0;      // s
};

struct ControllerConfig {
    double kp = 1.0;  // 1/s^2
    double kd = 2.0;  // 1/s
    double rate_hz = 8.0;
    double noise_sigma_theta = 1e-3;  // rad
    double noise_sigma_omega = 1e-4;  // rad/s
};

enum class GainParam { Kp, Kd };

inline const char* to_string(GainParam p) { return p == GainParam::Kp ? "kp" : "kd"; }

struct GainFaultEvent {
    double time = 0.0;  // s
    int replica_id = 0;
    GainParam param = GainParam::Kp;
    int bit_index = 63;
};

struct CommandStep {
    double time = 0.0;   // s
    double angle = 0.0;  // rad
};

struct Scenario {
    double duration = 45.0;  // s
    std::vector<CommandStep> command = {{0.0, 1.0}};
    std::vector<GainFaultEvent> fault_events;
    std::uint64_t seed = 1;
};

// The stock demo: four replicas, unit step command from t = 0, sign-bit
// gain faults on replica 1 at 15 s and replica 3 at 30 s. The two faults
// hit different gains so the corrupted replicas cannot shadow each other
// into a spurious majority.
inline Scenario default_demo_scenario() {
    Scenario s;
    s.duration = 45.0;
    s.command = {{0.0, 1.0}};
    s.fault_events = {{15.0, 1, GainParam::Kp, 63}, {30.0, 3, GainParam::Kd, 63}};
    s.seed = 1;
    return s;
}

inline double pd_control(double theta_meas, double omega_meas, double command, double kp,
                         double kd) {
    return -kp * (theta_meas - command) - kd * omega_meas;
}

inline double pd_control(double theta_meas, double omega_meas, double command,
                         const ControllerConfig& cfg) {
    return pd_control(theta_meas, omega_meas, command, cfg.kp, cfg.kd);
}

// Exact zero-order-hold discretization of the double integrator.
inline PlantState plant_step(const PlantState& s, double u, double dt) {
    if (!(dt > 0.0)) throw ConfigError("acs: plant_step requires dt > 0");
    PlantState n;
    n.theta = s.theta + s.omega * dt + 0.5 * u * dt * dt;
    n.omega = s.omega + u * dt;
    n.t = s.t + dt;
    return n;
}

struct StepRecord {
    double t = 0.0;
    double command = 0.0;
    double meas_theta = 0.0;
    double meas_omega = 0.0;
    std::vector<double> replica_u;
    double arbitrated_u = 0.0;
    double theta = 0.0;  // plant state after the command is applied
    double omega = 0.0;
    std::uint32_t dissent_mask = 0;
    bool fallback = false;
};

struct ReferenceRecord {
    double t = 0.0;
    double u = 0.0;
    double theta = 0.0;
    double omega = 0.0;
};

struct SimLog {
    std::vector<StepRecord> steps;
    std::vector<ReferenceRecord> reference;
    arbiter::FaultReport fault_report;
    bool quorum_loss_seen = false;
    int replica_count = 0;
    double dt = 0.0;
};

namespace detail {

inline double command_at(const std::vector<CommandStep>& profile, double t) {
    double cmd = 0.0;
    for (const auto& c : profile) {
        if (c.time <= t + 1e-12) cmd = c.angle;
    }
    return cmd;
}

}  // namespace detail

// Runs the replicated closed loop and, with the identical noise stream, the
// fault-free single-controller reference it is judged against.
inline SimLog simulate(const Scenario& scenario, const ControllerConfig& cfg,
                       const arbiter::ArbiterConfig& arb_cfg) {
    if (!(cfg.kp > 0.0) || !(cfg.kd > 0.0)) {
        throw ConfigError("acs: controller gains must be positive");
    }
    if (!(cfg.rate_hz > 0.0)) {
        throw ConfigError("acs: control rate must be positive");
    }
    if (arb_cfg.mode != arbiter::Mode::Dynamic) {
        throw ConfigError("acs: simulate requires a dynamic-mode arbiter");
    }
    if (!(scenario.duration > 0.0)) {
        throw ConfigError("acs: scenario duration must be positive");
    }
    for (const auto& ev : scenario.fault_events) {
        if (ev.time < 0.0 || ev.time > scenario.duration) {
            throw ConfigError("acs: fault event time outside scenario duration");
        }
        if (ev.replica_id < 0 || ev.replica_id >= arb_cfg.replica_count) {
            throw ConfigError("acs: fault event names a replica outside the set");
        }
    }

    const double dt = 1.0 / cfg.rate_hz;
    const auto n_steps = static_cast<std::size_t>(scenario.duration / dt + 1e-9);
    const int replicas = arb_cfg.replica_count;

    SimLog log;
    log.replica_count = replicas;
    log.dt = dt;
    log.steps.reserve(n_steps);
    log.reference.reserve(n_steps);

    // Per-replica persistent gain copies; faults stick a flipped bit here.
    std::vector<double> kp(static_cast<std::size_t>(replicas), cfg.kp);
    std::vector<double> kd(static_cast<std::size_t>(replicas), cfg.kd);
    std::vector<bool> applied(scenario.fault_events.size(), false);

    arbiter::DynamicArbiter arb(arb_cfg);
    PlantState plant;
    SplitMix64 noise(scenario.seed);

    for (std::size_t k = 0; k < n_steps; ++k) {
        double t = static_cast<double>(k) * dt;

        for (std::size_t e = 0; e < scenario.fault_events.size(); ++e) {
            const auto& ev = scenario.fault_events[e];
            if (!applied[e] && t + 1e-12 >= ev.time) {
                auto idx = static_cast<std::size_t>(ev.replica_id);
                if (ev.param == GainParam::Kp) {
                    kp[idx] = fault::flip_bit(kp[idx], ev.bit_index);
                } else {
                    kd[idx] = fault::flip_bit(kd[idx], ev.bit_index);
                }
                applied[e] = true;
            }
        }

        double cmd = detail::command_at(scenario.command, t);
        // One shared sensor draw per step, fed to every replica.
        double meas_theta = plant.theta + noise.gaussian(0.0, cfg.noise_sigma_theta);
        double meas_omega = plant.omega + noise.gaussian(0.0, cfg.noise_sigma_omega);

        std::vector<arbiter::ReplicaOutput> outputs;
        outputs.reserve(static_cast<std::size_t>(replicas));
        StepRecord rec;
        rec.t = t;
        rec.command = cmd;
        rec.meas_theta = meas_theta;
        rec.meas_omega = meas_omega;
        for (int r = 0; r < replicas; ++r) {
            auto idx = static_cast<std::size_t>(r);
            double u = pd_control(meas_theta, meas_omega, cmd, kp[idx], kd[idx]);
            rec.replica_u.push_back(u);
            arbiter::ReplicaOutput o;
            o.replica_id = r;
            o.payload = {u};
            o.stage_label = "PD";
            o.step_index = k;
            outputs.push_back(std::move(o));
        }

        auto vr = arb.arbitrate_step(outputs);
        double u_arb = vr.arbitrated.empty() ? 0.0 : vr.arbitrated.front();
        rec.arbitrated_u = u_arb;
        rec.fallback = vr.fallback_used;
        log.quorum_loss_seen = log.quorum_loss_seen || vr.fallback_used;
        for (int id : vr.dissenting) rec.dissent_mask |= (1u << id);

        plant = plant_step(plant, u_arb, dt);
        rec.theta = plant.theta;
        rec.omega = plant.omega;
        log.steps.push_back(std::move(rec));
    }
    log.fault_report = arb.report();

    // Fault-free reference with the identical noise stream.
    PlantState ref_plant;
    SplitMix64 ref_noise(scenario.seed);
    for (std::size_t k = 0; k < n_steps; ++k) {
        double t = static_cast<double>(k) * dt;
        double cmd = detail::command_at(scenario.command, t);
        double meas_theta = ref_plant.theta + ref_noise.gaussian(0.0, cfg.noise_sigma_theta);
        double meas_omega = ref_plant.omega + ref_noise.gaussian(0.0, cfg.noise_sigma_omega);
        double u = pd_control(meas_theta, meas_omega, cmd, cfg);
        ref_plant = plant_step(ref_plant, u, dt);
        log.reference.push_back({t, u, ref_plant.theta, ref_plant.omega});
    }
    return log;
}

}  // namespace ftsim::acs
