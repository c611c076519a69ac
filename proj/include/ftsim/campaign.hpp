#pragma once

// =============================================================================
// Single-bit-flip Monte Carlo study over the guidance solver stages.
//
// Each trial re-runs the solve with one injected upset and classifies the
// outcome against the fault-free reference run of the same problem:
//
//   outcome    SUCCESS iff the solve converged, validation passed, and the
//              fuel cost lies within a relative tolerance of the reference
//   detection  DETECTED iff validation failed or the solver diverged,
//              SILENT otherwise
//
// The study runs the solver at a tighter residual tolerance than the
// flight default so that corruption classes between the two tolerances
// remain resolvable rather than vanishing under the convergence floor.
// =============================================================================

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ftsim/fault.hpp"
#include "ftsim/guidance.hpp"
#include "ftsim/rng.hpp"

namespace ftsim::fault {

enum class CampaignStage { Control, InitData, GradientIterate, ValidationWorkset };

inline const char* to_string(CampaignStage s) {
    switch (s) {
        case CampaignStage::Control: return "CONTROL";
        case CampaignStage::InitData: return "INIT_DATA";
        case CampaignStage::GradientIterate: return "GRADIENT_ITERATE";
        case CampaignStage::ValidationWorkset: return "VALIDATION_WORKSET";
    }
    return "UNKNOWN";
}

inline CampaignStage campaign_stage_from_string(const std::string& s) {
    if (s == "CONTROL") return CampaignStage::Control;
    if (s == "INIT_DATA") return CampaignStage::InitData;
    if (s == "GRADIENT_ITERATE") return CampaignStage::GradientIterate;
    if (s == "VALIDATION_WORKSET") return CampaignStage::ValidationWorkset;
    throw ConfigError("campaign: unknown stage name '" + s + "'");
}

struct ClassificationTolerances {
    double success_rel_cost = 0.001;
};

struct CampaignConfig {
    guidance::GuidanceProblem problem;
    int trials_per_stage = 100;
    std::vector<CampaignStage> stages = {CampaignStage::InitData,
                                         CampaignStage::GradientIterate,
                                         CampaignStage::ValidationWorkset};
    std::uint64_t base_seed = 1;
    ClassificationTolerances tolerances;
    guidance::SolveOptions solver;

    CampaignConfig() { solver.eps_abs = 1e-9; }
};

enum class Outcome { Success, Failure };
enum class Detection { Detected, Silent };

inline const char* to_string(Outcome o) {
    return o == Outcome::Success ? "SUCCESS" : "FAILURE";
}
inline const char* to_string(Detection d) {
    return d == Detection::Detected ? "DETECTED" : "SILENT";
}

struct TrialRecord {
    CampaignStage stage = CampaignStage::Control;
    int trial_index = 0;
    std::uint64_t seed = 0;
    bool injected = false;
    FaultSpec spec;
    InjectionRecord injection;
    BitClass bit_class = BitClass::Fraction;
    guidance::SolveStatus status = guidance::SolveStatus::MaxIters;
    double fuel_cost = 0.0;
    bool validation_passed = false;
    Outcome outcome = Outcome::Failure;
    Detection detection = Detection::Silent;
};

struct StageSummary {
    CampaignStage stage = CampaignStage::Control;
    int trials = 0;
    int successes = 0;
    int detected = 0;
    int silent = 0;
    double success_probability = 0.0;
    double detected_fault_rate = 0.0;
    double silent_fault_rate = 0.0;
    double ci95_low = 0.0;  // Wilson interval on the success probability
    double ci95_high = 0.0;
};

struct ReferenceRun {
    std::uint64_t iterations = 0;
    double fuel_cost = 0.0;
    guidance::SolveStatus status = guidance::SolveStatus::MaxIters;
    std::size_t iterate_size = 0;
    std::size_t workset_size = 0;
};

struct CampaignResult {
    ReferenceRun reference;
    std::vector<StageSummary> stages;
    std::vector<TrialRecord> trials;
};

namespace detail {

inline void classify(TrialRecord& rec, const guidance::GuidanceSolution& sol,
                     const ReferenceRun& ref, const ClassificationTolerances& tol) {
    rec.status = sol.status;
    rec.fuel_cost = sol.fuel_cost;
    rec.validation_passed = sol.validation.passed;

    double cost_err = std::abs(sol.fuel_cost - ref.fuel_cost);
    bool cost_ok = cost_err <= tol.success_rel_cost * std::abs(ref.fuel_cost) + 1e-12;
    bool success = sol.status == guidance::SolveStatus::Converged &&
                   sol.validation.passed && cost_ok;
    rec.outcome = success ? Outcome::Success : Outcome::Failure;

    bool detected = sol.status == guidance::SolveStatus::Diverged || !sol.validation.passed;
    rec.detection = detected ? Detection::Detected : Detection::Silent;
}

inline guidance::SolveHooks hooks_for(const FaultSpec& spec, TrialRecord& rec) {
    guidance::SolveHooks hooks;
    switch (spec.site) {
        case Site::InitData:
            hooks.after_init = [&rec, spec](guidance::SolverState& st) {
                rec.injection = inject_in_place(st.iterate, spec);
            };
            break;
        case Site::GradientIterate:
            hooks.before_iteration = [&rec, spec](guidance::SolverState& st,
                                                  std::uint64_t iter) {
                if (iter == spec.iteration) {
                    rec.injection = inject_in_place(st.iterate, spec);
                }
            };
            break;
        case Site::ValidationWorkset:
            hooks.on_validation_workset = [&rec, spec](std::vector<double>& workset) {
                rec.injection = inject_in_place(workset, spec);
            };
            break;
        case Site::ControllerParam:
            throw ConfigError("campaign: controller faults belong to the closed-loop demo");
    }
    return hooks;
}

}  // namespace detail

// One faulted solve, classified against the reference.
inline TrialRecord run_trial(const guidance::GuidanceProblem& problem, const FaultSpec& spec,
                             const ReferenceRun& reference,
                             const guidance::SolveOptions& solver_opts,
                             const ClassificationTolerances& tol = {}) {
    TrialRecord rec;
    rec.seed = spec.seed;
    rec.injected = true;
    rec.spec = spec;
    rec.bit_class = classify_bit(spec.bit_index);
    switch (spec.site) {
        case Site::InitData: rec.stage = CampaignStage::InitData; break;
        case Site::GradientIterate: rec.stage = CampaignStage::GradientIterate; break;
        case Site::ValidationWorkset: rec.stage = CampaignStage::ValidationWorkset; break;
        case Site::ControllerParam:
            throw ConfigError("campaign: controller faults belong to the closed-loop demo");
    }

    guidance::SolveHooks hooks = detail::hooks_for(spec, rec);
    guidance::GuidanceSolution sol = guidance::solve(problem, solver_opts, hooks);
    detail::classify(rec, sol, reference, tol);
    return rec;
}

// Fault-free trial under the same deadline; the 1.00 baseline row.
inline TrialRecord run_control_trial(const guidance::GuidanceProblem& problem,
                                     std::uint64_t seed, const ReferenceRun& reference,
                                     const guidance::SolveOptions& solver_opts,
                                     const ClassificationTolerances& tol = {}) {
    TrialRecord rec;
    rec.stage = CampaignStage::Control;
    rec.seed = seed;
    rec.injected = false;
    guidance::GuidanceSolution sol = guidance::solve(problem, solver_opts);
    detail::classify(rec, sol, reference, tol);
    return rec;
}

namespace detail {

inline FaultSpec draw_spec(CampaignStage stage, std::uint64_t seed,
                           const ReferenceRun& ref) {
    // Fixed draw order: scalar index, bit index, loop iteration.
    SplitMix64 rng(seed);
    FaultSpec spec;
    spec.seed = seed;
    switch (stage) {
        case CampaignStage::InitData:
            spec.site = Site::InitData;
            spec.scalar_index = rng.uniform_below(ref.iterate_size);
            spec.bit_index = static_cast<int>(rng.uniform_below(64));
            break;
        case CampaignStage::GradientIterate:
            spec.site = Site::GradientIterate;
            spec.scalar_index = rng.uniform_below(ref.iterate_size);
            spec.bit_index = static_cast<int>(rng.uniform_below(64));
            spec.iteration = rng.uniform_below(std::max<std::uint64_t>(ref.iterations, 1));
            break;
        case CampaignStage::ValidationWorkset:
            spec.site = Site::ValidationWorkset;
            spec.scalar_index = rng.uniform_below(ref.workset_size);
            spec.bit_index = static_cast<int>(rng.uniform_below(64));
            break;
        case CampaignStage::Control:
            throw ConfigError("campaign: control trials carry no fault spec");
    }
    return spec;
}

inline StageSummary summarize(CampaignStage stage, const std::vector<TrialRecord>& trials) {
    StageSummary s;
    s.stage = stage;
    for (const auto& t : trials) {
        if (t.stage != stage) continue;
        ++s.trials;
        if (t.outcome == Outcome::Success) ++s.successes;
        if (t.detection == Detection::Detected) {
            ++s.detected;
        } else {
            ++s.silent;
        }
    }
    if (s.trials > 0) {
        auto n = static_cast<double>(s.trials);
        s.success_probability = static_cast<double>(s.successes) / n;
        s.detected_fault_rate = static_cast<double>(s.detected) / n;
        s.silent_fault_rate = static_cast<double>(s.silent) / n;

        // Wilson 95% interval.
        const double z = 1.959963984540054;
        double p = s.success_probability;
        double denom = 1.0 + z * z / n;
        double center = (p + z * z / (2.0 * n)) / denom;
        double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
        s.ci95_low = std::max(0.0, center - half);
        s.ci95_high = std::min(1.0, center + half);
    }
    return s;
}

}  // namespace detail

// The full Monte Carlo study. Deterministic: the result is a pure function
// of the configuration. Per-trial seeds derive from (base_seed, stage, i).
inline CampaignResult run_campaign(const CampaignConfig& config) {
    if (config.trials_per_stage < 1) {
        throw ConfigError("campaign: trials_per_stage must be at least 1");
    }
    guidance::GuidanceProblem problem = guidance::build_problem(config.problem);

    CampaignResult result;

    guidance::GuidanceSolution ref_sol = guidance::solve(problem, config.solver);
    result.reference.iterations = ref_sol.iterations;
    result.reference.fuel_cost = ref_sol.fuel_cost;
    result.reference.status = ref_sol.status;
    result.reference.iterate_size = static_cast<std::size_t>(problem.decision_variables());
    {
        guidance::SolverState probe = guidance::initialize(problem, config.solver);
        result.reference.workset_size =
            guidance::build_validation_workset(probe, problem).size();
    }

    const guidance::SolveOptions& trial_opts = config.solver;

    auto stage_ordinal = [](CampaignStage s) -> std::uint64_t {
        switch (s) {
            case CampaignStage::Control: return 0;
            case CampaignStage::InitData: return 1;
            case CampaignStage::GradientIterate: return 2;
            case CampaignStage::ValidationWorkset: return 3;
        }
        return 99;
    };

    if (!config.stages.empty()) {
        for (int i = 0; i < config.trials_per_stage; ++i) {
            std::uint64_t seed =
                derive_seed(config.base_seed, stage_ordinal(CampaignStage::Control),
                            static_cast<std::uint64_t>(i));
            TrialRecord rec = run_control_trial(problem, seed, result.reference, trial_opts,
                                                config.tolerances);
            rec.trial_index = i;
            result.trials.push_back(std::move(rec));
        }
        result.stages.push_back(detail::summarize(CampaignStage::Control, result.trials));
    }

    for (CampaignStage stage : config.stages) {
        if (stage == CampaignStage::Control) continue;
        for (int i = 0; i < config.trials_per_stage; ++i) {
            std::uint64_t seed = derive_seed(config.base_seed, stage_ordinal(stage),
                                             static_cast<std::uint64_t>(i));
            FaultSpec spec = detail::draw_spec(stage, seed, result.reference);
            TrialRecord rec =
                run_trial(problem, spec, result.reference, trial_opts, config.tolerances);
            rec.trial_index = i;
            result.trials.push_back(std::move(rec));
        }
        result.stages.push_back(detail::summarize(stage, result.trials));
    }
    return result;
}

}  // namespace ftsim::fault
