#pragma once

// =============================================================================
// Minimum-fuel powered-descent guidance.
//
// Discretized 3-DoF constant-mass double integrator with a thrust-magnitude
// slack per node:
//
//   minimize    sum_k sigma_k * dt
//   subject to  r_{k+1} = r_k + v_k dt + dt^2/2 (u_k + g)
//               v_{k+1} = v_k + dt (u_k + g)
//               ||u_k|| <= sigma_k,  rho1 <= sigma_k <= rho2
//               fixed initial and terminal position/velocity
//               optional glide-slope cone on position
//
// Decision vector (10 scalars per node, fixed ordering):
//   [ r_0..r_{N-1} | v_0..v_{N-1} | u_0..u_{N-1} | sigma_0..sigma_{N-1} ]
//
// The solve runs in three explicitly separated stages whose intermediate
// vectors are exposed as checkpoints: initialization, the first-order
// iteration loop, and final constraint validation. The iteration scheme is
// a scaled consensus ADMM sweep: project onto the per-node cone/box sets,
// take a dual ascent step, then project onto the affine dynamics/boundary
// set through a cached sparse Cholesky factorization of A A^T. One sweep
// per gradient_step, deterministic, no adaptive parameters.
// =============================================================================

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "ftsim/common.hpp"

namespace ftsim::guidance {

// -----------------------------------------------------------------------------
// Problem description
// -----------------------------------------------------------------------------

struct GuidanceProblem {
    Vec3 r0;
    Vec3 v0;
    Vec3 r_target;
    Vec3 v_target;
    Vec3 g;
    double rho1 = 0.0;  // min thrust-acceleration magnitude, m/s^2
    double rho2 = 1.0;  // max thrust-acceleration magnitude, m/s^2
    int N = 2;          // node count
    double dt = 1.0;    // step duration, s
    std::optional<double> glide_slope_angle;  // radians; absent = disabled

    int decision_variables() const { return 10 * N; }
};

// Validates every problem invariant with a distinct diagnostic.
inline GuidanceProblem build_problem(const GuidanceProblem& config) {
    if (!(config.rho1 >= 0.0)) {
        throw ConfigError("guidance: rho1 must be non-negative");
    }
    if (!(config.rho1 < config.rho2)) {
        throw ConfigError("guidance: thrust bounds must satisfy rho1 < rho2");
    }
    if (config.N < 2) {
        throw ConfigError("guidance: node count N must be at least 2");
    }
    if (!(config.dt > 0.0)) {
        throw ConfigError("guidance: step duration dt must be positive");
    }
    if (!config.r0.finite() || !config.v0.finite() || !config.r_target.finite() ||
        !config.v_target.finite() || !config.g.finite() ||
        !std::isfinite(config.rho1) || !std::isfinite(config.rho2) ||
        !std::isfinite(config.dt)) {
        throw ConfigError("guidance: problem fields must be finite");
    }
    if (config.glide_slope_angle) {
        double gs = *config.glide_slope_angle;
        if (!(gs > 0.0) || !(gs < 1.5707963267948966)) {
            throw ConfigError("guidance: glide_slope_angle must lie in (0, pi/2)");
        }
    }
    return config;
}

struct ValidationTolerances {
    double dynamics = 1e-6;
    double boundary = 1e-4;
    double thrust_bound = 1e-6;
    double cone = 1e-6;
    double glide_slope = 1e-6;
};

enum class InitMode { Interpolate, Zero, Custom };

struct SolveOptions {
    double eps_abs = 1e-6;  // primal/dual residual tolerance, scaled units
    std::uint64_t max_iters = 20000;
    double admm_rho = 2.0;  // consensus penalty, scaled units
    // Scaled residual ceiling before declaring divergence outright.
    double divergence_guard = 1e100;
    // A residual excursion this far above the best residual seen so far is
    // not produced by the sweep's own arithmetic (nominal upticks stay
    // under ~3x) and is flagged as divergence. Numerical-fault tripwire.
    double excursion_guard = 6.0;
    // Every sweep ends on the dynamics/boundary equality set, so the next
    // sweep checks that postcondition on entry (relative to the iterate
    // magnitude; nominal defects sit 2-3 decades below this). A violated
    // postcondition means the iterate changed between sweeps.
    double equality_guard = 1e-6;
    std::uint64_t checkpoint_interval = 0;  // 0 = final checkpoint only
    InitMode init_mode = InitMode::Interpolate;
    std::vector<double> custom_init;        // SI units, used when init_mode == Custom
    ValidationTolerances tolerances;
};

struct Checkpoint {
    std::string label;
    std::vector<double> data;
};

// -----------------------------------------------------------------------------
// Internal workspace: scaling, constraint matrix, cached factorization
// -----------------------------------------------------------------------------

namespace detail {

struct Workspace {
    int N = 0;
    double dt_s = 0.0;  // dt in nondimensional time
    double pos_scale = 1.0;
    double vel_scale = 1.0;
    double acc_scale = 1.0;
    double time_scale = 1.0;
    Vec3 r_target;
    Vec3 g_s;
    double rho1_s = 0.0;
    double rho2_s = 1.0;
    bool glide_on = false;
    double glide_tan = 0.0;
    double rho = 2.0;
    double divergence_guard = 1e100;
    double excursion_guard = 6.0;
    double equality_guard = 1e-6;
    double eps_abs = 1e-6;

    Eigen::SparseMatrix<double> A;  // equality constraints, m x n
    Eigen::VectorXd b;
    Eigen::VectorXd c;  // objective gradient in scaled coordinates
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> gram_llt;  // A A^T

    std::vector<double> scale_vec;   // SI = offset + scale * nondimensional
    std::vector<double> offset_vec;

    int n() const { return 10 * N; }
    int m() const { return 6 * (N - 1) + 12; }

    int r_col(int k, int a) const { return 3 * k + a; }
    int v_col(int k, int a) const { return 3 * N + 3 * k + a; }
    int u_col(int k, int a) const { return 6 * N + 3 * k + a; }
    int s_col(int k) const { return 9 * N + k; }
};

inline std::shared_ptr<const Workspace> make_workspace(const GuidanceProblem& p,
                                                       const SolveOptions& opts) {
    auto ws = std::make_shared<Workspace>();
    ws->N = p.N;
    ws->r_target = p.r_target;
    ws->rho = opts.admm_rho;
    ws->divergence_guard = opts.divergence_guard;
    ws->excursion_guard = opts.excursion_guard;
    ws->equality_guard = opts.equality_guard;
    ws->eps_abs = opts.eps_abs;

    double span = (p.r0 - p.r_target).norm();
    ws->pos_scale = std::max(1.0, span);
    ws->acc_scale = p.rho2;
    ws->time_scale = std::sqrt(ws->pos_scale / ws->acc_scale);
    ws->vel_scale = ws->pos_scale / ws->time_scale;
    ws->dt_s = p.dt / ws->time_scale;
    ws->g_s = p.g / ws->acc_scale;
    ws->rho1_s = p.rho1 / p.rho2;
    ws->rho2_s = 1.0;
    if (p.glide_slope_angle) {
        ws->glide_on = true;
        ws->glide_tan = std::tan(*p.glide_slope_angle);
    }

    const int N = p.N;
    const int n = ws->n();
    const int m = ws->m();
    const double dts = ws->dt_s;

    ws->scale_vec.assign(static_cast<std::size_t>(n), 0.0);
    ws->offset_vec.assign(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < N; ++k) {
        for (int a = 0; a < 3; ++a) {
            ws->scale_vec[static_cast<std::size_t>(ws->r_col(k, a))] = ws->pos_scale;
            ws->offset_vec[static_cast<std::size_t>(ws->r_col(k, a))] = p.r_target[a];
            ws->scale_vec[static_cast<std::size_t>(ws->v_col(k, a))] = ws->vel_scale;
            ws->scale_vec[static_cast<std::size_t>(ws->u_col(k, a))] = ws->acc_scale;
        }
        ws->scale_vec[static_cast<std::size_t>(ws->s_col(k))] = ws->acc_scale;
    }

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(10 * m));
    ws->b = Eigen::VectorXd::Zero(m);

    int row = 0;
    for (int k = 0; k + 1 < N; ++k) {
        for (int a = 0; a < 3; ++a) {
            trips.emplace_back(row, ws->r_col(k + 1, a), 1.0);
            trips.emplace_back(row, ws->r_col(k, a), -1.0);
            trips.emplace_back(row, ws->v_col(k, a), -dts);
            trips.emplace_back(row, ws->u_col(k, a), -0.5 * dts * dts);
            ws->b(row) = 0.5 * dts * dts * ws->g_s[a];
            ++row;
        }
        for (int a = 0; a < 3; ++a) {
            trips.emplace_back(row, ws->v_col(k + 1, a), 1.0);
            trips.emplace_back(row, ws->v_col(k, a), -1.0);
            trips.emplace_back(row, ws->u_col(k, a), -dts);
            ws->b(row) = dts * ws->g_s[a];
            ++row;
        }
    }
    for (int a = 0; a < 3; ++a) {
        trips.emplace_back(row, ws->r_col(0, a), 1.0);
        ws->b(row) = (p.r0[a] - p.r_target[a]) / ws->pos_scale;
        ++row;
    }
    for (int a = 0; a < 3; ++a) {
        trips.emplace_back(row, ws->v_col(0, a), 1.0);
        ws->b(row) = p.v0[a] / ws->vel_scale;
        ++row;
    }
    for (int a = 0; a < 3; ++a) {
        trips.emplace_back(row, ws->r_col(N - 1, a), 1.0);
        ws->b(row) = 0.0;
        ++row;
    }
    for (int a = 0; a < 3; ++a) {
        trips.emplace_back(row, ws->v_col(N - 1, a), 1.0);
        ws->b(row) = p.v_target[a] / ws->vel_scale;
        ++row;
    }

    ws->A.resize(m, n);
    ws->A.setFromTriplets(trips.begin(), trips.end());
    ws->A.makeCompressed();

    ws->c = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < N; ++k) {
        ws->c(ws->s_col(k)) = dts;
    }

    // Tiny Tikhonov shift keeps the factorization well posed when boundary
    // pinning makes constraint rows dependent (N = 2).
    Eigen::SparseMatrix<double> gram = ws->A * Eigen::SparseMatrix<double>(ws->A.transpose());
    Eigen::SparseMatrix<double> eye(m, m);
    eye.setIdentity();
    gram += 1e-10 * eye;
    ws->gram_llt.compute(gram);
    if (ws->gram_llt.info() != Eigen::Success) {
        throw std::runtime_error("guidance: constraint Gram factorization failed");
    }
    return ws;
}

// Exact projection of (u, sigma) onto { ||u|| <= sigma, lo <= sigma <= hi }.
// The squared distance is convex and piecewise quadratic in sigma, so the
// box-clamped unconstrained minimizer is the constrained one.
inline void project_thrust_node(double* u, double& sigma, double lo, double hi) {
    double t = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    double free_sigma = (sigma >= t) ? sigma : 0.5 * (t + sigma);
    double s = std::clamp(free_sigma, lo, hi);
    if (t > s) {
        double f = (t > 0.0) ? s / t : 0.0;
        u[0] *= f;
        u[1] *= f;
        u[2] *= f;
    }
    sigma = s;
}

// Projection onto { tan(gamma) * ||(x, y)|| <= z } for target-relative
// position coordinates.
inline void project_glide_node(double& x, double& y, double& z, double alpha) {
    double t = std::sqrt(x * x + y * y);
    if (alpha * t <= z) return;
    if (t <= -alpha * z) {
        x = y = z = 0.0;
        return;
    }
    double mu = (t + alpha * z) / (1.0 + alpha * alpha);
    double f = (t > 0.0) ? mu / t : 0.0;
    x *= f;
    y *= f;
    z = alpha * mu;
}

template <typename Vec>
inline void project_feasible_set(const Workspace& ws, Vec&& v) {
    for (int k = 0; k < ws.N; ++k) {
        project_thrust_node(v.data() + ws.u_col(k, 0), v(ws.s_col(k)), ws.rho1_s, ws.rho2_s);
        if (ws.glide_on) {
            project_glide_node(v(ws.r_col(k, 0)), v(ws.r_col(k, 1)), v(ws.r_col(k, 2)),
                               ws.glide_tan);
        }
    }
}

}  // namespace detail

// -----------------------------------------------------------------------------
// Solver state
// -----------------------------------------------------------------------------

struct SolverState {
    // Decision vector in SI units, fixed [r | v | u | sigma] ordering.
    std::vector<double> iterate;
    // Scheme-internal state in scaled units: consensus copy z followed by
    // the scaled dual w, each of iterate length.
    std::vector<double> dual_iterate;
    std::uint64_t iteration_count = 0;
    double primal_residual = std::numeric_limits<double>::infinity();
    double dual_residual = std::numeric_limits<double>::infinity();
    // Smallest primal residual observed so far; the excursion tripwire's
    // baseline.
    double best_residual = std::numeric_limits<double>::infinity();
    bool diverged = false;
    std::vector<Checkpoint> stage_checkpoints;
    std::shared_ptr<const detail::Workspace> workspace;
};

namespace detail {

inline Eigen::VectorXd to_scaled(const Workspace& ws, const std::vector<double>& si) {
    Eigen::VectorXd x(ws.n());
    for (int i = 0; i < ws.n(); ++i) {
        auto ui = static_cast<std::size_t>(i);
        x(i) = (si[ui] - ws.offset_vec[ui]) / ws.scale_vec[ui];
    }
    return x;
}

inline void from_scaled(const Workspace& ws, const Eigen::VectorXd& x, std::vector<double>& si) {
    si.resize(static_cast<std::size_t>(ws.n()));
    for (int i = 0; i < ws.n(); ++i) {
        auto ui = static_cast<std::size_t>(i);
        si[ui] = ws.offset_vec[ui] + ws.scale_vec[ui] * x(i);
    }
}

}  // namespace detail

// -----------------------------------------------------------------------------
// Stage 1: initialization
// -----------------------------------------------------------------------------

// Straight-line interpolation between the boundary states plus a
// gravity-cancelling thrust guess with magnitude clipped into [rho1, rho2].
inline SolverState initialize(const GuidanceProblem& problem,
                              const SolveOptions& opts = SolveOptions{}) {
    GuidanceProblem p = build_problem(problem);
    auto ws = detail::make_workspace(p, opts);

    const int N = p.N;
    std::vector<double> it(static_cast<std::size_t>(10 * N), 0.0);

    Vec3 u_guess{0.0, 0.0, 0.0};
    double gmag = p.g.norm();
    if (gmag > 0.0) {
        double mag = std::clamp(gmag, p.rho1, p.rho2);
        u_guess = (-p.g) * (mag / gmag);
    }
    double sigma_guess = u_guess.norm();

    for (int k = 0; k < N; ++k) {
        double tau = static_cast<double>(k) / static_cast<double>(N - 1);
        Vec3 r = p.r0 + (p.r_target - p.r0) * tau;
        Vec3 v = p.v0 + (p.v_target - p.v0) * tau;
        for (int a = 0; a < 3; ++a) {
            it[static_cast<std::size_t>(ws->r_col(k, a))] = r[a];
            it[static_cast<std::size_t>(ws->v_col(k, a))] = v[a];
            it[static_cast<std::size_t>(ws->u_col(k, a))] = u_guess[a];
        }
        it[static_cast<std::size_t>(ws->s_col(k))] = sigma_guess;
    }

    if (opts.init_mode == InitMode::Zero) {
        std::fill(it.begin(), it.end(), 0.0);
    } else if (opts.init_mode == InitMode::Custom) {
        if (opts.custom_init.size() != it.size()) {
            throw ConfigError("guidance: custom_init must have length 10*N");
        }
        it = opts.custom_init;
    }

    SolverState st;
    st.workspace = ws;
    st.iterate = it;

    Eigen::VectorXd x = detail::to_scaled(*ws, it);
    Eigen::VectorXd z = x;
    detail::project_feasible_set(*ws, z);

    st.dual_iterate.assign(static_cast<std::size_t>(2 * ws->n()), 0.0);
    for (int i = 0; i < ws->n(); ++i) {
        st.dual_iterate[static_cast<std::size_t>(i)] = z(i);
    }
    st.primal_residual = (x - z).cwiseAbs().maxCoeff();
    st.dual_residual = std::numeric_limits<double>::infinity();
    st.iteration_count = 0;
    st.stage_checkpoints.push_back({"INIT", st.iterate});
    return st;
}

// -----------------------------------------------------------------------------
// Stage 2: one first-order update
// -----------------------------------------------------------------------------

// One ADMM sweep. The public iterate is consumed at the top of the sweep,
// so an upset landing in it propagates into the scheme state exactly as a
// memory fault in a running solver would.
inline SolverState gradient_step(SolverState state, const GuidanceProblem& problem) {
    if (!state.workspace) {
        state.workspace = detail::make_workspace(build_problem(problem), SolveOptions{});
    }
    const detail::Workspace& ws = *state.workspace;
    const int n = ws.n();

    if (state.iterate.size() != static_cast<std::size_t>(n) ||
        state.dual_iterate.size() != static_cast<std::size_t>(2 * n)) {
        throw ConfigError("guidance: solver state has inconsistent dimensions");
    }

    auto mark_diverged = [&](SolverState&& s) {
        s.diverged = true;
        s.iteration_count += 1;
        s.primal_residual = std::numeric_limits<double>::infinity();
        s.dual_residual = std::numeric_limits<double>::infinity();
        return std::move(s);
    };

    if (!all_finite(state.iterate) || !all_finite(state.dual_iterate)) {
        return mark_diverged(std::move(state));
    }

    Eigen::VectorXd x = detail::to_scaled(ws, state.iterate);

    // Entry postcondition: the previous sweep left the iterate on the
    // equality set. Armed after the first sweep; the initial guess is not
    // dynamics-feasible by construction.
    if (state.iteration_count >= 1) {
        double defect = (ws.A * x - ws.b).cwiseAbs().maxCoeff();
        double ceiling = ws.equality_guard * std::max(1.0, x.cwiseAbs().maxCoeff());
        if (!(defect <= ceiling)) {
            return mark_diverged(std::move(state));
        }
    }

    Eigen::Map<Eigen::VectorXd> z(state.dual_iterate.data(), n);
    Eigen::Map<Eigen::VectorXd> w(state.dual_iterate.data() + n, n);

    Eigen::VectorXd z_old = z;

    // Feasible-set projection.
    z = x + w;
    detail::project_feasible_set(ws, z);

    // Dual ascent.
    w += x - z;

    // Equality-constrained prox step through the cached factorization.
    Eigen::VectorXd p = z - w - ws.c / ws.rho;
    Eigen::VectorXd resid = ws.A * p - ws.b;
    Eigen::VectorXd lambda = ws.gram_llt.solve(resid);
    Eigen::VectorXd x_new = p - ws.A.transpose() * lambda;

    state.primal_residual = (x_new - z).cwiseAbs().maxCoeff();
    state.dual_residual = ws.rho * (z - z_old).cwiseAbs().maxCoeff();
    state.iteration_count += 1;

    detail::from_scaled(ws, x_new, state.iterate);

    bool excursion = state.primal_residual >
                     ws.excursion_guard * std::max(state.best_residual, ws.eps_abs);
    if (!all_finite(state.iterate) || !all_finite(state.dual_iterate) ||
        !std::isfinite(state.primal_residual) ||
        state.primal_residual > ws.divergence_guard || excursion) {
        state.diverged = true;
        state.primal_residual = std::numeric_limits<double>::infinity();
        state.dual_residual = std::numeric_limits<double>::infinity();
    } else {
        state.best_residual = std::min(state.best_residual, state.primal_residual);
    }
    return state;
}

// -----------------------------------------------------------------------------
// Stage 3: constraint validation
// -----------------------------------------------------------------------------

struct ValidationReport {
    double dynamics_residual_inf = 0.0;
    double boundary_error = 0.0;
    double thrust_bound_violation = 0.0;
    double cone_violation = 0.0;
    std::optional<double> glide_slope_violation;
    bool passed = false;
};

// The residual workset is the flat scratch vector validation reduces over:
// per-node dynamics defects, terminal boundary errors, per-node bound
// deficits and cone gaps. It is exposed so upsets can be placed in
// validation scratch memory without touching the iterate.
inline std::vector<double> build_validation_workset(const SolverState& state,
                                                    const GuidanceProblem& p) {
    const int N = p.N;
    auto r_at = [&](int k, int a) { return state.iterate[static_cast<std::size_t>(3 * k + a)]; };
    auto v_at = [&](int k, int a) {
        return state.iterate[static_cast<std::size_t>(3 * N + 3 * k + a)];
    };
    auto u_at = [&](int k, int a) {
        return state.iterate[static_cast<std::size_t>(6 * N + 3 * k + a)];
    };
    auto s_at = [&](int k) { return state.iterate[static_cast<std::size_t>(9 * N + k)]; };

    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(6 * (N - 1) + 6 + 2 * N + (p.glide_slope_angle ? N : 0)));

    for (int k = 0; k + 1 < N; ++k) {
        for (int a = 0; a < 3; ++a) {
            double pred = r_at(k, a) + v_at(k, a) * p.dt +
                          0.5 * p.dt * p.dt * (u_at(k, a) + p.g[a]);
            w.push_back(r_at(k + 1, a) - pred);
        }
        for (int a = 0; a < 3; ++a) {
            double pred = v_at(k, a) + p.dt * (u_at(k, a) + p.g[a]);
            w.push_back(v_at(k + 1, a) - pred);
        }
    }
    for (int a = 0; a < 3; ++a) w.push_back(r_at(N - 1, a) - p.r_target[a]);
    for (int a = 0; a < 3; ++a) w.push_back(v_at(N - 1, a) - p.v_target[a]);

    for (int k = 0; k < N; ++k) {
        double s = s_at(k);
        w.push_back(std::max(p.rho1 - s, s - p.rho2));
    }
    for (int k = 0; k < N; ++k) {
        double umag = std::sqrt(u_at(k, 0) * u_at(k, 0) + u_at(k, 1) * u_at(k, 1) +
                                u_at(k, 2) * u_at(k, 2));
        w.push_back(umag - s_at(k));
    }
    if (p.glide_slope_angle) {
        double alpha = std::tan(*p.glide_slope_angle);
        for (int k = 0; k < N; ++k) {
            double dx = r_at(k, 0) - p.r_target.x;
            double dy = r_at(k, 1) - p.r_target.y;
            double dz = r_at(k, 2) - p.r_target.z;
            w.push_back(alpha * std::sqrt(dx * dx + dy * dy) - dz);
        }
    }
    return w;
}

inline ValidationReport evaluate_workset(const std::vector<double>& w,
                                         const GuidanceProblem& p,
                                         const ValidationTolerances& tol) {
    const int N = p.N;
    const std::size_t dyn_n = static_cast<std::size_t>(6 * (N - 1));
    const std::size_t bnd_n = 6;

    ValidationReport rep;
    std::size_t i = 0;
    for (std::size_t k = 0; k < dyn_n; ++k, ++i) {
        rep.dynamics_residual_inf = std::max(rep.dynamics_residual_inf, std::abs(w[i]));
    }
    for (std::size_t k = 0; k < bnd_n; ++k, ++i) {
        rep.boundary_error = std::max(rep.boundary_error, std::abs(w[i]));
    }
    for (int k = 0; k < N; ++k, ++i) {
        rep.thrust_bound_violation = std::max(rep.thrust_bound_violation, w[i]);
    }
    rep.thrust_bound_violation = std::max(0.0, rep.thrust_bound_violation);
    for (int k = 0; k < N; ++k, ++i) {
        rep.cone_violation = std::max(rep.cone_violation, w[i]);
    }
    rep.cone_violation = std::max(0.0, rep.cone_violation);
    if (p.glide_slope_angle) {
        double gv = 0.0;
        for (int k = 0; k < N; ++k, ++i) gv = std::max(gv, w[i]);
        rep.glide_slope_violation = std::max(0.0, gv);
    }

    bool finite = std::isfinite(rep.dynamics_residual_inf) &&
                  std::isfinite(rep.boundary_error) &&
                  std::isfinite(rep.thrust_bound_violation) &&
                  std::isfinite(rep.cone_violation) &&
                  (!rep.glide_slope_violation || std::isfinite(*rep.glide_slope_violation));
    rep.passed = finite && rep.dynamics_residual_inf <= tol.dynamics &&
                 rep.boundary_error <= tol.boundary &&
                 rep.thrust_bound_violation <= tol.thrust_bound &&
                 rep.cone_violation <= tol.cone &&
                 (!rep.glide_slope_violation || *rep.glide_slope_violation <= tol.glide_slope);
    return rep;
}

inline std::vector<double> report_as_vector(const ValidationReport& rep) {
    return {rep.dynamics_residual_inf,
            rep.boundary_error,
            rep.thrust_bound_violation,
            rep.cone_violation,
            rep.glide_slope_violation ? *rep.glide_slope_violation : -1.0,
            rep.passed ? 1.0 : 0.0};
}

// Computes all residual fields from the iterate and records the VALIDATE
// checkpoint. Non-finite residuals force passed = false.
inline ValidationReport validate(SolverState& state, const GuidanceProblem& problem,
                                 const ValidationTolerances& tol = ValidationTolerances{}) {
    std::vector<double> w = build_validation_workset(state, problem);
    ValidationReport rep = evaluate_workset(w, problem, tol);
    state.stage_checkpoints.push_back({"VALIDATE", report_as_vector(rep)});
    return rep;
}

// -----------------------------------------------------------------------------
// Full solve
// -----------------------------------------------------------------------------

enum class SolveStatus { Converged, MaxIters, Diverged };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "CONVERGED";
        case SolveStatus::MaxIters: return "MAX_ITERS";
        case SolveStatus::Diverged: return "DIVERGED";
    }
    return "UNKNOWN";
}

struct TrajectoryNode {
    Vec3 r;
    Vec3 v;
};

struct GuidanceSolution {
    std::vector<TrajectoryNode> trajectory;
    std::vector<Vec3> thrust;
    std::vector<double> slack;
    double dt = 0.0;
    double fuel_cost = 0.0;
    SolveStatus status = SolveStatus::MaxIters;
    ValidationReport validation;
    std::vector<Checkpoint> checkpoints;
    std::uint64_t iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double runtime_seconds = 0.0;
    int decision_variables = 0;
};

inline double fuel_cost(const GuidanceSolution& sol) {
    double total = 0.0;
    for (double s : sol.slack) total += s * sol.dt;
    return total;
}

// Instrumentation hooks. Checkpoint emission feeds replicated execution;
// the mutation hooks are the documented upset-injection sites.
struct SolveHooks {
    std::function<void(const std::string&, std::uint64_t, const std::vector<double>&)>
        on_checkpoint;
    std::function<void(SolverState&)> after_init;
    std::function<void(SolverState&, std::uint64_t)> before_iteration;
    std::function<void(std::vector<double>&)> on_validation_workset;
};

namespace detail {

// Forward simulation of the discrete dynamics in scaled coordinates.
inline void forward_sim_scaled(const Workspace& ws, const Eigen::VectorXd& r0,
                               const Eigen::VectorXd& v0, const Eigen::VectorXd& u,
                               Eigen::VectorXd& r_out, Eigen::VectorXd& v_out) {
    const int N = ws.N;
    const double dts = ws.dt_s;
    r_out.resize(3 * N);
    v_out.resize(3 * N);
    for (int a = 0; a < 3; ++a) {
        r_out(a) = r0(a);
        v_out(a) = v0(a);
    }
    for (int k = 0; k + 1 < N; ++k) {
        for (int a = 0; a < 3; ++a) {
            double acc = u(3 * k + a) + ws.g_s[a];
            r_out(3 * (k + 1) + a) = r_out(3 * k + a) + v_out(3 * k + a) * dts +
                                     0.5 * dts * dts * acc;
            v_out(3 * (k + 1) + a) = v_out(3 * k + a) + dts * acc;
        }
    }
}

// Converged iterates carry a consensus-sized feasibility gap. Replace the
// trajectory by the exact rollout of the cone-feasible thrust profile,
// after a minimum-norm thrust correction that zeroes the terminal defect.
inline void restore_feasibility(SolverState& state) {
    const Workspace& ws = *state.workspace;
    const int N = ws.N;
    const int n = ws.n();
    const double dts = ws.dt_s;

    Eigen::Map<const Eigen::VectorXd> z(state.dual_iterate.data(), n);

    Eigen::VectorXd u(3 * N);
    Eigen::VectorXd sig(N);
    for (int k = 0; k < N; ++k) {
        for (int a = 0; a < 3; ++a) u(3 * k + a) = z(ws.u_col(k, a));
        sig(k) = z(ws.s_col(k));
    }

    Eigen::VectorXd r0(3), v0(3), vt(3);
    for (int a = 0; a < 3; ++a) {
        r0(a) = ws.b(6 * (N - 1) + a);
        v0(a) = ws.b(6 * (N - 1) + 3 + a);
        vt(a) = ws.b(6 * (N - 1) + 9 + a);
    }

    Eigen::VectorXd r_sim, v_sim;
    forward_sim_scaled(ws, r0, v0, u, r_sim, v_sim);

    // Terminal sensitivities are identical across axes: d v_T / d u_j = dt,
    // d r_T / d u_j = dt^2 (N - 1.5 - j).
    const int nu = N - 1;
    double saa = 0.0, sab = 0.0, sbb = 0.0;
    for (int j = 0; j < nu; ++j) {
        double aj = dts;
        double bj = dts * dts * (static_cast<double>(N) - 1.5 - static_cast<double>(j));
        saa += aj * aj;
        sab += aj * bj;
        sbb += bj * bj;
    }
    double det = saa * sbb - sab * sab;
    if (std::abs(det) > 1e-30) {
        for (int a = 0; a < 3; ++a) {
            double dv = v_sim(3 * (N - 1) + a) - vt(a);
            double dr = r_sim(3 * (N - 1) + a) - 0.0;
            double lam1 = (-dv * sbb + dr * sab) / det;
            double lam2 = (dv * sab - dr * saa) / det;
            for (int j = 0; j < nu; ++j) {
                double aj = dts;
                double bj = dts * dts * (static_cast<double>(N) - 1.5 - static_cast<double>(j));
                u(3 * j + a) += aj * lam1 + bj * lam2;
            }
        }
        forward_sim_scaled(ws, r0, v0, u, r_sim, v_sim);
    }

    for (int k = 0; k < N; ++k) {
        double umag = std::sqrt(u(3 * k) * u(3 * k) + u(3 * k + 1) * u(3 * k + 1) +
                                u(3 * k + 2) * u(3 * k + 2));
        sig(k) = std::clamp(std::max(sig(k), umag), ws.rho1_s, ws.rho2_s);
    }

    Eigen::VectorXd x(n);
    for (int k = 0; k < N; ++k) {
        for (int a = 0; a < 3; ++a) {
            x(ws.r_col(k, a)) = r_sim(3 * k + a);
            x(ws.v_col(k, a)) = v_sim(3 * k + a);
            x(ws.u_col(k, a)) = u(3 * k + a);
        }
        x(ws.s_col(k)) = sig(k);
    }
    from_scaled(ws, x, state.iterate);
}

}  // namespace detail

inline GuidanceSolution solve(const GuidanceProblem& problem,
                              const SolveOptions& opts = SolveOptions{},
                              const SolveHooks& hooks = SolveHooks{}) {
    auto t0 = std::chrono::steady_clock::now();

    SolverState st = initialize(problem, opts);
    if (hooks.after_init) hooks.after_init(st);

    std::uint64_t ordinal = 0;
    if (hooks.on_checkpoint) hooks.on_checkpoint("INIT", ordinal++, st.iterate);

    SolveStatus status = SolveStatus::MaxIters;
    std::uint64_t last_emitted = 0;
    for (std::uint64_t iter = 0; iter < opts.max_iters; ++iter) {
        if (hooks.before_iteration) hooks.before_iteration(st, iter);
        st = gradient_step(std::move(st), problem);
        if (st.diverged) {
            status = SolveStatus::Diverged;
            break;
        }
        if (opts.checkpoint_interval > 0 && hooks.on_checkpoint &&
            st.iteration_count % opts.checkpoint_interval == 0) {
            hooks.on_checkpoint("GRADIENT", ordinal++, st.iterate);
            last_emitted = st.iteration_count;
        }
        if (st.primal_residual <= opts.eps_abs && st.dual_residual <= opts.eps_abs) {
            status = SolveStatus::Converged;
            break;
        }
    }

    st.stage_checkpoints.push_back({"GRADIENT", st.iterate});
    if (hooks.on_checkpoint && last_emitted != st.iteration_count) {
        hooks.on_checkpoint("GRADIENT", ordinal++, st.iterate);
    }

    if (status == SolveStatus::Converged) {
        detail::restore_feasibility(st);
    }

    std::vector<double> workset = build_validation_workset(st, problem);
    if (hooks.on_validation_workset) hooks.on_validation_workset(workset);
    ValidationReport rep = evaluate_workset(workset, problem, opts.tolerances);
    st.stage_checkpoints.push_back({"VALIDATE", report_as_vector(rep)});
    if (hooks.on_checkpoint) {
        hooks.on_checkpoint("VALIDATE", ordinal++, st.stage_checkpoints.back().data);
        hooks.on_checkpoint("FINAL", ordinal++, st.iterate);
    }

    // A converged solve must carry a passing validation; anything else is
    // reported as a budget miss.
    if (status == SolveStatus::Converged && !rep.passed) {
        status = SolveStatus::MaxIters;
    }

    GuidanceSolution sol;
    const int N = problem.N;
    sol.trajectory.resize(static_cast<std::size_t>(N));
    sol.thrust.resize(static_cast<std::size_t>(N));
    sol.slack.resize(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) {
        auto uk = static_cast<std::size_t>(k);
        sol.trajectory[uk].r = {st.iterate[static_cast<std::size_t>(3 * k)],
                                st.iterate[static_cast<std::size_t>(3 * k + 1)],
                                st.iterate[static_cast<std::size_t>(3 * k + 2)]};
        sol.trajectory[uk].v = {st.iterate[static_cast<std::size_t>(3 * N + 3 * k)],
                                st.iterate[static_cast<std::size_t>(3 * N + 3 * k + 1)],
                                st.iterate[static_cast<std::size_t>(3 * N + 3 * k + 2)]};
        sol.thrust[uk] = {st.iterate[static_cast<std::size_t>(6 * N + 3 * k)],
                          st.iterate[static_cast<std::size_t>(6 * N + 3 * k + 1)],
                          st.iterate[static_cast<std::size_t>(6 * N + 3 * k + 2)]};
        sol.slack[uk] = st.iterate[static_cast<std::size_t>(9 * N + k)];
    }
    sol.dt = problem.dt;
    sol.fuel_cost = fuel_cost(sol);
    sol.status = status;
    sol.validation = rep;
    sol.checkpoints = st.stage_checkpoints;
    sol.iterations = st.iteration_count;
    sol.primal_residual = st.primal_residual;
    sol.dual_residual = st.dual_residual;
    sol.decision_variables = problem.decision_variables();
    sol.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

}  // namespace ftsim::guidance
