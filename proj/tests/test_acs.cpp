#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ftsim/acs.hpp"
#include "ftsim/rng.hpp"

using namespace ftsim;
using namespace ftsim::acs;

namespace {

arbiter::ArbiterConfig demo_arbiter() {
    return arbiter::make_config(2, arbiter::Mode::Dynamic);
}

}  // namespace

TEST_CASE("pd_control: equilibrium produces zero command", "[acs]") {
    ControllerConfig cfg;
    CHECK(pd_control(0.7, 0.0, 0.7, cfg) == 0.0);
}

TEST_CASE("pd_control: direct substitution", "[acs]") {
    ControllerConfig cfg;
    cfg.kp = 1.0;
    cfg.kd = 2.0;
    CHECK(pd_control(1.0, 0.0, 0.0, cfg) == -1.0);
    CHECK(pd_control(0.0, 1.0, 0.0, cfg) == -2.0);
}

TEST_CASE("pd_control: the law is linear in the error pair", "[acs]") {
    SplitMix64 rng(7);
    for (int i = 0; i < 100; ++i) {
        double e = rng.gaussian(0.0, 2.0);
        double w = rng.gaussian(0.0, 2.0);
        double a = rng.gaussian(0.0, 3.0);
        double u1 = pd_control(a * e, a * w, 0.0, 1.3, 0.7);
        double u2 = a * pd_control(e, w, 0.0, 1.3, 0.7);
        CHECK(u1 == Catch::Approx(u2).margin(1e-12));
    }
}

TEST_CASE("plant_step: analytic one-step update", "[acs]") {
    PlantState s;
    PlantState n = plant_step(s, 1.0, 0.125);
    CHECK(n.theta == 0.0078125);
    CHECK(n.omega == 0.125);
    CHECK(n.t == 0.125);
}

TEST_CASE("plant_step: zero acceleration drifts linearly", "[acs]") {
    PlantState s;
    s.theta = 1.0;
    s.omega = 0.5;
    PlantState n = plant_step(s, 0.0, 0.25);
    CHECK(n.theta == Catch::Approx(1.125));
    CHECK(n.omega == 0.5);
}

TEST_CASE("plant_step: default gains contract the closed loop", "[acs]") {
    ControllerConfig cfg;
    double dt = 1.0 / cfg.rate_hz;
    PlantState s;
    s.theta = 1.0;
    s.omega = 0.0;
    for (int k = 0; k < 400; ++k) {
        double u = pd_control(s.theta, s.omega, 0.0, cfg);
        s = plant_step(s, u, dt);
    }
    CHECK(std::abs(s.theta) < 1e-3);
    CHECK(std::abs(s.omega) < 1e-3);
}

TEST_CASE("simulate: fault-free run is bit-identical to the reference", "[acs]") {
    Scenario sc;
    sc.duration = 10.0;
    sc.fault_events.clear();
    ControllerConfig cfg;
    SimLog log = simulate(sc, cfg, demo_arbiter());

    REQUIRE(log.steps.size() == log.reference.size());
    for (std::size_t k = 0; k < log.steps.size(); ++k) {
        CHECK(log.steps[k].arbitrated_u == log.reference[k].u);
        CHECK(log.steps[k].theta == log.reference[k].theta);
        CHECK(log.steps[k].omega == log.reference[k].omega);
        CHECK(log.steps[k].dissent_mask == 0);
    }
    CHECK(log.fault_report.events.empty());
}

TEST_CASE("simulate: default demo isolates both faulted replicas", "[acs]") {
    Scenario sc = default_demo_scenario();
    ControllerConfig cfg;
    SimLog log = simulate(sc, cfg, demo_arbiter());

    const double dt = log.dt;

    // Arbitrated stream tracks the fault-free loop exactly.
    REQUIRE(log.steps.size() == log.reference.size());
    for (std::size_t k = 0; k < log.steps.size(); ++k) {
        REQUIRE(log.steps[k].arbitrated_u == log.reference[k].u);
        REQUIRE(log.steps[k].theta == log.reference[k].theta);
    }
    CHECK_FALSE(log.quorum_loss_seen);

    // First dissent of each replica lands at its injection time.
    double first1 = -1.0, first3 = -1.0;
    std::size_t post1 = 0, dissent1 = 0, post3 = 0, dissent3 = 0;
    for (const auto& st : log.steps) {
        bool d1 = (st.dissent_mask >> 1) & 1u;
        bool d3 = (st.dissent_mask >> 3) & 1u;
        if (d1 && first1 < 0.0) first1 = st.t;
        if (d3 && first3 < 0.0) first3 = st.t;
        if (st.t + 1e-12 >= 15.0) {
            ++post1;
            if (d1) ++dissent1;
        }
        if (st.t + 1e-12 >= 30.0) {
            ++post3;
            if (d3) ++dissent3;
        }
    }
    CHECK(std::abs(first1 - 15.0) <= dt + 1e-12);
    CHECK(std::abs(first3 - 30.0) <= dt + 1e-12);

    // Sign-flipped gain keeps the faulted replicas diverged nearly always.
    CHECK(static_cast<double>(dissent1) >= 0.9 * static_cast<double>(post1));
    CHECK(static_cast<double>(dissent3) >= 0.9 * static_cast<double>(post3));
}

TEST_CASE("simulate: exceeding the fault capacity trips the fallback and continues",
          "[acs]") {
    Scenario sc = default_demo_scenario();
    sc.fault_events = {{5.0, 0, GainParam::Kp, 63},
                       {5.0, 1, GainParam::Kd, 62},
                       {5.0, 2, GainParam::Kp, 60}};
    ControllerConfig cfg;
    SimLog log = simulate(sc, cfg, demo_arbiter());
    CHECK(log.quorum_loss_seen);
    CHECK(log.steps.size() == log.reference.size());  // ran to completion
    bool held = false;
    for (const auto& ev : log.fault_report.events) {
        if (ev.action == "held_previous") held = true;
    }
    CHECK(held);
}

TEST_CASE("simulate: zero-noise reference settles within two percent in ten seconds",
          "[acs]") {
    Scenario sc;
    sc.duration = 12.0;
    sc.fault_events.clear();
    ControllerConfig cfg;
    cfg.noise_sigma_theta = 0.0;
    cfg.noise_sigma_omega = 0.0;
    SimLog log = simulate(sc, cfg, demo_arbiter());
    for (const auto& st : log.steps) {
        if (st.t >= 10.0) {
            CHECK(std::abs(st.theta - 1.0) <= 0.02);
        }
    }
}

TEST_CASE("simulate: a prefix run reproduces the long run step for step", "[acs]") {
    Scenario longer = default_demo_scenario();
    Scenario shorter = longer;
    shorter.duration = 20.0;
    std::erase_if(shorter.fault_events,
                  [&](const GainFaultEvent& e) { return e.time > shorter.duration; });
    ControllerConfig cfg;
    SimLog a = simulate(shorter, cfg, demo_arbiter());
    SimLog b = simulate(longer, cfg, demo_arbiter());
    REQUIRE(a.steps.size() < b.steps.size());
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
        CHECK(a.steps[k].arbitrated_u == b.steps[k].arbitrated_u);
        CHECK(a.steps[k].theta == b.steps[k].theta);
        CHECK(a.steps[k].dissent_mask == b.steps[k].dissent_mask);
    }
}

TEST_CASE("simulate: rejects malformed scenarios", "[acs]") {
    ControllerConfig cfg;
    Scenario sc = default_demo_scenario();
    sc.fault_events[0].time = 100.0;  // outside duration
    CHECK_THROWS_AS(simulate(sc, cfg, demo_arbiter()), ConfigError);

    sc = default_demo_scenario();
    sc.fault_events[0].replica_id = 9;
    CHECK_THROWS_AS(simulate(sc, cfg, demo_arbiter()), ConfigError);

    sc = default_demo_scenario();
    auto static_cfg = arbiter::make_config(2, arbiter::Mode::Static);
    CHECK_THROWS_AS(simulate(sc, cfg, static_cfg), ConfigError);
}
