#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ftsim/arbiter.hpp"
#include "ftsim/fault.hpp"
#include "ftsim/guidance.hpp"
#include "ftsim/rng.hpp"

using namespace ftsim;
using namespace ftsim::arbiter;

namespace {

std::vector<ReplicaOutput> make_outputs(const std::vector<std::vector<double>>& payloads,
                                        const std::string& label = "STEP",
                                        std::uint64_t step = 0) {
    std::vector<ReplicaOutput> out;
    for (std::size_t i = 0; i < payloads.size(); ++i) {
        ReplicaOutput o;
        o.replica_id = static_cast<int>(i);
        o.payload = payloads[i];
        o.stage_label = label;
        o.step_index = step;
        out.push_back(std::move(o));
    }
    return out;
}

guidance::GuidanceProblem small_problem() {
    guidance::GuidanceProblem p;
    p.r0 = {0.0, 0.0, 40.0};
    p.v0 = {0.0, 0.0, 0.0};
    p.r_target = {0.0, 0.0, 0.0};
    p.v_target = {0.0, 0.0, 0.0};
    p.g = {0.0, 0.0, -3.71};
    p.rho1 = 1.0;
    p.rho2 = 8.0;
    p.N = 10;
    p.dt = 1.0;
    return p;
}

// Replicated guidance solve exposing its checkpoint stream, with an
// optional iterate corruption hook per replica.
ReplicaTask guidance_task(const guidance::GuidanceProblem& p,
                          std::function<void(int, guidance::SolverState&, std::uint64_t)>
                              corrupt = nullptr) {
    return [p, corrupt](int replica_id) {
        ReplicaTrace trace;
        guidance::SolveHooks hooks;
        hooks.on_checkpoint = [&trace](const std::string& label, std::uint64_t,
                                       const std::vector<double>& data) {
            trace.checkpoints.push_back({label, data});
        };
        if (corrupt) {
            hooks.before_iteration = [&, replica_id](guidance::SolverState& st,
                                                     std::uint64_t iter) {
                corrupt(replica_id, st, iter);
            };
        }
        guidance::SolveOptions opts;
        opts.checkpoint_interval = 5;
        guidance::solve(p, opts, hooks);
        return trace;
    };
}

}  // namespace

TEST_CASE("make_config applies the M+2 replica rule", "[arbiter]") {
    CHECK(make_config(1).replica_count == 3);
    CHECK(make_config(2).replica_count == 4);
    CHECK(make_config(3).replica_count == 5);
    CHECK_THROWS_AS(make_config(0), ConfigError);
}

TEST_CASE("vote: unanimous payloads pass through", "[arbiter]") {
    auto cfg = make_config(2);
    std::vector<double> p = {1.0, -2.0, 3.5};
    auto vr = vote(make_outputs({p, p, p, p}), cfg);
    CHECK(vr.quorum_met);
    CHECK_FALSE(vr.fallback_used);
    CHECK(vr.arbitrated == p);
    CHECK(vr.dissenting.empty());
    CHECK(vr.agreeing == std::set<int>{0, 1, 2, 3});
}

TEST_CASE("vote: single deviant replica is isolated under exact comparison", "[arbiter]") {
    auto cfg = make_config(2);
    std::vector<double> p = {1.0, -2.0, 3.5};
    std::vector<double> bad = p;
    bad[1] += 1e3;
    auto vr = vote(make_outputs({p, bad, p, p}), cfg);
    CHECK(vr.quorum_met);
    CHECK(vr.arbitrated == p);
    CHECK(vr.dissenting == std::set<int>{1});
    CHECK(vr.agreeing == std::set<int>{0, 2, 3});
}

TEST_CASE("vote: every partition shape of four outputs resolves as specified", "[arbiter]") {
    auto cfg = make_config(2, Mode::Static, false, 0.5);
    std::vector<double> a = {0.0};
    std::vector<double> a2 = {0.2};   // clusters with a
    std::vector<double> b = {10.0};
    std::vector<double> b2 = {10.3};  // clusters with b
    std::vector<double> c = {20.0};
    std::vector<double> d = {30.0};

    SECTION("4: unanimity") {
        auto vr = vote(make_outputs({a, a2, a, a2}), cfg);
        CHECK(vr.quorum_met);
        CHECK(vr.dissenting.empty());
    }
    SECTION("3+1: strict plurality") {
        auto vr = vote(make_outputs({a, a2, b, a}), cfg);
        CHECK(vr.quorum_met);
        CHECK(vr.dissenting == std::set<int>{2});
    }
    SECTION("2+2: tie fails quorum") {
        auto vr = vote(make_outputs({a, a2, b, b2}), cfg);
        CHECK_FALSE(vr.quorum_met);
        CHECK(vr.fallback_used);
        CHECK(vr.arbitrated.empty());
        CHECK(vr.dissenting == std::set<int>{0, 1, 2, 3});
    }
    SECTION("2+1+1: pair wins") {
        auto vr = vote(make_outputs({a, b, a2, c}), cfg);
        CHECK(vr.quorum_met);
        CHECK(vr.agreeing == std::set<int>{0, 2});
        CHECK(vr.dissenting == std::set<int>{1, 3});
    }
    SECTION("1+1+1+1: no majority") {
        auto vr = vote(make_outputs({a, b, c, d}), cfg);
        CHECK_FALSE(vr.quorum_met);
        CHECK(vr.fallback_used);
    }
}

TEST_CASE("vote: masking holds for every fault subset of size at most M", "[arbiter]") {
    for (int m = 1; m <= 3; ++m) {
        auto cfg = make_config(m);
        const int replicas = cfg.replica_count;
        std::vector<double> truth = {3.25, -1.5, 0.0, 7.0};

        for (int mask = 0; mask < (1 << replicas); ++mask) {
            int corrupted = std::popcount(static_cast<unsigned>(mask));
            if (corrupted == 0 || corrupted > m) continue;

            std::vector<std::vector<double>> payloads(static_cast<std::size_t>(replicas),
                                                      truth);
            for (int r = 0; r < replicas; ++r) {
                if (mask & (1 << r)) {
                    // Mutually distinct corruptions, each differing from truth.
                    payloads[static_cast<std::size_t>(r)][static_cast<std::size_t>(r % 4)] +=
                        1.0 + r;
                }
            }
            auto vr = vote(make_outputs(payloads), cfg);
            REQUIRE(vr.quorum_met);
            CHECK(vr.arbitrated == truth);
            std::set<int> expected_dissent;
            for (int r = 0; r < replicas; ++r) {
                if (mask & (1 << r)) expected_dissent.insert(r);
            }
            CHECK(vr.dissenting == expected_dissent);
        }
    }
}

TEST_CASE("vote: arbitrated components stay inside the winning cluster envelope",
          "[arbiter]") {
    auto cfg = make_config(2, Mode::Static, false, 0.1);
    SplitMix64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<double>> payloads;
        std::vector<double> base = {rng.gaussian(0.0, 1.0), rng.gaussian(0.0, 1.0)};
        for (int r = 0; r < 4; ++r) {
            std::vector<double> p = base;
            for (auto& x : p) x += rng.gaussian(0.0, 0.01);
            payloads.push_back(p);
        }
        auto vr = vote(make_outputs(payloads), cfg);
        REQUIRE(vr.quorum_met);
        for (std::size_t comp = 0; comp < vr.arbitrated.size(); ++comp) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (int id : vr.agreeing) {
                lo = std::min(lo, payloads[static_cast<std::size_t>(id)][comp]);
                hi = std::max(hi, payloads[static_cast<std::size_t>(id)][comp]);
            }
            CHECK(vr.arbitrated[comp] >= lo);
            CHECK(vr.arbitrated[comp] <= hi);
        }
    }
}

TEST_CASE("vote: structural errors are distinct from fault detection", "[arbiter]") {
    auto cfg = make_config(1);
    std::vector<double> p = {1.0};
    CHECK_THROWS_AS(vote(make_outputs({p, p}), cfg), ConfigError);
    auto outs = make_outputs({p, p, {1.0, 2.0}});
    CHECK_THROWS_AS(vote(outs, cfg), ConfigError);
}

TEST_CASE("run_static: fault-free replication matches a single run bit for bit",
          "[arbiter]") {
    auto p = small_problem();
    auto task = guidance_task(p);
    auto cfg = make_config(2, Mode::Static);

    auto result = run_static(task, cfg);
    CHECK(result.report.events.empty());

    ReplicaTrace single = task(0);
    REQUIRE_FALSE(single.checkpoints.empty());
    CHECK(result.arbitrated_final == single.checkpoints.back().payload);
}

TEST_CASE("run_static: corrupted replica is excluded and the result is unaffected",
          "[arbiter]") {
    auto p = small_problem();
    auto clean_task = guidance_task(p);
    ReplicaTrace reference = clean_task(0);

    auto task = guidance_task(
        p, [](int replica_id, guidance::SolverState& st, std::uint64_t iter) {
            if (replica_id == 1 && iter == 7) {
                st.iterate[4] = fault::flip_bit(st.iterate[4], 55);
            }
        });
    auto cfg = make_config(2, Mode::Static);
    auto result = run_static(task, cfg);

    REQUIRE_FALSE(result.report.events.empty());
    for (const auto& ev : result.report.events) {
        CHECK(ev.dissenting == std::vector<int>{1});
    }
    CHECK(result.arbitrated_final == reference.checkpoints.back().payload);
}

TEST_CASE("run_static: exclusion persists after the first dissent", "[arbiter]") {
    // Exactly one corrupted mid-run checkpoint; later checkpoints are healthy
    // again, but the replica must stay out of every subsequent vote.
    std::vector<std::vector<double>> healthy = {{1.0}, {2.0}, {3.0}, {4.0}};
    auto task = [&](int replica_id) {
        ReplicaTrace t;
        for (std::size_t i = 0; i < healthy.size(); ++i) {
            auto payload = healthy[i];
            if (replica_id == 1 && i == 1) payload[0] += 100.0;
            t.checkpoints.push_back({"STAGE", payload});
        }
        return t;
    };
    auto cfg = make_config(2, Mode::Static);
    auto result = run_static(task, cfg);
    REQUIRE(result.report.events.size() == 1);
    CHECK(result.report.events[0].step == 1);
    CHECK(result.report.events[0].dissenting == std::vector<int>{1});
    CHECK(result.arbitrated_final == healthy.back());
}

TEST_CASE("run_static: final-only granularity skips intermediate votes", "[arbiter]") {
    std::vector<std::vector<double>> healthy = {{1.0}, {2.0}, {3.0}};
    auto task = [&](int replica_id) {
        ReplicaTrace t;
        for (std::size_t i = 0; i < healthy.size(); ++i) {
            auto payload = healthy[i];
            if (replica_id == 1 && i == 1) payload[0] += 100.0;  // never voted on
            t.checkpoints.push_back({"STAGE", payload});
        }
        return t;
    };
    auto cfg = make_config(2, Mode::Static, true, 0.0, Granularity::FinalOnly);
    auto result = run_static(task, cfg);
    CHECK(result.report.events.empty());
    CHECK(result.arbitrated_final == healthy.back());
}

TEST_CASE("run_static: two distinct corruptions exceed M=1 capacity", "[arbiter]") {
    auto p = small_problem();
    auto task = guidance_task(
        p, [](int replica_id, guidance::SolverState& st, std::uint64_t iter) {
            if (iter != 7) return;
            if (replica_id == 0) st.iterate[4] = fault::flip_bit(st.iterate[4], 55);
            if (replica_id == 1) st.iterate[9] = fault::flip_bit(st.iterate[9], 54);
        });
    auto cfg = make_config(1, Mode::Static);
    CHECK_THROWS_AS(run_static(task, cfg), QuorumLossError);
}

TEST_CASE("dynamic: unanimous step passes through without a report event", "[arbiter]") {
    DynamicArbiter arb(make_config(2, Mode::Dynamic));
    std::vector<double> p = {0.5};
    auto vr = arb.arbitrate_step(make_outputs({p, p, p, p}, "CTRL", 0));
    CHECK(vr.quorum_met);
    CHECK(vr.arbitrated == p);
    CHECK(arb.report().events.empty());
}

TEST_CASE("dynamic: diverging replica dissents and the majority rules", "[arbiter]") {
    DynamicArbiter arb(make_config(2, Mode::Dynamic));
    std::vector<double> p = {0.5};
    std::vector<double> bad = {-4.0};
    auto vr = arb.arbitrate_step(make_outputs({p, bad, p, p}, "CTRL", 3));
    CHECK(vr.quorum_met);
    CHECK(vr.arbitrated == p);
    CHECK(vr.dissenting == std::set<int>{1});
    REQUIRE(arb.report().events.size() == 1);
    CHECK(arb.report().events[0].step == 3);
    CHECK(arb.report().events[0].max_deviation == Catch::Approx(4.5));
}

TEST_CASE("dynamic: quorum loss holds the previous arbitrated value", "[arbiter]") {
    DynamicArbiter arb(make_config(2, Mode::Dynamic));
    std::vector<double> p = {0.5};
    arb.arbitrate_step(make_outputs({p, p, p, p}, "CTRL", 0));

    auto vr = arb.arbitrate_step(make_outputs({{1.0}, {2.0}, {3.0}, {4.0}}, "CTRL", 1));
    CHECK_FALSE(vr.quorum_met);
    CHECK(vr.fallback_used);
    CHECK(vr.arbitrated == p);
    REQUIRE_FALSE(arb.report().events.empty());
    CHECK(arb.report().events.back().action == "held_previous");
}

TEST_CASE("dynamic: persistent exclusion keeps a dissenting replica out", "[arbiter]") {
    auto cfg = make_config(2, Mode::Dynamic);
    cfg.persistent_exclusion = true;
    DynamicArbiter arb(cfg);
    std::vector<double> p = {0.5};
    std::vector<double> bad = {9.0};
    arb.arbitrate_step(make_outputs({p, bad, p, p}, "CTRL", 0));
    // Replica 1 recovers, but stays flagged as dissenting.
    auto vr = arb.arbitrate_step(make_outputs({p, p, p, p}, "CTRL", 1));
    CHECK(vr.quorum_met);
    CHECK(vr.dissenting == std::set<int>{1});
    CHECK(vr.arbitrated == p);
}
