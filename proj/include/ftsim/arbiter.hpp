#pragma once

// =============================================================================
// Redundant-execution voting.
//
// M+2 replicas run identical deterministic software; the voter clusters
// their output vectors under an exact (bitwise) or tolerance comparison,
// arbitrates the largest cluster by component-wise median, and isolates
// dissenting replicas. Static mode votes on an ordered checkpoint stream
// and excludes dissenters for the rest of the run; dynamic mode votes once
// per control step, before the caller advances the plant, holding the last
// arbitrated value if quorum is lost.
// =============================================================================

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ftsim/common.hpp"

namespace ftsim::arbiter {

enum class Mode { Static, Dynamic };
enum class Granularity { FinalOnly, PerStage };

struct ArbiterConfig {
    int faults_to_catch = 1;  // M
    int replica_count = 3;    // M + 2
    Mode mode = Mode::Static;
    bool exact_compare = true;
    double epsilon = 0.0;  // tolerance comparison radius; meaningful when !exact_compare
    Granularity vote_granularity = Granularity::PerStage;
    // Dynamic-mode option: once a replica dissents it stays excluded, as in
    // static mode. Off by default so transiently faulted replicas may recover.
    bool persistent_exclusion = false;
};

inline ArbiterConfig make_config(int faults_to_catch, Mode mode = Mode::Static,
                                 bool exact_compare = true, double epsilon = 0.0,
                                 Granularity granularity = Granularity::PerStage) {
    if (faults_to_catch < 1) {
        throw ConfigError("arbiter: faults_to_catch must be at least 1");
    }
    if (exact_compare && epsilon != 0.0) {
        throw ConfigError("arbiter: epsilon is only meaningful for tolerance comparison");
    }
    if (!exact_compare && !(epsilon >= 0.0)) {
        throw ConfigError("arbiter: epsilon must be non-negative");
    }
    ArbiterConfig cfg;
    cfg.faults_to_catch = faults_to_catch;
    cfg.replica_count = faults_to_catch + 2;
    cfg.mode = mode;
    cfg.exact_compare = exact_compare;
    cfg.epsilon = epsilon;
    cfg.vote_granularity = granularity;
    return cfg;
}

struct ReplicaOutput {
    int replica_id = 0;
    std::vector<double> payload;
    std::string stage_label;
    std::uint64_t step_index = 0;
};

struct VoteResult {
    std::vector<double> arbitrated;  // empty when quorum was not met
    std::set<int> agreeing;
    std::set<int> dissenting;
    bool quorum_met = false;
    bool fallback_used = false;
};

struct FaultEvent {
    std::uint64_t step = 0;
    std::string stage_label;
    std::vector<int> dissenting;
    double max_deviation = 0.0;
    std::string action;
};

struct FaultReport {
    std::vector<FaultEvent> events;
};

class QuorumLossError : public std::runtime_error {
public:
    QuorumLossError(const std::string& what, FaultReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    const FaultReport& report() const { return report_; }

private:
    FaultReport report_;
};

namespace detail {

inline bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) {
            return false;
        }
    }
    return true;
}

inline bool payloads_agree(const ArbiterConfig& cfg, const std::vector<double>& a,
                           const std::vector<double>& b) {
    if (cfg.exact_compare) return bitwise_equal(a, b);
    return inf_distance(a, b) <= cfg.epsilon;
}

// First-fit clustering against each cluster's first member. Deterministic
// in input order.
inline std::vector<std::vector<int>> cluster_payloads(
    const ArbiterConfig& cfg, const std::vector<const ReplicaOutput*>& outputs) {
    std::vector<std::vector<int>> clusters;  // indices into `outputs`
    for (int i = 0; i < static_cast<int>(outputs.size()); ++i) {
        bool placed = false;
        for (auto& cl : clusters) {
            const auto& rep = outputs[static_cast<std::size_t>(cl.front())]->payload;
            if (payloads_agree(cfg, outputs[static_cast<std::size_t>(i)]->payload, rep)) {
                cl.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) clusters.push_back({i});
    }
    return clusters;
}

inline std::vector<double> component_median(
    const std::vector<const ReplicaOutput*>& outputs, const std::vector<int>& cluster) {
    const std::size_t n = outputs[static_cast<std::size_t>(cluster.front())]->payload.size();
    std::vector<double> med(n, 0.0);
    std::vector<double> col(cluster.size());
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t j = 0; j < cluster.size(); ++j) {
            col[j] = outputs[static_cast<std::size_t>(cluster[j])]->payload[c];
        }
        std::sort(col.begin(), col.end());
        std::size_t m = col.size();
        med[c] = (m % 2 == 1) ? col[m / 2] : 0.5 * (col[m / 2 - 1] + col[m / 2]);
    }
    return med;
}

// Core vote over any participant subset. The public vote() enforces the
// full-replica-set precondition; the run drivers call this with survivors.
inline VoteResult vote_subset(const std::vector<const ReplicaOutput*>& outputs,
                              const ArbiterConfig& cfg) {
    if (outputs.empty()) {
        VoteResult r;
        r.fallback_used = true;
        return r;
    }
    const std::size_t payload_len = outputs.front()->payload.size();
    for (const auto* o : outputs) {
        if (o->payload.size() != payload_len) {
            throw ConfigError("arbiter: payload length mismatch across replicas");
        }
        if (o->stage_label != outputs.front()->stage_label ||
            o->step_index != outputs.front()->step_index) {
            throw ConfigError("arbiter: replicas disagree on stage label or step index");
        }
    }

    auto clusters = cluster_payloads(cfg, outputs);
    std::size_t best = 0;
    bool tie = false;
    for (std::size_t i = 1; i < clusters.size(); ++i) {
        if (clusters[i].size() > clusters[best].size()) {
            best = i;
            tie = false;
        } else if (clusters[i].size() == clusters[best].size()) {
            tie = true;
        }
    }

    VoteResult r;
    if (!tie && clusters[best].size() >= 2) {
        r.quorum_met = true;
        r.arbitrated = component_median(outputs, clusters[best]);
        for (int idx : clusters[best]) {
            r.agreeing.insert(outputs[static_cast<std::size_t>(idx)]->replica_id);
        }
        for (const auto* o : outputs) {
            if (!r.agreeing.count(o->replica_id)) r.dissenting.insert(o->replica_id);
        }
    } else {
        r.quorum_met = false;
        r.fallback_used = true;
        for (const auto* o : outputs) r.dissenting.insert(o->replica_id);
    }
    return r;
}

inline double max_deviation(const std::vector<const ReplicaOutput*>& outputs,
                            const VoteResult& r) {
    double dev = 0.0;
    if (r.quorum_met) {
        for (const auto* o : outputs) {
            if (r.dissenting.count(o->replica_id)) {
                dev = std::max(dev, inf_distance(o->payload, r.arbitrated));
            }
        }
    } else {
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            for (std::size_t j = i + 1; j < outputs.size(); ++j) {
                dev = std::max(dev, inf_distance(outputs[i]->payload, outputs[j]->payload));
            }
        }
    }
    return dev;
}

}  // namespace detail

// Clusters the replica outputs and arbitrates the strict-plurality cluster.
// Requires one output per configured replica; reduced-set votes happen
// inside the run drivers after exclusion.
inline VoteResult vote(const std::vector<ReplicaOutput>& outputs, const ArbiterConfig& cfg) {
    if (static_cast<int>(outputs.size()) != cfg.replica_count) {
        throw ConfigError("arbiter: expected " + std::to_string(cfg.replica_count) +
                          " replica outputs, got " + std::to_string(outputs.size()));
    }
    std::vector<const ReplicaOutput*> ptrs;
    ptrs.reserve(outputs.size());
    for (const auto& o : outputs) ptrs.push_back(&o);
    return detail::vote_subset(ptrs, cfg);
}

// -----------------------------------------------------------------------------
// Static mode: replicated deterministic computation with checkpoint votes
// -----------------------------------------------------------------------------

struct CheckpointRecord {
    std::string label;
    std::vector<double> payload;
};

struct ReplicaTrace {
    std::vector<CheckpointRecord> checkpoints;
};

using ReplicaTask = std::function<ReplicaTrace(int replica_id)>;

struct StaticRunResult {
    std::vector<double> arbitrated_final;
    FaultReport report;
};

// Runs the task on every replica, votes across the ordered checkpoint
// stream, and excludes a replica from all later votes once it dissents
// (or fails to produce a checkpoint the surviving majority produced).
inline StaticRunResult run_static(const ReplicaTask& task, const ArbiterConfig& cfg) {
    if (cfg.mode != Mode::Static) {
        throw ConfigError("arbiter: run_static requires static mode configuration");
    }

    std::vector<ReplicaTrace> traces;
    traces.reserve(static_cast<std::size_t>(cfg.replica_count));
    for (int r = 0; r < cfg.replica_count; ++r) {
        traces.push_back(task(r));
    }

    std::size_t max_len = 0;
    for (const auto& t : traces) max_len = std::max(max_len, t.checkpoints.size());
    if (max_len == 0) {
        throw ConfigError("arbiter: task produced no checkpoints");
    }

    FaultReport report;
    std::set<int> excluded;
    std::vector<double> final_payload;

    for (std::size_t pos = 0; pos < max_len; ++pos) {
        if (cfg.vote_granularity == Granularity::FinalOnly && pos + 1 < max_len) continue;

        // Plurality label among survivors that have this checkpoint.
        std::vector<std::pair<std::string, int>> label_counts;
        for (int r = 0; r < cfg.replica_count; ++r) {
            if (excluded.count(r) || pos >= traces[static_cast<std::size_t>(r)].checkpoints.size())
                continue;
            const auto& lbl = traces[static_cast<std::size_t>(r)].checkpoints[pos].label;
            bool found = false;
            for (auto& lc : label_counts) {
                if (lc.first == lbl) {
                    ++lc.second;
                    found = true;
                }
            }
            if (!found) label_counts.emplace_back(lbl, 1);
        }
        std::string ref_label;
        int best_count = 0;
        for (const auto& lc : label_counts) {
            if (lc.second > best_count) {
                ref_label = lc.first;
                best_count = lc.second;
            }
        }

        std::vector<ReplicaOutput> held;
        std::vector<int> missing;
        for (int r = 0; r < cfg.replica_count; ++r) {
            if (excluded.count(r)) continue;
            const auto& tr = traces[static_cast<std::size_t>(r)];
            if (pos >= tr.checkpoints.size() || tr.checkpoints[pos].label != ref_label) {
                missing.push_back(r);
                continue;
            }
            ReplicaOutput o;
            o.replica_id = r;
            o.payload = tr.checkpoints[pos].payload;
            o.stage_label = ref_label;
            o.step_index = pos;
            held.push_back(std::move(o));
        }

        std::vector<const ReplicaOutput*> ptrs;
        ptrs.reserve(held.size());
        for (const auto& o : held) ptrs.push_back(&o);

        VoteResult vr = detail::vote_subset(ptrs, cfg);

        std::vector<int> newly_dissenting = missing;
        for (int id : vr.dissenting) newly_dissenting.push_back(id);
        std::sort(newly_dissenting.begin(), newly_dissenting.end());

        if (!newly_dissenting.empty() || !vr.quorum_met) {
            FaultEvent ev;
            ev.step = pos;
            ev.stage_label = ref_label;
            ev.dissenting = newly_dissenting;
            ev.max_deviation = missing.empty()
                                   ? detail::max_deviation(ptrs, vr)
                                   : std::numeric_limits<double>::infinity();
            ev.action = vr.quorum_met ? "excluded" : "quorum_loss";
            report.events.push_back(std::move(ev));
        }

        if (!vr.quorum_met) {
            throw QuorumLossError("arbiter: quorum lost at checkpoint " + std::to_string(pos) +
                                      " (" + ref_label + ")",
                                  report);
        }
        for (int id : newly_dissenting) excluded.insert(id);
        if (pos + 1 == max_len) final_payload = vr.arbitrated;
    }

    return {std::move(final_payload), std::move(report)};
}

// -----------------------------------------------------------------------------
// Dynamic mode: per-step arbitration with fallback hold
// -----------------------------------------------------------------------------

class DynamicArbiter {
public:
    explicit DynamicArbiter(ArbiterConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.mode != Mode::Dynamic) {
            throw ConfigError("arbiter: DynamicArbiter requires dynamic mode configuration");
        }
    }

    // Votes on this step's outputs and returns the command to apply in the
    // same step. On quorum failure the previous arbitrated value is held
    // and flagged.
    VoteResult arbitrate_step(const std::vector<ReplicaOutput>& outputs) {
        if (static_cast<int>(outputs.size()) != cfg_.replica_count) {
            throw ConfigError("arbiter: expected " + std::to_string(cfg_.replica_count) +
                              " replica outputs, got " + std::to_string(outputs.size()));
        }
        std::vector<const ReplicaOutput*> ptrs;
        for (const auto& o : outputs) {
            if (cfg_.persistent_exclusion && excluded_.count(o.replica_id)) continue;
            ptrs.push_back(&o);
        }

        VoteResult vr = detail::vote_subset(ptrs, cfg_);

        if (cfg_.persistent_exclusion) {
            for (int id : excluded_) vr.dissenting.insert(id);
        }

        if (vr.quorum_met) {
            last_arbitrated_ = vr.arbitrated;
        } else {
            vr.arbitrated = last_arbitrated_.empty()
                                ? std::vector<double>(outputs.front().payload.size(), 0.0)
                                : last_arbitrated_;
            vr.fallback_used = true;
        }

        if (!vr.dissenting.empty() || !vr.quorum_met) {
            FaultEvent ev;
            ev.step = outputs.front().step_index;
            ev.stage_label = outputs.front().stage_label;
            ev.dissenting.assign(vr.dissenting.begin(), vr.dissenting.end());
            ev.max_deviation = detail::max_deviation(ptrs, vr);
            ev.action = vr.quorum_met ? "masked" : "held_previous";
            report_.events.push_back(std::move(ev));
            if (cfg_.persistent_exclusion && vr.quorum_met) {
                for (int id : vr.dissenting) excluded_.insert(id);
            }
        }
        return vr;
    }

    const FaultReport& report() const { return report_; }
    const ArbiterConfig& config() const { return cfg_; }

private:
    ArbiterConfig cfg_;
    std::vector<double> last_arbitrated_;
    std::set<int> excluded_;
    FaultReport report_;
};

}  // namespace ftsim::arbiter
