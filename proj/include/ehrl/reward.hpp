#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ehrl/error.hpp"
#include "ehrl/events.hpp"
#include "ehrl/topology.hpp"

namespace ehrl {

struct RewardConfig {
    double lambda_base = 0.1;
    int device_count = 15;
    // Weight other nodes by range/d instead of 1/d.
    bool normalized_distance = false;
    // When false the spatial reward collapses to the local reward (ablation).
    bool spatial = true;

    double sink_bonus() const { return std::log(static_cast<double>(device_count) * lambda_base); }
    void validate() const {
        if (!(lambda_base > 0.0)) throw ConfigError("basic reward must be positive");
        if (device_count < 1) throw ConfigError("device count must be positive");
    }
};

// Zero for every failure and for non-transfers; otherwise base + 1/k, plus the
// sink bonus ln(devices * base) when the receiver is the sink.
inline double local_reward(const StepEvent& ev, const RewardConfig& cfg) {
    if (!is_success(ev.outcome)) return 0.0;
    if (ev.receiver_queue_len < 1) throw ContractError("successful transfer reported an empty receiver queue");
    double r = cfg.lambda_base + 1.0 / static_cast<double>(ev.receiver_queue_len);
    if (ev.outcome == Outcome::delivered_to_sink) r += cfg.sink_bonus();
    return r;
}

// Per-node, time-stamped local rewards of the current day, with prefix sums for
// window queries. Timestamps per node are non-decreasing.
class RewardLedger {
public:
    explicit RewardLedger(std::size_t nodes = 0) { reset(nodes); }

    void reset(std::size_t nodes) {
        times_.assign(nodes, {});
        prefix_.assign(nodes, {0.0});
    }
    void append(NodeId node, double t, double r) {
        auto& ts = times_.at(node.index());
        if (!ts.empty() && t < ts.back()) throw ContractError("ledger timestamps must be non-decreasing per node");
        ts.push_back(t);
        prefix_[node.index()].push_back(prefix_[node.index()].back() + r);
    }
    // Sum of node's rewards stamped in (from, to].
    double window_sum(NodeId node, double from, double to) const {
        const auto& ts = times_.at(node.index());
        const auto& ps = prefix_[node.index()];
        auto lo = std::upper_bound(ts.begin(), ts.end(), from) - ts.begin();
        auto hi = std::upper_bound(ts.begin(), ts.end(), to) - ts.begin();
        if (hi <= lo) return 0.0;
        return ps[static_cast<std::size_t>(hi)] - ps[static_cast<std::size_t>(lo)];
    }
    std::size_t node_count() const { return times_.size(); }
    std::size_t entries(NodeId node) const { return times_.at(node.index()).size(); }

private:
    std::vector<std::vector<double>> times_;
    std::vector<std::vector<double>> prefix_;
};

// Local reward of `node` plus every other node's rewards earned in
// (t_prev, t_now], each weighted by inverse distance.
inline double spatial_reward(NodeId node, double local, double t_prev, double t_now, const RewardLedger& ledger,
                             const Topology& topo, const RewardConfig& cfg) {
    if (!cfg.spatial) return local;
    double sr = local;
    for (std::size_t j = 0; j < ledger.node_count(); ++j) {
        NodeId other(static_cast<std::int32_t>(j));
        if (other == node) continue;
        double s = ledger.window_sum(other, t_prev, t_now);
        if (s == 0.0) continue;
        double d = topo.distance(node, other);
        if (!(d > 0.0)) throw ConfigError("coincident nodes in spatial reward");
        sr += (cfg.normalized_distance ? topo.range() / d : 1.0 / d) * s;
    }
    return sr;
}

// Training-time reward bookkeeping: logs every nonzero local reward and turns a
// completed agent step into its spatial reward.
class SpatialRewardTracker {
public:
    SpatialRewardTracker(const Topology& topo, const RewardConfig& cfg) : topo_(topo), cfg_(cfg), ledger_(topo.node_count()) {}
    void reset() { ledger_.reset(topo_.node_count()); }
    void record(const StepEvent& ev) {
        const double r = local_reward(ev, cfg_);
        if (r != 0.0) ledger_.append(ev.node, ev.t, r);
    }
    double local(const Transition& tr) const { return local_reward(tr.event, cfg_); }
    double spatial(const Transition& tr) const {
        return spatial_reward(tr.node, local(tr), tr.t_action, tr.t_next, ledger_, topo_, cfg_);
    }
    const RewardLedger& ledger() const { return ledger_; }

private:
    const Topology& topo_;
    RewardConfig cfg_;
    RewardLedger ledger_;
};

} // namespace ehrl
