#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ehrl/checkpoint.hpp"
#include "ehrl/error.hpp"
#include "ehrl/observation.hpp"
#include "ehrl/reward.hpp"
#include "ehrl/world.hpp"

namespace ehrl {

inline constexpr std::size_t qtable_energy_buckets = 4;
inline constexpr std::size_t qtable_queue_buckets = 4;
inline constexpr std::size_t qtable_states = qtable_energy_buckets * qtable_queue_buckets * slot_count;
inline constexpr std::size_t qtable_actions = energy_choices * relay_choices;

inline std::size_t bucket_of(double frac, std::size_t buckets) {
    auto b = static_cast<std::size_t>(std::floor(std::clamp(frac, 0.0, 1.0) * static_cast<double>(buckets)));
    return std::min(b, buckets - 1);
}

// Own energy (4 buckets) x own queue fill (4 buckets) x head-packet source id.
inline std::size_t qtable_state(const Observation& obs) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < slot_count; ++i)
        if (obs.source(i) > 0.5f) src = i;
    return (bucket_of(obs.energy(0), qtable_energy_buckets) * qtable_queue_buckets + bucket_of(obs.queue(0), qtable_queue_buckets)) *
               slot_count + src;
}

inline std::size_t qtable_action_index(const AgentAction& a) {
    return static_cast<std::size_t>(a.energy_index) * relay_choices + static_cast<std::size_t>(a.relay_slot);
}
inline AgentAction qtable_action(std::size_t idx) {
    return AgentAction{static_cast<int>(idx / relay_choices), static_cast<int>(idx % relay_choices)};
}
inline bool action_allowed(std::size_t idx, NeighborMask mask) { return mask.valid(idx % relay_choices); }

// Dense action-value table of one device; unvisited entries read as zero.
class QTable {
public:
    QTable() : q_(qtable_states * qtable_actions, 0.0) {}

    double value(std::size_t s, std::size_t a) const { return q_.at(s * qtable_actions + a); }
    double& value(std::size_t s, std::size_t a) { return q_.at(s * qtable_actions + a); }
    const std::vector<double>& values() const { return q_; }

    // Best allowed action; ties go to the lowest index.
    std::size_t greedy(std::size_t s, NeighborMask mask) const {
        if (mask.empty()) throw ContractError("no valid relay slot: node has no neighbors");
        std::size_t best = qtable_actions;
        for (std::size_t a = 0; a < qtable_actions; ++a) {
            if (!action_allowed(a, mask)) continue;
            if (best == qtable_actions || value(s, a) > value(s, best)) best = a;
        }
        return best;
    }
    double max_value(std::size_t s, NeighborMask mask) const { return value(s, greedy(s, mask)); }

    // Uniform over allowed actions with probability eps, greedy otherwise.
    std::size_t select(std::size_t s, NeighborMask mask, double eps, std::mt19937_64& rng) const {
        if (mask.empty()) throw ContractError("no valid relay slot: node has no neighbors");
        if (eps > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < eps) {
            const int n = mask.count() * static_cast<int>(energy_choices);
            int k = std::uniform_int_distribution<int>(0, n - 1)(rng);
            for (std::size_t a = 0; a < qtable_actions; ++a)
                if (action_allowed(a, mask) && k-- == 0) return a;
        }
        return greedy(s, mask);
    }

    // Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)); terminal steps do not bootstrap.
    void update(std::size_t s, std::size_t a, double r, std::size_t s_next, NeighborMask next_mask, bool terminal,
                double alpha, double gamma) {
        double target = r;
        if (!terminal && !next_mask.empty()) target += gamma * max_value(s_next, next_mask);
        double& q = value(s, a);
        q += alpha * (target - q);
    }

    bool operator==(const QTable&) const = default;

private:
    std::vector<double> q_;
};

struct QTableConfig {
    double alpha = 0.1;
    double gamma = 0.9;
    double eps_start = 1.0;
    double eps_end = 0.05;
    int eps_decay_episodes = 10;
    std::uint64_t seed = 1;

    // Linear decay from eps_start at episode 1 to eps_end at episode 1 + decay.
    double epsilon(int episode) const {
        if (eps_decay_episodes <= 0) return eps_end;
        double f = std::clamp(static_cast<double>(episode - 1) / eps_decay_episodes, 0.0, 1.0);
        return eps_start + (eps_end - eps_start) * f;
    }
    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("Q-table learning rate must lie in (0, 1]");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("Q-table discount must lie in [0, 1)");
        if (eps_start < 0 || eps_start > 1 || eps_end < 0 || eps_end > 1) throw ConfigError("exploration rates must lie in [0, 1]");
        if (eps_decay_episodes < 0) throw ConfigError("exploration decay must be non-negative");
    }
};

// One Q-table per device, trained online on the local reward.
class QTableController final : public Controller {
public:
    QTableController(QTableConfig cfg, RewardConfig reward, std::size_t nodes)
        : cfg_(cfg), reward_(reward), tables_(nodes), rngs_(nodes) {
        cfg_.validate();
    }

    void on_day_start(const World& world) override {
        eps_ = cfg_.epsilon(world.day());
        for (std::size_t i = 0; i < rngs_.size(); ++i) rngs_[i].seed(derive_seed(cfg_.seed, i, static_cast<std::uint64_t>(world.day()), 0x97ab));
    }

    AgentAction act(const World&, const DecisionRequest& req) override {
        const auto i = req.node.index();
        return qtable_action(tables_.at(i).select(qtable_state(req.obs), req.mask, eps_, rngs_[i]));
    }

    void on_transition(const World&, const Transition& tr) override {
        const double r = local_reward(tr.event, reward_);
        tables_.at(tr.node.index())
            .update(qtable_state(tr.obs), qtable_action_index(tr.action), r, qtable_state(tr.next_obs), tr.next_mask, tr.terminal,
                    cfg_.alpha, cfg_.gamma);
    }

    const QTable& table(NodeId n) const { return tables_.at(n.index()); }
    QTable& table_mut(NodeId n) { return tables_.at(n.index()); }
    std::size_t size() const { return tables_.size(); }
    double epsilon() const { return eps_; }

private:
    QTableConfig cfg_;
    RewardConfig reward_;
    std::vector<QTable> tables_;
    std::vector<std::mt19937_64> rngs_;
    double eps_ = 1.0;
};

inline std::vector<char> encode_qtable(const QTable& t) {
    ByteWriter w;
    w.put(static_cast<std::uint32_t>(qtable_states));
    w.put(static_cast<std::uint32_t>(qtable_actions));
    for (double v : t.values()) w.put(v);
    return w.take();
}

inline QTable decode_qtable(const std::vector<char>& bytes) {
    ByteReader r(bytes);
    if (r.get<std::uint32_t>() != qtable_states || r.get<std::uint32_t>() != qtable_actions)
        throw IoError("checkpoint Q-table has a different shape");
    QTable t;
    for (std::size_t s = 0; s < qtable_states; ++s)
        for (std::size_t a = 0; a < qtable_actions; ++a) t.value(s, a) = r.get<double>();
    if (!r.done()) throw IoError("checkpoint Q-table record has trailing bytes");
    return t;
}

inline void put_qtables(Checkpoint& c, const QTableController& ctl) {
    for (std::size_t i = 0; i < ctl.size(); ++i)
        c.put_record("qtable/" + std::to_string(i), RecordKind::qtable, encode_qtable(ctl.table(NodeId(static_cast<std::int32_t>(i)))));
}

inline void get_qtables(const Checkpoint& c, QTableController& ctl) {
    for (std::size_t i = 0; i < ctl.size(); ++i) {
        const std::string name = "qtable/" + std::to_string(i);
        if (c.has(name)) ctl.table_mut(NodeId(static_cast<std::int32_t>(i))) = decode_qtable(c.record(name, RecordKind::qtable).payload);
    }
}

} // namespace ehrl
