#pragma once

#include <cstdint>
#include <vector>

#include "ehrl/reward.hpp"
#include "ehrl/world.hpp"

namespace ehrl {

struct EpisodeMetrics {
    int day = 0;
    double total_reward = 0.0;
    std::int64_t sink_received_bits = 0;
    std::int64_t sensed_bits = 0;
    double delivery_rate = 0.0;
    std::int64_t decisions = 0;
    std::vector<NodeMetrics> nodes;
    Violations violations;

    std::int64_t relayed_bits_total() const {
        std::int64_t s = 0;
        for (const auto& n : nodes) s += n.received_bits;
        return s;
    }
};

inline double delivery_rate(std::int64_t sink_bits, std::int64_t sensed_bits) {
    return static_cast<double>(sink_bits) / static_cast<double>(std::max<std::int64_t>(sensed_bits, 1));
}

namespace detail {

// Wraps a controller to total the local reward of every event.
class RewardTally final : public Controller {
public:
    RewardTally(Controller& inner, const RewardConfig& cfg) : inner_(inner), cfg_(cfg) {}
    AgentAction act(const World& w, const DecisionRequest& r) override { return inner_.act(w, r); }
    void on_day_start(const World& w) override { inner_.on_day_start(w); }
    void on_event(const World& w, const StepEvent& ev) override {
        total += local_reward(ev, cfg_);
        inner_.on_event(w, ev);
    }
    void on_transition(const World& w, const Transition& t) override { inner_.on_transition(w, t); }
    void on_day_end(const World& w) override { inner_.on_day_end(w); }

    double total = 0.0;

private:
    Controller& inner_;
    const RewardConfig& cfg_;
};

} // namespace detail

// Simulates one full day from its start and returns the day's metrics.
inline EpisodeMetrics run_episode(World& world, Controller& ctl, int day, const RewardConfig& reward) {
    world.reset(day);
    detail::RewardTally tally(ctl, reward);
    tally.on_day_start(world);
    while (!world.finished()) world.step(tally);
    world.finish(tally);
    tally.on_day_end(world);

    EpisodeMetrics m;
    m.day = day;
    m.total_reward = tally.total;
    m.sink_received_bits = world.sink_received_bits();
    for (std::size_t i = 0; i < world.nodes().size(); ++i) {
        if (world.topology().is_sink(NodeId(static_cast<std::int32_t>(i)))) {
            m.nodes.push_back(NodeMetrics{});
            continue;
        }
        const auto& nm = world.nodes()[i].metrics;
        m.nodes.push_back(nm);
        m.sensed_bits += nm.sensed_bits;
        m.decisions += nm.decisions;
    }
    m.delivery_rate = delivery_rate(m.sink_received_bits, m.sensed_bits);
    m.violations = world.violations();
    return m;
}

} // namespace ehrl
