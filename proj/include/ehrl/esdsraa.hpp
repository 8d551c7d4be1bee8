#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ehrl/error.hpp"
#include "ehrl/harvest.hpp"
#include "ehrl/observation.hpp"
#include "ehrl/world.hpp"

namespace ehrl {

struct EsdsraaConfig {
    double ewma_alpha = 0.2;   // weight of the newest delivery outcome
    double ewma_initial = 1.0; // optimistic start for unseen neighbors

    void validate() const {
        if (!(ewma_alpha > 0.0 && ewma_alpha <= 1.0)) throw ConfigError("EWMA weight must lie in (0, 1]");
        if (ewma_initial < 0.0 || ewma_initial > 1.0) throw ConfigError("EWMA initial value must lie in [0, 1]");
    }
};

// Per-device heuristic state; persists across days.
struct HeuristicState {
    std::vector<double> ewma;   // delivery success per neighbor id
    double budget_w = 0.0;      // spare power for radio work this hour
    int energy_index = 0;
    int budget_day = -1;
    int budget_hour = -1;
};

// Mean harvested power over [from, to) sampled each second; instants a recorded
// trace does not cover are skipped. Zero when nothing is covered.
inline double mean_harvest(const HarvestTrace& trace, double from, double to) {
    double sum = 0.0;
    int n = 0;
    for (double t = from; t < to; t += 1.0) {
        if (!trace.generated() && t < trace.times().front()) continue;
        sum += trace.power_at(t);
        ++n;
    }
    return n > 0 ? sum / n : 0.0;
}

// Smallest threshold level whose reserve covers the energy one worst-case
// packet needs beyond what the hourly budget supplies.
inline int esdsraa_energy_index(double budget_w, double trans_w, double max_packet_s, double e_max) {
    const double deficit = std::max(0.0, trans_w - std::max(0.0, budget_w)) * max_packet_s;
    for (std::size_t i = 0; i < energy_choices; ++i)
        if (energy_levels[i] * e_max >= deficit) return static_cast<int>(i);
    return static_cast<int>(energy_choices) - 1;
}

// Relay slot with the largest EWMA x geographic progress; ties toward the
// neighbor closer to the sink. Without any positive progress, EWMA alone.
inline int esdsraa_relay(const Topology& topo, NodeId self, const std::vector<double>& ewma) {
    const auto& nb = topo.neighbors(self);
    if (nb.empty()) throw ContractError("no valid relay slot: node has no neighbors");
    const NodeId sink = topo.sink();
    const double own = topo.distance(self, sink);
    auto pick = [&](bool use_progress) {
        int best = -1;
        double best_score = 0.0;
        for (std::size_t s = 0; s < nb.size() && s < relay_choices; ++s) {
            double progress = std::max(0.0, own - topo.distance(nb[s], sink));
            double score = ewma.at(nb[s].index()) * (use_progress ? progress : 1.0);
            if (use_progress && progress <= 0.0) continue;
            bool better = best < 0 || score > best_score ||
                          (score == best_score && topo.distance(nb[s], sink) < topo.distance(nb[static_cast<std::size_t>(best)], sink));
            if (better) {
                best = static_cast<int>(s);
                best_score = score;
            }
        }
        return best;
    };
    int slot = pick(true);
    return slot >= 0 ? slot : pick(false);
}

// Hourly energy budgeting plus delivery-rate and geography driven relaying.
// Deterministic: no random draws.
class EsdsraaController final : public Controller {
public:
    EsdsraaController(EsdsraaConfig cfg, std::size_t nodes) : cfg_(cfg), state_(nodes) {
        cfg_.validate();
        for (auto& s : state_) s.ewma.assign(nodes, cfg_.ewma_initial);
    }

    AgentAction act(const World& world, const DecisionRequest& req) override {
        HeuristicState& s = state_.at(req.node.index());
        refresh_budget(world, req.node, s);
        return AgentAction{s.energy_index, esdsraa_relay(world.topology(), req.node, s.ewma)};
    }

    void on_event(const World&, const StepEvent& ev) override {
        if (!is_attempt(ev.outcome) || ev.outcome == Outcome::transmitter_failed || ev.dest.value < 0) return;
        double& e = state_.at(ev.node.index()).ewma.at(ev.dest.index());
        const double x = is_success(ev.outcome) ? 1.0 : 0.0;
        e = (1.0 - cfg_.ewma_alpha) * e + cfg_.ewma_alpha * x;
    }

    const HeuristicState& state(NodeId n) const { return state_.at(n.index()); }
    HeuristicState& state_mut(NodeId n) { return state_.at(n.index()); }

private:
    void refresh_budget(const World& world, NodeId node, HeuristicState& s) const {
        const int hour = static_cast<int>(std::floor(world.now() / seconds_per_hour));
        if (s.budget_day == world.day() && s.budget_hour == hour) return;
        const auto& wc = world.config();
        const double start = hour * seconds_per_hour;
        const double predicted = mean_harvest(world.trace(node), start - seconds_per_hour, start);
        s.budget_w = std::max(0.0, predicted - wc.power.sense_w - wc.power.sleep_w);
        double max_packet_s = 0.0;
        for (NodeId nb : world.topology().neighbors(node))
            max_packet_s = std::max(max_packet_s, transmission_time(static_cast<double>(wc.packet_max_bits),
                                                                    transmission_rate(world.topology(), wc.rate, node, nb)));
        s.energy_index = esdsraa_energy_index(s.budget_w, wc.power.trans_w, max_packet_s, wc.e_max_j);
        s.budget_day = world.day();
        s.budget_hour = hour;
    }

    EsdsraaConfig cfg_;
    std::vector<HeuristicState> state_;
};

} // namespace ehrl
