#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "ehrl/energy.hpp"
#include "ehrl/error.hpp"
#include "ehrl/events.hpp"
#include "ehrl/harvest.hpp"
#include "ehrl/observation.hpp"
#include "ehrl/packet.hpp"
#include "ehrl/rate.hpp"
#include "ehrl/topology.hpp"

namespace ehrl {

struct WorldConfig {
    PowerProfile power;
    RateModel rate;
    double e_max_j = 1.0;
    std::int64_t packet_min_bits = 3720;
    std::int64_t packet_max_bits = 5120;
    double sense_rate_bps = 80.0;
    std::int64_t queue_capacity_bits = 15 * 5120;
    int max_hops = 8;
    double expiry_s = 1800.0;
    double day_start_s = 8 * seconds_per_hour;
    double day_end_s = 17 * seconds_per_hour;
    double tick_s = 1.0;
    double reeval_period_s = 10.0;
    std::uint64_t seed = 1;

    void validate() const {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw ConfigError(what);
        };
        require(power.trans_w > 0 && power.recv_w > 0 && power.sleep_w > 0 && power.sense_w > 0, "power draws must be positive");
        require(e_max_j > 0, "energy capacity must be positive");
        require(packet_min_bits > 0 && packet_min_bits <= packet_max_bits, "packet size range is invalid");
        require(sense_rate_bps >= 0, "sensing rate must be non-negative");
        require(queue_capacity_bits >= packet_max_bits, "queue must hold at least one packet");
        require(max_hops >= 1, "hop budget must be at least 1");
        require(expiry_s > 0, "expiration time must be positive");
        require(day_start_s < day_end_s, "day start must precede day end");
        require(tick_s > 0, "tick must be positive");
        require(reeval_period_s > 0, "re-evaluation period must be positive");
        require(rate.mode == RateMode::log_distance || rate.constant_rate_bps > 0, "constant rate must be positive");
    }
};

struct NodeMetrics {
    std::int64_t sensed_bits = 0;        // every packet the sensor produced, kept or not
    std::int64_t sense_dropped_bits = 0; // produced while the queue was full
    std::int64_t received_bits = 0;      // bits that arrived over the radio (kept or dropped)
    std::int64_t transmitted_ok_bits = 0;
    std::int64_t attempted_bits = 0;     // every radio attempt including failures
    std::int64_t dropped_bits = 0;       // sense overflow plus loop/hop/time drops at this node
    std::int64_t queued_end_bits = 0;
    std::int64_t in_flight_bits = 0;
    std::int64_t decisions = 0;
    std::array<double, activity_count> energy_j{};
    double harvested_j = 0.0;
    double clipped_j = 0.0;
    std::array<std::int64_t, outcome_count> outcomes{};

    std::int64_t outcome(Outcome o) const { return outcomes[static_cast<std::size_t>(o)]; }
    bool conserved() const {
        return sensed_bits + received_bits == transmitted_ok_bits + dropped_bits + queued_end_bits + in_flight_bits;
    }
};

// Counters of constraint breaches; all stay zero in a correct simulation.
struct Violations {
    std::int64_t energy_bounds = 0;
    std::int64_t energy_balance = 0;
    std::int64_t queue_capacity = 0;
    std::int64_t hop_budget = 0;
    std::int64_t time_budget = 0;
    std::int64_t conservation = 0;
    std::int64_t fifo = 0;

    std::int64_t total() const { return energy_bounds + energy_balance + queue_capacity + hop_budget + time_budget + conservation + fifo; }
    Violations& operator+=(const Violations& o) {
        energy_bounds += o.energy_bounds;
        energy_balance += o.energy_balance;
        queue_capacity += o.queue_capacity;
        hop_budget += o.hop_budget;
        time_budget += o.time_budget;
        conservation += o.conservation;
        fifo += o.fifo;
        return *this;
    }
};

class World;

struct DecisionRequest {
    NodeId node;
    double t = 0.0;
    const Observation& obs;
    NeighborMask mask;
};

// Per-node decision makers plugged into the world. act() is called at each
// decision epoch; the hooks stream outcomes and completed agent steps.
class Controller {
public:
    virtual ~Controller() = default;
    virtual AgentAction act(const World& world, const DecisionRequest& req) = 0;
    virtual void on_day_start(const World&) {}
    virtual void on_event(const World&, const StepEvent&) {}
    virtual void on_transition(const World&, const Transition&) {}
    virtual void on_day_end(const World&) {}
};

struct ActiveTransmission {
    NodeId dest;
    Packet packet;
    AgentAction action;
    double start = 0.0;
    double end = 0.0;
    bool receiver_offline = false;
    double sender_failed_at = std::numeric_limits<double>::infinity();

    bool sender_failed() const { return std::isfinite(sender_failed_at); }
    double completion() const { return sender_failed() ? sender_failed_at : end; }
};

struct PendingSend {
    AgentAction action;
    double since = 0.0;
};

struct OpenStep {
    Observation obs;
    NeighborMask mask;
    AgentAction action;
    double t_action = 0.0;
    std::optional<StepEvent> event;
};

struct NodeState {
    EnergyState energy;
    TransmitQueue queue;
    double sense_accum_bits = 0.0;
    std::int64_t next_packet_bits = 0;
    int latched_energy_index = 0;
    std::optional<ActiveTransmission> tx;
    std::int32_t rx_from = -1; // sender currently delivering to this node
    std::optional<PendingSend> pending;
    double last_epoch = -std::numeric_limits<double>::infinity();
    std::optional<OpenStep> open;
    NodeMetrics metrics;
    std::mt19937_64 rng;
    bool sensor_on = false;
    double sensor_time = 0.0; // sensing seconds in the current tick

    double threshold_j(double e_max) const { return energy_levels[static_cast<std::size_t>(latched_energy_index)] * e_max; }
};

// Discrete-time multi-hop energy-harvesting network. One instance simulates one
// day at a time; it is confined to a single thread.
class World {
public:
    World(Topology topology, WorldConfig config, HarvestSource harvest)
        : topo_(std::move(topology)), cfg_(config), harvest_(std::move(harvest)) {
        cfg_.validate();
        if (topo_.node_count() > slot_count)
            throw ConfigError("at most " + std::to_string(slot_count) + " nodes fit the observation encoding");
        nodes_.resize(topo_.node_count());
        reset(0);
    }

    const Topology& topology() const { return topo_; }
    const WorldConfig& config() const { return cfg_; }
    double now() const { return t_; }
    int day() const { return day_; }
    bool finished() const { return t_ >= cfg_.day_end_s - 1e-9; }
    std::int64_t sink_received_bits() const { return sink_bits_; }
    std::int64_t sink_received_packets() const { return sink_packets_; }
    const Violations& violations() const { return violations_; }
    void set_event_log(std::ostream* log) {
        log_ = log;
        if (log_) *log_ << "t,node,outcome,packet_id,dest,h,tau\n";
    }

    const NodeState& node(NodeId n) const { return nodes_.at(n.index()); }
    // Direct state access for scripted scenarios and tests.
    NodeState& node_mut(NodeId n) { return nodes_.at(n.index()); }
    const HarvestTrace& trace(NodeId n) const { return traces_.at(n.index()); }
    double harvest_now(NodeId n) const { return traces_.at(n.index()).power_at(t_); }

    // Starts day `day`: fresh traces, empty queues, full stores, t = day start.
    void reset(int day) {
        day_ = day;
        t_ = cfg_.day_start_s;
        next_packet_id_ = 1;
        sink_bits_ = 0;
        sink_packets_ = 0;
        violations_ = {};
        traces_ = harvest_.traces_for_day(topo_.node_count(), day);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            NodeState& n = nodes_[i];
            n = NodeState{};
            n.energy = EnergyState::full(cfg_.e_max_j);
            n.queue = TransmitQueue(cfg_.queue_capacity_bits);
            n.rng.seed(derive_seed(cfg_.seed, i, static_cast<std::uint64_t>(day), 0x5e45));
            n.next_packet_bits = draw_packet_size(n);
        }
    }

    NeighborMask mask(NodeId n) const { return NeighborMask::first(topo_.neighbors(n).size()); }

    Observation observe(NodeId id) const {
        Observation o;
        const NodeState& self = node(id);
        o.energy(0) = static_cast<float>(self.energy.e_res / self.energy.e_max);
        o.queue(0) = static_cast<float>(self.queue.fill());
        const auto& nb = topo_.neighbors(id);
        for (std::size_t s = 0; s < nb.size() && s + 1 < slot_count; ++s) {
            if (topo_.is_sink(nb[s])) {
                o.energy(s + 1) = 1.0f;
                o.queue(s + 1) = 0.0f;
            } else {
                const NodeState& m = node(nb[s]);
                o.energy(s + 1) = static_cast<float>(m.energy.e_res / m.energy.e_max);
                o.queue(s + 1) = static_cast<float>(m.queue.fill());
            }
        }
        if (!self.queue.empty()) {
            auto src = self.queue.front().source.index();
            if (src < slot_count) o.source(src) = 1.0f;
        }
        double frac = (t_ - cfg_.day_start_s) / (cfg_.day_end_s - cfg_.day_start_s);
        o.time_frac() = static_cast<float>(std::clamp(frac, 0.0, 1.0));
        return o;
    }

    bool radio_busy(NodeId id) const {
        const NodeState& n = node(id);
        return n.tx.has_value() || n.rx_from >= 0;
    }

    // Whether `id` takes a decision at the current instant: radio free, data to
    // send, and either above its latched threshold or due for re-evaluation.
    bool decision_due(NodeId id) const {
        if (topo_.is_sink(id)) return false;
        const NodeState& n = node(id);
        if (radio_busy(id) || n.pending || n.queue.empty()) return false;
        if (n.energy.e_res > n.threshold_j(n.energy.e_max)) return true;
        return t_ - n.last_epoch >= cfg_.reeval_period_s - 1e-9;
    }

    std::optional<Observation> decision_epoch(NodeId id) const {
        if (!decision_due(id)) return std::nullopt;
        return observe(id);
    }

    // Accumulates `on_time` seconds of sensing; emits packets as the accumulator
    // reaches each drawn packet size. Returns the number of packets produced.
    int sense_tick(NodeId id, double on_time) {
        NodeState& n = node_mut(id);
        if (on_time <= 0.0 || cfg_.sense_rate_bps <= 0.0) return 0;
        double start_bits = n.sense_accum_bits;
        n.sense_accum_bits += cfg_.sense_rate_bps * on_time;
        int produced = 0;
        while (n.sense_accum_bits + 1e-9 >= static_cast<double>(n.next_packet_bits)) {
            const std::int64_t size = n.next_packet_bits;
            double at = t_ + std::clamp((static_cast<double>(size) - start_bits) / cfg_.sense_rate_bps, 0.0, cfg_.tick_s);
            n.sense_accum_bits = std::max(0.0, n.sense_accum_bits - static_cast<double>(size));
            start_bits -= static_cast<double>(size);
            n.next_packet_bits = draw_packet_size(n);
            Packet p{next_packet_id_++, id, size, 0, 0.0, at};
            n.metrics.sensed_bits += size;
            if (n.queue.fits(size)) {
                n.queue.push(p);
            } else {
                n.metrics.sense_dropped_bits += size;
                n.metrics.dropped_bits += size;
            }
            ++produced;
        }
        return produced;
    }

    // Latches the threshold; below it the node only senses and harvests,
    // otherwise the head packet goes to the chosen neighbor (deferred while that
    // neighbor's radio is busy).
    void apply_action(NodeId id, const AgentAction& a, Controller* ctl = nullptr) {
        NodeState& n = node_mut(id);
        const auto m = mask(id);
        if (a.energy_index < 0 || a.energy_index >= static_cast<int>(energy_choices))
            throw ContractError("energy threshold index out of range");
        if (!m.valid(static_cast<std::size_t>(a.relay_slot)))
            throw ContractError("invalid action: relay slot " + std::to_string(a.relay_slot) + " is masked for node " + std::to_string(id.value));
        if (n.queue.empty()) throw ContractError("apply_action on a node with nothing to send");
        n.latched_energy_index = a.energy_index;
        if (n.energy.e_res <= n.threshold_j(n.energy.e_max)) {
            StepEvent ev = base_event(id, a, t_, Outcome::gated_by_threshold);
            ev.dest = topo_.neighbors(id)[static_cast<std::size_t>(a.relay_slot)];
            publish(ctl, ev);
            return;
        }
        if (!try_start(id, a)) n.pending = PendingSend{a, t_};
    }

    // Advances one tick: decisions at the tick start, then energy, transfers
    // completing within the tick, and sensing.
    void step(Controller& ctl) {
        if (finished()) throw ContractError("day already finished");
        const double t0 = t_;
        const double t1 = t_ + cfg_.tick_s;

        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            NodeId id(static_cast<std::int32_t>(i));
            if (topo_.is_sink(id)) continue;
            NodeState& n = nodes_[i];
            if (n.pending && !radio_busy(id)) {
                if (t0 - n.pending->since >= cfg_.reeval_period_s - 1e-9) {
                    StepEvent ev = base_event(id, n.pending->action, t0, Outcome::idle);
                    n.pending.reset();
                    publish(&ctl, ev);
                } else {
                    if (try_start(id, n.pending->action)) n.pending.reset();
                    continue;
                }
            }
            if (decision_due(id)) decide(id, ctl);
        }

        for (auto& n : nodes_) {
            n.sensor_on = n.energy.e_res > 0.0 && cfg_.sense_rate_bps > 0.0;
            n.sensor_time = 0.0;
        }
        // Senders first: a sender running dry cuts its receiver's reception short.
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            NodeState& n = nodes_[i];
            if (!n.tx || topo_.is_sink(NodeId(static_cast<std::int32_t>(i)))) continue;
            double until = std::min(n.tx->end, t1);
            auto dep = integrate(i, Activity::trans, until, t0, t1);
            if (dep && *dep < until) n.tx->sender_failed_at = *dep;
        }
        for (std::size_t j = 0; j < nodes_.size(); ++j) {
            NodeId jd(static_cast<std::int32_t>(j));
            NodeState& n = nodes_[j];
            if (topo_.is_sink(jd) || n.tx) continue;
            if (n.rx_from >= 0) {
                const ActiveTransmission& tx = *nodes_[static_cast<std::size_t>(n.rx_from)].tx;
                double until = std::min({tx.end, tx.sender_failed_at, t1});
                auto dep = integrate(j, Activity::recv, until, t0, t1);
                if (dep && *dep < until) {
                    nodes_[static_cast<std::size_t>(n.rx_from)].tx->receiver_offline = true;
                    n.rx_from = -1;
                }
            } else {
                integrate(j, std::nullopt, t0, t0, t1);
            }
        }

        std::vector<std::pair<double, std::size_t>> done;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& tx = nodes_[i].tx;
            if (tx && tx->completion() <= t1 + 1e-9) done.emplace_back(tx->completion(), i);
        }
        std::sort(done.begin(), done.end());
        for (auto [tc, i] : done) complete(NodeId(static_cast<std::int32_t>(i)), tc, ctl);

        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            NodeId id(static_cast<std::int32_t>(i));
            if (topo_.is_sink(id)) continue;
            sense_tick(id, nodes_[i].sensor_time);
            if (nodes_[i].queue.bits() > cfg_.queue_capacity_bits) ++violations_.queue_capacity;
        }
        t_ = t1;
    }

    // Closes the day: unresolved decisions become idle, open steps are emitted
    // as terminal transitions, and end-of-day metrics are settled.
    void finish(Controller& ctl) {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            NodeId id(static_cast<std::int32_t>(i));
            if (topo_.is_sink(id)) continue;
            NodeState& n = nodes_[i];
            if (n.open && !n.open->event) {
                const AgentAction a = n.pending ? n.pending->action : n.open->action;
                publish(&ctl, base_event(id, a, t_, Outcome::idle));
            }
            if (n.open) emit_transition(id, observe(id), mask(id), t_, true, ctl);
            auto& m = n.metrics;
            m.in_flight_bits = n.tx ? n.tx->packet.size_bits : 0;
            m.queued_end_bits = n.queue.bits() - m.in_flight_bits;
            m.energy_j = n.energy.consumed;
            m.harvested_j = n.energy.harvested;
            m.clipped_j = n.energy.clipped;
            if (!m.conserved()) ++violations_.conservation;
            const double flow = n.energy.e_init + n.energy.harvested + n.energy.consumed_total();
            if (std::abs(n.energy.balance() - n.energy.e_res) > 1e-10 * std::max(1.0, flow)) ++violations_.energy_balance;
        }
    }

    const std::vector<NodeState>& nodes() const { return nodes_; }

    // Puts a packet straight into a node's queue (scripted scenarios).
    void inject_packet(NodeId id, Packet p) {
        if (p.id == 0) p.id = next_packet_id_++;
        NodeState& n = node_mut(id);
        n.queue.push(p);
        n.metrics.sensed_bits += p.size_bits;
    }

private:
    std::int64_t draw_packet_size(NodeState& n) {
        std::uniform_int_distribution<std::int64_t> d(cfg_.packet_min_bits, cfg_.packet_max_bits);
        return d(n.rng);
    }

    StepEvent base_event(NodeId id, const AgentAction& a, double t, Outcome o) const {
        StepEvent ev;
        ev.t = t;
        ev.node = id;
        ev.action = a;
        ev.outcome = o;
        const NodeState& n = node(id);
        if (!n.queue.empty()) {
            const Packet& p = n.queue.front();
            ev.packet_id = p.id;
            ev.packet_source = p.source;
            ev.packet_bits = p.size_bits;
            ev.hops = p.hops;
            ev.tau = t - p.sensed_at;
        }
        return ev;
    }

    void publish(Controller* ctl, const StepEvent& ev) {
        NodeState& n = node_mut(ev.node);
        ++n.metrics.outcomes[static_cast<std::size_t>(ev.outcome)];
        if (n.open && !n.open->event) n.open->event = ev;
        if (log_) {
            *log_ << ev.t << ',' << ev.node.value << ',' << outcome_name(ev.outcome) << ',' << ev.packet_id << ','
                  << ev.dest.value << ',' << ev.hops << ',' << ev.tau << '\n';
        }
        if (ctl) ctl->on_event(*this, ev);
    }

    void emit_transition(NodeId id, const Observation& next, NeighborMask next_mask, double t, bool terminal, Controller& ctl) {
        NodeState& n = node_mut(id);
        Transition tr{id, n.open->obs, n.open->mask, n.open->action, *n.open->event, next, next_mask, n.open->t_action, t, terminal};
        n.open.reset();
        ctl.on_transition(*this, tr);
    }

    void decide(NodeId id, Controller& ctl) {
        NodeState& n = node_mut(id);
        Observation obs = observe(id);
        NeighborMask m = mask(id);
        if (n.open) emit_transition(id, obs, m, t_, false, ctl);
        AgentAction a = ctl.act(*this, DecisionRequest{id, t_, obs, m});
        n.open = OpenStep{obs, m, a, t_, std::nullopt};
        n.last_epoch = t_;
        ++n.metrics.decisions;
        apply_action(id, a, &ctl);
    }

    bool try_start(NodeId id, const AgentAction& a) {
        NodeState& n = node_mut(id);
        NodeId dst = topo_.neighbors(id)[static_cast<std::size_t>(a.relay_slot)];
        if (radio_busy(dst)) return false;
        const Packet& p = n.queue.front();
        double dur = transmission_time(static_cast<double>(p.size_bits), transmission_rate(topo_, cfg_.rate, id, dst));
        ActiveTransmission tx{dst, p, a, t_, t_ + dur};
        if (!topo_.is_sink(dst)) {
            const NodeState& r = node(dst);
            tx.receiver_offline = r.energy.e_res <= r.threshold_j(r.energy.e_max);
        }
        if (!tx.receiver_offline) node_mut(dst).rx_from = id.value;
        n.tx = tx;
        return true;
    }

    // Energy over [t0, t1) with the radio in `radio` until `radio_until`, asleep
    // afterwards. Returns the depletion instant if the store ran dry.
    std::optional<double> integrate(std::size_t i, std::optional<Activity> radio, double radio_until, double t0, double t1) {
        NodeState& n = nodes_[i];
        const double harvest = traces_[i].power_at(t0);
        std::optional<double> depleted;
        auto run = [&](double from, double to, std::optional<Activity> r) {
            if (to <= from || depleted) return;
            ActivityLoad load;
            load.add(cfg_.power, r ? *r : Activity::sleep);
            if (n.sensor_on) load.add(cfg_.power, Activity::sense);
            EnergyStep s = advance_energy(n.energy, load, harvest, to - from);
            if (n.sensor_on) n.sensor_time += s.powered_time;
            if (s.outcome == EnergyOutcome::depleted) {
                depleted = from + s.powered_time;
                n.sensor_on = false;
                double rest = t1 - *depleted;
                if (rest > 0.0) advance_energy(n.energy, ActivityLoad::single(cfg_.power, Activity::sleep), harvest, rest);
            }
        };
        if (radio) {
            run(t0, radio_until, radio);
            run(radio_until, t1, std::nullopt);
        } else {
            run(t0, t1, std::nullopt);
        }
        if (n.energy.e_res < 0.0 || n.energy.e_res > n.energy.e_max + 1e-12) ++violations_.energy_bounds;
        return depleted;
    }

    void complete(NodeId id, double tc, Controller& ctl) {
        NodeState& n = node_mut(id);
        ActiveTransmission tx = *n.tx;
        n.tx.reset();
        NodeId dst = tx.dest;
        if (node(dst).rx_from == id.value) node_mut(dst).rx_from = -1;
        if (n.queue.empty() || n.queue.front().id != tx.packet.id) {
            ++violations_.fifo;
            return;
        }
        const Packet& head = n.queue.front();
        n.metrics.attempted_bits += head.size_bits;

        Outcome o;
        const bool to_sink = topo_.is_sink(dst);
        const double age = tc - head.sensed_at;
        if (tx.sender_failed()) o = Outcome::transmitter_failed;
        else if (tx.receiver_offline) o = Outcome::receiver_offline;
        else if (!to_sink && !node(dst).queue.fits(head.size_bits)) o = Outcome::queue_overflow;
        else if (dst == head.source) o = Outcome::loop_return;
        else if (head.hops + 1 > cfg_.max_hops) o = Outcome::hop_expired;
        else if (age > cfg_.expiry_s) o = Outcome::time_expired;
        else o = to_sink ? Outcome::delivered_to_sink : Outcome::relayed_ok;

        StepEvent ev = base_event(id, tx.action, tc, o);
        ev.dest = dst;
        ev.tau = age;
        const bool moved = o == Outcome::delivered_to_sink || o == Outcome::relayed_ok || o == Outcome::loop_return ||
                           o == Outcome::hop_expired || o == Outcome::time_expired;
        if (moved) {
            Packet p = n.queue.pop();
            n.metrics.transmitted_ok_bits += p.size_bits;
            p.hops += 1;
            p.elapsed_s = age;
            ev.hops = p.hops;
            if (to_sink && o == Outcome::delivered_to_sink) {
                sink_bits_ += p.size_bits;
                ++sink_packets_;
                ev.receiver_queue_len = 1;
                if (p.hops > cfg_.max_hops) ++violations_.hop_budget;
                if (p.elapsed_s > cfg_.expiry_s) ++violations_.time_budget;
            } else if (!to_sink) {
                NodeState& r = node_mut(dst);
                r.metrics.received_bits += p.size_bits;
                if (o == Outcome::relayed_ok) {
                    r.queue.push(p);
                    ev.receiver_queue_len = static_cast<int>(r.queue.size());
                    if (r.queue.bits() > cfg_.queue_capacity_bits) ++violations_.queue_capacity;
                } else {
                    r.metrics.dropped_bits += p.size_bits;
                }
            }
        }
        publish(&ctl, ev);
    }

    Topology topo_;
    WorldConfig cfg_;
    HarvestSource harvest_;
    std::vector<HarvestTrace> traces_;
    std::vector<NodeState> nodes_;
    double t_ = 0.0;
    int day_ = 0;
    std::uint64_t next_packet_id_ = 1;
    std::int64_t sink_bits_ = 0;
    std::int64_t sink_packets_ = 0;
    Violations violations_;
    std::ostream* log_ = nullptr;
};

} // namespace ehrl
