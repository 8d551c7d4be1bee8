#pragma once

#include <cstdint>
#include <string_view>

#include "ehrl/observation.hpp"
#include "ehrl/topology.hpp"

namespace ehrl {

enum class Outcome : int {
    delivered_to_sink,
    relayed_ok,
    loop_return,
    hop_expired,
    time_expired,
    receiver_offline,
    queue_overflow,
    transmitter_failed, // sender's store ran dry mid-transmission
    gated_by_threshold,
    idle,               // decision produced no attempt (deferred send abandoned, day ended)
};
inline constexpr int outcome_count = 10;

inline constexpr std::string_view outcome_name(Outcome o) {
    switch (o) {
    case Outcome::delivered_to_sink: return "delivered_to_sink";
    case Outcome::relayed_ok: return "relayed_ok";
    case Outcome::loop_return: return "loop_return";
    case Outcome::hop_expired: return "hop_expired";
    case Outcome::time_expired: return "time_expired";
    case Outcome::receiver_offline: return "receiver_offline";
    case Outcome::queue_overflow: return "queue_overflow";
    case Outcome::transmitter_failed: return "transmitter_failed";
    case Outcome::gated_by_threshold: return "gated_by_threshold";
    case Outcome::idle: return "idle";
    }
    return "?";
}

inline constexpr bool is_success(Outcome o) { return o == Outcome::delivered_to_sink || o == Outcome::relayed_ok; }

// Outcomes of a completed radio transfer attempt (as opposed to gating/idle).
inline constexpr bool is_attempt(Outcome o) {
    return o != Outcome::gated_by_threshold && o != Outcome::idle;
}

struct StepEvent {
    double t = 0.0;
    NodeId node;
    AgentAction action;
    Outcome outcome = Outcome::idle;
    NodeId dest;
    std::uint64_t packet_id = 0;
    NodeId packet_source;
    std::int64_t packet_bits = 0;
    int hops = 0;          // hop count after this transfer
    double tau = 0.0;      // packet age at completion
    int receiver_queue_len = 0; // k, counting the arriving packet
};

// One agent step: the action taken at t_action and the state at the agent's
// next decision (or at day end when terminal).
struct Transition {
    NodeId node;
    Observation obs;
    NeighborMask mask;
    AgentAction action;
    StepEvent event;
    Observation next_obs;
    NeighborMask next_mask;
    double t_action = 0.0;
    double t_next = 0.0;
    bool terminal = false;
};

} // namespace ehrl
