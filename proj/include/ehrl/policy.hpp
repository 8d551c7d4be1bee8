#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "ehrl/error.hpp"
#include "ehrl/mlp.hpp"
#include "ehrl/observation.hpp"

namespace ehrl {

inline constexpr int policy_output_dim = static_cast<int>(energy_choices + relay_choices);

struct PolicyOutput {
    std::array<double, energy_choices> energy{};
    std::array<double, relay_choices> relay{};
};

// Softmax over `n` logits; entries with mask bit clear get exactly zero.
// Returns log-probabilities alongside (masked entries: -inf).
template <typename It, typename Real>
inline void masked_softmax(It logits, std::size_t n, std::uint32_t mask, Real* probs, Real* logp = nullptr) {
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if ((mask >> i) & 1u) mx = std::max(mx, static_cast<Real>(logits[i]));
    if (!std::isfinite(mx)) throw ContractError("softmax over an empty mask");
    Real z = 0;
    for (std::size_t i = 0; i < n; ++i)
        if ((mask >> i) & 1u) z += std::exp(static_cast<Real>(logits[i]) - mx);
    const Real lz = std::log(z);
    for (std::size_t i = 0; i < n; ++i) {
        if ((mask >> i) & 1u) {
            Real lp = static_cast<Real>(logits[i]) - mx - lz;
            probs[i] = std::exp(lp);
            if (logp) logp[i] = lp;
        } else {
            probs[i] = 0;
            if (logp) logp[i] = -std::numeric_limits<Real>::infinity();
        }
    }
}

template <typename Scalar, typename It>
inline PolicyOutput policy_from_logits(It logits, NeighborMask mask) {
    if (mask.empty()) throw ContractError("no valid relay slot: node has no neighbors");
    PolicyOutput out;
    masked_softmax(logits, energy_choices, (1u << energy_choices) - 1u, out.energy.data());
    masked_softmax(logits + energy_choices, relay_choices, mask.bits, out.relay.data());
    return out;
}

template <typename Scalar>
inline Mat<Scalar> observation_column(const Observation& obs) {
    Mat<Scalar> x(static_cast<Eigen::Index>(obs_dim), 1);
    for (std::size_t i = 0; i < obs_dim; ++i) x(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(obs.values[i]);
    return x;
}

// Energy-threshold and relay distributions of the actor for one observation.
template <typename Scalar>
inline PolicyOutput forward_policy(const Mlp<Scalar>& actor, const Observation& obs, NeighborMask mask) {
    if (actor.output_dim() != policy_output_dim) throw ContractError("model is not actor-shaped");
    if (mask.empty()) throw ContractError("no valid relay slot: node has no neighbors");
    Mat<Scalar> logits = actor.forward(observation_column<Scalar>(obs));
    return policy_from_logits<Scalar>(logits.data(), mask);
}

template <std::size_t N>
inline int sample_categorical(const std::array<double, N>& p, std::mt19937_64& rng) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    int last = -1;
    for (std::size_t i = 0; i < N; ++i) {
        if (p[i] <= 0.0) continue;
        acc += p[i];
        last = static_cast<int>(i);
        if (u < acc) return last;
    }
    return last; // round-off at the top end
}

// Training-time action: both heads sampled. With `routing_only` the energy
// head is ignored and the threshold stays at the lowest level.
inline AgentAction sample_action(const PolicyOutput& p, std::mt19937_64& rng, bool routing_only = false) {
    AgentAction a;
    a.energy_index = routing_only ? 0 : sample_categorical(p.energy, rng);
    a.relay_slot = sample_categorical(p.relay, rng);
    return a;
}

template <std::size_t N>
inline int argmax_lowest(const std::array<double, N>& p, std::uint32_t mask = 0xFFFFFFFFu) {
    int best = -1;
    for (std::size_t i = 0; i < N; ++i) {
        if (!((mask >> i) & 1u)) continue;
        if (best < 0 || p[i] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

// Greedy action; ties resolve to the lowest index, masked slots never win.
inline AgentAction greedy_action(const PolicyOutput& p, NeighborMask mask) {
    if (mask.empty()) throw ContractError("no valid relay slot: node has no neighbors");
    return AgentAction{argmax_lowest(p.energy), argmax_lowest(p.relay, mask.bits)};
}

template <typename Scalar>
inline AgentAction infer_policy(const Mlp<Scalar>& actor, const Observation& obs, NeighborMask mask) {
    return greedy_action(forward_policy(actor, obs, mask), mask);
}

} // namespace ehrl
