#pragma once

#include <cmath>
#include <type_traits>
#include <vector>

#include "ehrl/error.hpp"
#include "ehrl/mlp.hpp"
#include "ehrl/observation.hpp"
#include "ehrl/policy.hpp"

namespace ehrl {

// One agent step as consumed by the learner; `reward` is the spatial reward.
struct Experience {
    Observation obs;
    NeighborMask mask;
    AgentAction action;
    double reward = 0.0;
    Observation next_obs;
    NeighborMask next_mask;
    bool terminal = false;
};

using ExperienceBatch = std::vector<Experience>;

template <typename Scalar>
inline Mat<Scalar> stack_states(const ExperienceBatch& batch) {
    Mat<Scalar> x(static_cast<Eigen::Index>(obs_dim), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b)
        for (std::size_t i = 0; i < obs_dim; ++i)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = static_cast<Scalar>(batch[b].obs.values[i]);
    return x;
}

// R_t = r_t + gamma * R_{t+1}, seeded with `bootstrap`; a terminal step does
// not look past itself.
inline std::vector<double> n_step_returns(const std::vector<double>& rewards, double bootstrap, double gamma,
                                          const std::vector<bool>& terminal = {}) {
    if (rewards.empty()) throw ContractError("n-step returns of an empty batch");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractError("discount must lie in (0, 1]");
    std::vector<double> out(rewards.size());
    double next = bootstrap;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        if (!terminal.empty() && terminal[t]) next = 0.0;
        next = rewards[t] + gamma * next;
        out[t] = next;
    }
    return out;
}

// Loss-head arithmetic: double, or the model precision when that is wider.
template <typename Scalar>
using Accumulator = std::conditional_t<(sizeof(Scalar) > sizeof(double)), Scalar, double>;

template <typename Scalar>
struct LossAndGrads {
    Accumulator<Scalar> loss = 0;
    MlpGradients<Scalar> grads;
    std::vector<double> outputs; // critic values, or log pi(a|s) for the actor
};

// L = 1/(2B) * sum (R_t - V(s_t))^2
template <typename Scalar>
inline LossAndGrads<Scalar> critic_loss_and_grads(const Mlp<Scalar>& critic, const Mat<Scalar>& states,
                                                  const std::vector<double>& returns) {
    if (critic.output_dim() != 1) throw ContractError("model is not critic-shaped");
    const auto B = states.cols();
    if (static_cast<std::size_t>(B) != returns.size() || B == 0) throw ContractError("returns misaligned with batch");
    typename Mlp<Scalar>::Cache cache;
    Mat<Scalar> v = critic.forward(states, cache);
    Mat<Scalar> grad(1, B);
    LossAndGrads<Scalar> out;
    out.outputs.resize(static_cast<std::size_t>(B));
    using Acc = Accumulator<Scalar>;
    Acc loss = 0;
    for (Eigen::Index b = 0; b < B; ++b) {
        const Acc diff = static_cast<Acc>(returns[static_cast<std::size_t>(b)]) - static_cast<Acc>(v(0, b));
        loss += diff * diff;
        grad(0, b) = static_cast<Scalar>(-diff / static_cast<Acc>(B));
        out.outputs[static_cast<std::size_t>(b)] = static_cast<double>(v(0, b));
    }
    out.loss = loss / (2 * static_cast<Acc>(B));
    out.grads = critic.backward(cache, grad);
    return out;
}

// L = -1/B * sum log pi(a_t|s_t) * Ad_t with pi factored into the energy and
// relay heads. Advantages are constants. `routing_only` drops the energy term.
// A positive `entropy_coef` subtracts coef * H(pi) per sample (off by default).
template <typename Scalar>
inline LossAndGrads<Scalar> actor_loss_and_grads(const Mlp<Scalar>& actor, const Mat<Scalar>& states,
                                                 const std::vector<NeighborMask>& masks,
                                                 const std::vector<AgentAction>& actions,
                                                 const std::vector<double>& advantages, bool routing_only = false,
                                                 double entropy_coef = 0.0) {
    if (actor.output_dim() != policy_output_dim) throw ContractError("model is not actor-shaped");
    const auto B = states.cols();
    const auto n = static_cast<std::size_t>(B);
    if (B == 0 || masks.size() != n || actions.size() != n || advantages.size() != n)
        throw ContractError("actor batch fields misaligned");
    typename Mlp<Scalar>::Cache cache;
    Mat<Scalar> logits = actor.forward(states, cache);
    Mat<Scalar> grad = Mat<Scalar>::Zero(policy_output_dim, B);
    LossAndGrads<Scalar> out;
    out.outputs.resize(n);
    using Acc = Accumulator<Scalar>;
    Acc loss = 0;
    const Acc inv_b = Acc(1) / static_cast<Acc>(B);
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto& a = actions[static_cast<std::size_t>(b)];
        const auto mask = masks[static_cast<std::size_t>(b)];
        if (!mask.valid(static_cast<std::size_t>(a.relay_slot))) throw ContractError("chosen relay slot is masked");
        if (a.energy_index < 0 || a.energy_index >= static_cast<int>(energy_choices)) throw ContractError("energy index out of range");
        std::array<Acc, energy_choices> pe{}, lpe{};
        std::array<Acc, relay_choices> pr{}, lpr{};
        const Scalar* col = logits.col(b).data();
        masked_softmax(col, energy_choices, (1u << energy_choices) - 1u, pe.data(), lpe.data());
        masked_softmax(col + energy_choices, relay_choices, mask.bits, pr.data(), lpr.data());
        const Acc adv = static_cast<Acc>(advantages[static_cast<std::size_t>(b)]);
        Acc logpi = lpr[static_cast<std::size_t>(a.relay_slot)];
        if (!routing_only) logpi += lpe[static_cast<std::size_t>(a.energy_index)];
        out.outputs[static_cast<std::size_t>(b)] = static_cast<double>(logpi);
        loss -= logpi * adv;
        // d(-adv*log p_k)/dz_i = -adv * (1[i==k] - p_i)
        if (!routing_only) {
            for (std::size_t i = 0; i < energy_choices; ++i) {
                const Acc onehot = static_cast<int>(i) == a.energy_index ? 1 : 0;
                grad(static_cast<Eigen::Index>(i), b) = static_cast<Scalar>(-adv * (onehot - pe[i]) * inv_b);
            }
        }
        for (std::size_t i = 0; i < relay_choices; ++i) {
            if (!mask.valid(i)) continue;
            const Acc onehot = static_cast<int>(i) == a.relay_slot ? 1 : 0;
            grad(static_cast<Eigen::Index>(energy_choices + i), b) = static_cast<Scalar>(-adv * (onehot - pr[i]) * inv_b);
        }
        if (entropy_coef != 0.0) {
            // dH/dz_i = -p_i (log p_i + H)
            const Acc coef = static_cast<Acc>(entropy_coef);
            auto add_entropy = [&](const Acc* p, const Acc* lp, std::size_t n, std::uint32_t m, std::size_t offset) {
                Acc h = 0;
                for (std::size_t i = 0; i < n; ++i)
                    if ((m >> i) & 1u) h -= p[i] * lp[i];
                loss -= coef * h;
                for (std::size_t i = 0; i < n; ++i)
                    if ((m >> i) & 1u)
                        grad(static_cast<Eigen::Index>(offset + i), b) += static_cast<Scalar>(coef * p[i] * (lp[i] + h) * inv_b);
            };
            if (!routing_only) add_entropy(pe.data(), lpe.data(), energy_choices, (1u << energy_choices) - 1u, 0);
            add_entropy(pr.data(), lpr.data(), relay_choices, mask.bits, energy_choices);
        }
    }
    out.loss = loss * inv_b;
    out.grads = actor.backward(cache, grad);
    return out;
}

} // namespace ehrl
