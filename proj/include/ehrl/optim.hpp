#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "ehrl/error.hpp"
#include "ehrl/mlp.hpp"

namespace ehrl {

// Plain descent step w <- w - lr * g.
template <typename Scalar>
inline void apply_gradients(Mlp<Scalar>& model, const MlpGradients<Scalar>& g, double lr) {
    if (!model.same_shape(g)) throw ContractError("gradient shape does not match model");
    const Scalar k = static_cast<Scalar>(lr);
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        model.layers()[i].w.noalias() -= k * g.layers[i].w;
        model.layers()[i].b.noalias() -= k * g.layers[i].b;
    }
}

// Rescales g so its global L2 norm is at most max_norm. Returns the norm before clipping.
template <typename Scalar>
inline double clip_global_norm(MlpGradients<Scalar>& g, double max_norm) {
    double n = g.norm();
    if (max_norm > 0.0 && n > max_norm) g.scale(static_cast<Scalar>(max_norm / n));
    return n;
}

enum class OptimizerKind { sgd, adam };

inline OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}
inline std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Stateful update rule owned alongside the weights it updates.
template <typename Scalar>
class Optimizer {
public:
    Optimizer() = default;
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    const OptimizerConfig& config() const { return cfg_; }
    std::uint64_t steps() const { return t_; }

    // Updates `model` in place.
    void step(Mlp<Scalar>& model, const MlpGradients<Scalar>& g, double lr) {
        if (!model.same_shape(g)) throw ContractError("gradient shape does not match model");
        run(model, model, g, lr);
    }

    // Returns the updated copy of `src`, written in the same sweep that reads it.
    Mlp<Scalar> stepped(const Mlp<Scalar>& src, const MlpGradients<Scalar>& g, double lr) {
        if (!src.same_shape(g)) throw ContractError("gradient shape does not match model");
        std::vector<DenseLayer<Scalar>> layers;
        layers.reserve(src.layers().size());
        for (const auto& l : src.layers()) layers.push_back({Mat<Scalar>(l.w.rows(), l.w.cols()), Vec<Scalar>(l.b.size())});
        auto dst = Mlp<Scalar>::from_layers(src.dims(), src.activation(), std::move(layers));
        run(src, dst, g, lr);
        return dst;
    }

private:
    // dst = src - update(g); dst may alias src.
    void run(const Mlp<Scalar>& src, Mlp<Scalar>& dst, const MlpGradients<Scalar>& g, double lr) {
        ++t_;
        using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
        constexpr Eigen::Index chunk = 2048; // keeps each block's sweeps in L1
        auto blocks = [&](const auto& from, auto& to, auto body) {
            for (Eigen::Index k = 0; k < from.size(); k += chunk) {
                const Eigen::Index n = std::min(chunk, from.size() - k);
                body(Eigen::Map<const Arr>(from.data() + k, n), Eigen::Map<Arr>(to.data() + k, n), k, n);
            }
        };
        if (cfg_.kind == OptimizerKind::sgd) {
            const Scalar rate = static_cast<Scalar>(lr);
            auto sgd = [&](const auto& from, auto& to, const auto& grad) {
                blocks(from, to, [&](auto wk, auto out, Eigen::Index k, Eigen::Index n) {
                    out = wk - rate * Eigen::Map<const Arr>(grad.data() + k, n);
                });
            };
            for (std::size_t i = 0; i < g.layers.size(); ++i) {
                sgd(src.layers()[i].w, dst.layers()[i].w, g.layers[i].w);
                sgd(src.layers()[i].b, dst.layers()[i].b, g.layers[i].b);
            }
            return;
        }
        if (m_.layers.empty()) {
            m_ = src.zero_gradients();
            v_ = src.zero_gradients();
        }
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        const Scalar b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
        const Scalar step = static_cast<Scalar>(lr * std::sqrt(c2) / c1);
        const Scalar eps = static_cast<Scalar>(cfg_.epsilon);
        auto adam = [&](const auto& from, auto& to, auto& m, auto& v, const auto& grad) {
            blocks(from, to, [&](auto wk, auto out, Eigen::Index k, Eigen::Index n) {
                Eigen::Map<Arr> mk(m.data() + k, n), vk(v.data() + k, n);
                Eigen::Map<const Arr> gk(grad.data() + k, n);
                mk = b1 * mk + (Scalar(1) - b1) * gk;
                vk = b2 * vk + (Scalar(1) - b2) * gk.square();
                out = wk - step * mk / (vk.sqrt() + eps);
            });
        };
        for (std::size_t i = 0; i < g.layers.size(); ++i) {
            adam(src.layers()[i].w, dst.layers()[i].w, m_.layers[i].w, v_.layers[i].w, g.layers[i].w);
            adam(src.layers()[i].b, dst.layers()[i].b, m_.layers[i].b, v_.layers[i].b, g.layers[i].b);
        }
    }

    OptimizerConfig cfg_;
    std::uint64_t t_ = 0;
    MlpGradients<Scalar> m_, v_;
};

} // namespace ehrl
